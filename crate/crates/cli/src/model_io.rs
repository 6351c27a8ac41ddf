//! JSON serialization of trained rating models for the train/predict
//! subcommands.

use std::path::Path;

use mf_core::data::{FactorModel, Mat};
use mf_core::hmf::HmfModel;
use serde::{Deserialize, Serialize};

use crate::exit::{CliError, ErrorKind};

#[derive(Debug, Serialize, Deserialize)]
pub struct FactorsFile {
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    #[serde(default)]
    pub thresholds: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PmmmfThresholdsFile {
    pub r_levels: u8,
    /// `theta[user][rating-1]`, null where undefined.
    pub theta: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum ModelFile {
    Bmmmf {
        r_levels: u8,
        theta_cut: f64,
        factors: FactorsFile,
    },
    Mmmf {
        r_levels: u8,
        factors: FactorsFile,
    },
    Hmf {
        r_levels: u8,
        theta_cut: f64,
        stages: Vec<FactorsFile>,
    },
    Pmmmf {
        r_levels: u8,
        factors: FactorsFile,
        thresholds: PmmmfThresholdsFile,
    },
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn rows_to_mat(rows: &[Vec<f64>]) -> Result<Mat, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::new(ErrorKind::Data, "ragged matrix in model file"));
    }
    Ok(Mat::from_shape_fn((nrows, ncols), |(i, j)| rows[i][j]))
}

pub fn factors_to_file(model: &FactorModel) -> FactorsFile {
    FactorsFile {
        u: mat_to_rows(&model.u),
        v: mat_to_rows(&model.v),
        thresholds: model.thresholds.as_ref().map(mat_to_rows),
    }
}

pub fn factors_from_file(file: &FactorsFile) -> Result<FactorModel, CliError> {
    let model = FactorModel::new(rows_to_mat(&file.u)?, rows_to_mat(&file.v)?)
        .map_err(CliError::from)?;
    match &file.thresholds {
        Some(t) => model
            .with_thresholds(rows_to_mat(t)?)
            .map_err(CliError::from),
        None => Ok(model),
    }
}

pub fn hmf_to_file(model: &HmfModel) -> ModelFile {
    ModelFile::Hmf {
        r_levels: model.r_levels,
        theta_cut: model.theta_cut,
        stages: model.stages.iter().map(factors_to_file).collect(),
    }
}

pub fn hmf_from_file(r_levels: u8, theta_cut: f64, stages: &[FactorsFile]) -> Result<HmfModel, CliError> {
    Ok(HmfModel {
        r_levels,
        theta_cut,
        stages: stages
            .iter()
            .map(factors_from_file)
            .collect::<Result<_, _>>()?,
    })
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<(), CliError> {
    let json = serde_json::to_string(model)
        .map_err(|e| CliError::new(ErrorKind::Numerical, format!("serialize model: {e}")))?;
    std::fs::write(path, json).map_err(|e| {
        CliError::new(
            ErrorKind::Data,
            format!("cannot write model {}: {e}", path.display()),
        )
    })
}

pub fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::new(
            ErrorKind::Data,
            format!("cannot read model {}: {e}", path.display()),
        )
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new(ErrorKind::Data, format!("bad model file: {e}")))
}
