//! Hierarchical matrix factorization: R-1 independent bi-level MMMF stages
//! over thresholded copies of the ordinal matrix, combined by a fixed
//! stage-priority fill rule. Stages share no state, so the parallel trainer
//! is bit-identical to the sequential one.

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::{FactorModel, SparseRatingMatrix};
use crate::error::{Error, Result};
use crate::metrics;
use crate::mmmf::{train_bmmmf, SignMatrix};
use crate::opt::TrainConfig;

/// Ordered bi-level stage models; stage `q` separates ratings `<= q` from
/// `> q`.
#[derive(Debug, Clone)]
pub struct HmfModel {
    pub r_levels: u8,
    pub theta_cut: f64,
    pub stages: Vec<FactorModel>,
}

impl HmfModel {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }
}

/// Maps the ordinal matrix to the stage-q sign matrix: observed ratings
/// `<= q` become -1, the rest +1, unobserved stay 0.
pub fn binarize_stage(y: &SparseRatingMatrix, q: u8) -> Result<SignMatrix> {
    let max = y.r_levels() - 1;
    if q < 1 || q > max {
        return Err(Error::StageOutOfRange {
            stage: q as usize,
            max: max as usize,
        });
    }
    let mut dense = Array2::<i8>::zeros((y.n_users(), y.n_items()));
    for e in y.entries() {
        dense[[e.user, e.item]] = if e.rating <= q { -1 } else { 1 };
    }
    SignMatrix::from_dense(dense)
}

fn stage_config(cfg: &TrainConfig, d: usize, lambda: f64, q: u8) -> TrainConfig {
    let mut stage = cfg.clone();
    stage.d = d;
    stage.lambda = lambda;
    stage.seed = cfg.seed + q as u64;
    stage
}

fn check_lambdas(y: &SparseRatingMatrix, lambdas: &[f64]) -> Result<()> {
    let expected = y.r_levels() as usize - 1;
    if lambdas.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "need {expected} stage regularization weights, got {}",
            lambdas.len()
        )));
    }
    Ok(())
}

/// Trains all R-1 stages sequentially. Stage `q` uses seed `cfg.seed + q`,
/// the same derivation as the parallel trainer.
pub fn train_hmf(
    y: &SparseRatingMatrix,
    d: usize,
    theta_cut: f64,
    lambdas: &[f64],
    cfg: &TrainConfig,
) -> Result<HmfModel> {
    check_lambdas(y, lambdas)?;
    let mut stages = Vec::with_capacity(lambdas.len());
    for q in 1..y.r_levels() {
        let sign = binarize_stage(y, q)?;
        let stage_cfg = stage_config(cfg, d, lambdas[q as usize - 1], q);
        stages.push(train_bmmmf(&sign, &stage_cfg)?);
    }
    Ok(HmfModel {
        r_levels: y.r_levels(),
        theta_cut,
        stages,
    })
}

/// Trains the stages concurrently on a bounded worker pool. Identical
/// per-stage seeds make the result bit-identical to [`train_hmf`].
pub fn train_hmf_parallel(
    y: &SparseRatingMatrix,
    d: usize,
    theta_cut: f64,
    lambdas: &[f64],
    cfg: &TrainConfig,
    workers: usize,
) -> Result<HmfModel> {
    check_lambdas(y, lambdas)?;
    if workers < 1 {
        return Err(Error::DomainError("need at least one worker".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::DomainError(format!("worker pool: {e}")))?;
    let stages: Result<Vec<FactorModel>> = pool.install(|| {
        (1..y.r_levels())
            .into_par_iter()
            .map(|q| {
                let sign = binarize_stage(y, q)?;
                let stage_cfg = stage_config(cfg, d, lambdas[q as usize - 1], q);
                train_bmmmf(&sign, &stage_cfg)
            })
            .collect()
    });
    Ok(HmfModel {
        r_levels: y.r_levels(),
        theta_cut,
        stages: stages?,
    })
}

/// Completes the matrix by the stage-priority rule: scanning stages in
/// order, an unassigned unobserved entry receives `q` when stage `q` scores
/// it below the cut; whatever survives every stage receives `R`. Observed
/// entries pass through.
pub fn predict_hmf(model: &HmfModel, y: &SparseRatingMatrix) -> Result<Array2<u8>> {
    if model.stages.len() != model.r_levels as usize - 1 {
        return Err(Error::DimensionMismatch(format!(
            "model has {} stages for {} rating levels",
            model.stages.len(),
            model.r_levels
        )));
    }
    let (n, m) = (y.n_users(), y.n_items());
    let mut out = Array2::<u8>::zeros((n, m));
    for (idx, stage) in model.stages.iter().enumerate() {
        let q = idx as u8 + 1;
        let scores = stage.predictions();
        for i in 0..n {
            for j in 0..m {
                if out[[i, j]] == 0 && scores[[i, j]] < model.theta_cut {
                    out[[i, j]] = q;
                }
            }
        }
    }
    for v in out.iter_mut() {
        if *v == 0 {
            *v = model.r_levels;
        }
    }
    for e in y.entries() {
        out[[e.user, e.item]] = e.rating;
    }
    Ok(out)
}

/// The thesis regularization grid `10^(i/16)` for `i = 4..=40`.
pub fn thesis_lambda_grid() -> Vec<f64> {
    (4..=40).map(|i| 10f64.powf(i as f64 / 16.0)).collect()
}

/// Selects the stage-q regularization weight by repeated one-per-user
/// validation splits scored with zero-one error on the stage signs. Ties
/// keep the smaller candidate.
pub fn tune_stage_lambda(
    y: &SparseRatingMatrix,
    q: u8,
    d: usize,
    theta_cut: f64,
    grid: &[f64],
    cfg: &TrainConfig,
    repetitions: usize,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::DomainError("empty candidate grid".into()));
    }
    let mut best = (f64::INFINITY, grid[0]);
    for &lambda in grid {
        let mut zoe_sum = 0.0;
        for rep in 0..repetitions.max(1) {
            let split = crate::data_io::split_weak(y, cfg.seed ^ (rep as u64).wrapping_mul(0x9e37))?;
            let sign_train = binarize_stage(&split.train, q)?;
            let stage_cfg = stage_config(cfg, d, lambda, q);
            let model = train_bmmmf(&sign_train, &stage_cfg)?;
            let pred = crate::mmmf::predict_bilevel(&model, theta_cut, None);
            let mut errors = 0usize;
            let mut total = 0usize;
            for e in &split.test {
                let want: i8 = if e.rating <= q { -1 } else { 1 };
                total += 1;
                if pred[[e.user, e.item]] != want {
                    errors += 1;
                }
            }
            if total > 0 {
                zoe_sum += errors as f64 / total as f64;
            }
        }
        let zoe = zoe_sum / repetitions.max(1) as f64;
        if zoe < best.0 {
            best = (zoe, lambda);
        }
    }
    Ok(best.1)
}

/// Frobenius relative error of a completion against the full ground truth,
/// evaluated on `eval_set`.
pub fn holdout_fre(truth: &SparseRatingMatrix, pred: &Array2<u8>, eval_set: &[(usize, usize)]) -> f64 {
    let truth_list: Vec<(usize, usize, f64)> = eval_set
        .iter()
        .map(|&(i, j)| (i, j, truth.get(i, j).expect("eval entry observed in truth") as f64))
        .collect();
    let predf = pred.map(|&v| v as f64);
    metrics::cf_metrics(&truth_list, &predf, 1.6)
        .map(|m| m.fre)
        .unwrap_or(f64::NAN)
}
