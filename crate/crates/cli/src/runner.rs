//! End-to-end experiment execution: load, split, train, predict, evaluate,
//! per seed, for every supported method.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mf_core::data::{Mat, MultiLabelDataset};
use mf_core::data_io::{
    self, split_kfold, split_random_holdout, split_strong, split_weak, RatingsLoadOptions,
    StrongSplit, TrainTestSplit,
};
use mf_core::grople::{predict_grople_matrix, train_grople, GropleConfig};
use mf_core::hmf::{predict_hmf, train_hmf, train_hmf_parallel};
use mf_core::metrics::{self, CfEval, MlcEval};
use mf_core::mlc_hmf::{build_tree, classify_matrix, MlcConfig};
use mf_core::mmmf::{predict_bilevel, predict_ordinal, train_bmmmf, train_mmmf, SignMatrix};
use mf_core::pmmmf::{compute_thresholds, predict_pmmmf, train_pmmmf};
use mf_core::{RatingEntry, SparseRatingMatrix, TrainConfig};
use ndarray::Array2;

use crate::config::Config;
use crate::exit::{CliError, ErrorKind};
use crate::model_io::{self, ModelFile};
use crate::report::{MetricMap, RunReport, SeedResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bmmmf,
    Mmmf,
    Hmf,
    Phmf,
    Pmmmf,
    MlcHmf,
    Grople,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "bmmmf" => Method::Bmmmf,
            "mmmf" => Method::Mmmf,
            "hmf" => Method::Hmf,
            "phmf" => Method::Phmf,
            "pmmmf" => Method::Pmmmf,
            "mlc-hmf" => Method::MlcHmf,
            "grople" => Method::Grople,
            other => {
                return Err(CliError::new(
                    ErrorKind::Config,
                    format!("unknown method {other:?}"),
                ))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Bmmmf => "bmmmf",
            Method::Mmmf => "mmmf",
            Method::Hmf => "hmf",
            Method::Phmf => "phmf",
            Method::Pmmmf => "pmmmf",
            Method::MlcHmf => "mlc-hmf",
            Method::Grople => "grople",
        }
    }

    pub fn is_multilabel(self) -> bool {
        matches!(self, Method::MlcHmf | Method::Grople)
    }
}

#[derive(Debug, Clone, Copy)]
enum Protocol {
    Weak,
    Strong(f64),
    Holdout(f64),
    KFold(usize),
}

fn parse_protocol(config: &Config) -> Result<Protocol, CliError> {
    let raw = config.get("split").unwrap_or("holdout:0.2");
    let bad = |msg: String| CliError::new(ErrorKind::Config, msg);
    if raw == "weak" {
        return Ok(Protocol::Weak);
    }
    if let Some(rest) = raw.strip_prefix("strong:") {
        let f: f64 = rest
            .parse()
            .map_err(|e| bad(format!("bad strong fraction: {e}")))?;
        return Ok(Protocol::Strong(f));
    }
    if let Some(rest) = raw.strip_prefix("holdout:") {
        let f: f64 = rest
            .parse()
            .map_err(|e| bad(format!("bad holdout fraction: {e}")))?;
        return Ok(Protocol::Holdout(f));
    }
    if let Some(rest) = raw.strip_prefix("kfold:") {
        let k: usize = rest.parse().map_err(|e| bad(format!("bad fold count: {e}")))?;
        return Ok(Protocol::KFold(k));
    }
    Err(bad(format!("unknown split spec {raw:?}")))
}

pub fn load_ratings(config: &Config) -> Result<SparseRatingMatrix, CliError> {
    let path = config.require("ratings")?;
    let opts = RatingsLoadOptions {
        r_override: config.parse::<u8>("r_levels")?,
        eachmovie_scale: config.parse_or("eachmovie_scale", false)?,
    };
    Ok(data_io::load_ratings_tsv_opts(PathBuf::from(path), opts)?)
}

pub fn load_multilabel(config: &Config) -> Result<MultiLabelDataset, CliError> {
    let features = config.require("features")?;
    let labels = config.require("labels")?;
    Ok(data_io::load_multilabel_csv(
        PathBuf::from(features),
        PathBuf::from(labels),
    )?)
}

pub fn train_config(config: &Config, seed: u64) -> Result<TrainConfig, CliError> {
    let d: usize = config.parse_or("d", 10)?;
    let lambda: f64 = config.parse_or("lambda", 0.1)?;
    Ok(TrainConfig::new(d, lambda, seed)
        .with_max_iters(config.parse_or("max_iters", 500)?)
        .with_rel_tol(config.parse_or("rel_tol", 1e-5)?))
}

fn stage_lambdas(config: &Config, r_levels: u8) -> Result<Vec<f64>, CliError> {
    let stages = r_levels as usize - 1;
    if let Some(list) = config.parse_list::<f64>("lambdas")? {
        if list.len() != stages {
            return Err(CliError::new(
                ErrorKind::Config,
                format!("lambdas needs {stages} entries, got {}", list.len()),
            ));
        }
        return Ok(list);
    }
    let lambda: f64 = config.parse_or("lambda", 0.1)?;
    Ok(vec![lambda; stages])
}

fn nmae_divisor(config: &Config) -> Result<f64, CliError> {
    config.parse_or("nmae_divisor", metrics::NMAE_DIVISOR_MOVIELENS)
}

fn cf_metric_map(eval: &CfEval) -> MetricMap {
    let mut m = MetricMap::new();
    m.insert("mae".into(), eval.mae);
    m.insert("rmse".into(), eval.rmse);
    m.insert("fre".into(), eval.fre);
    m.insert("nmae".into(), eval.nmae);
    m.insert("zero_one".into(), eval.zero_one);
    m
}

fn mlc_metric_map(eval: &MlcEval) -> MetricMap {
    let mut m = MetricMap::new();
    m.insert("hamming_loss".into(), eval.hamming_loss);
    m.insert("accuracy".into(), eval.accuracy);
    m.insert("subset_accuracy".into(), eval.subset_accuracy);
    m.insert("example_f1".into(), eval.example_f1);
    m.insert("macro_f1".into(), eval.macro_f1);
    m.insert("micro_f1".into(), eval.micro_f1);
    m
}

fn mean_of(maps: &[MetricMap]) -> MetricMap {
    let mut out = MetricMap::new();
    if maps.is_empty() {
        return out;
    }
    for key in maps[0].keys() {
        let sum: f64 = maps.iter().filter_map(|m| m.get(key)).sum();
        out.insert(key.clone(), sum / maps.len() as f64);
    }
    out
}

fn ratings_to_signs(y: &SparseRatingMatrix) -> Result<SignMatrix, CliError> {
    if y.r_levels() != 2 {
        return Err(CliError::new(
            ErrorKind::Config,
            "bmmmf requires two-level ratings (r_levels = 2)",
        ));
    }
    let mut dense = Array2::<i8>::zeros((y.n_users(), y.n_items()));
    for e in y.entries() {
        dense[[e.user, e.item]] = if e.rating == 2 { 1 } else { -1 };
    }
    Ok(SignMatrix::from_dense(dense)?)
}

/// Trains one CF model and completes the matrix densely.
pub fn train_and_complete(
    method: Method,
    train: &SparseRatingMatrix,
    config: &Config,
    seed: u64,
) -> Result<Array2<f64>, CliError> {
    let cfg = train_config(config, seed)?;
    let theta_cut: f64 = config.parse_or("theta_cut", 0.0)?;
    let completed: Array2<f64> = match method {
        Method::Bmmmf => {
            let signs = ratings_to_signs(train)?;
            let model = train_bmmmf(&signs, &cfg)?;
            predict_bilevel(&model, theta_cut, Some(&signs))
                .map(|&s| if s > 0 { 2.0 } else { 1.0 })
        }
        Method::Mmmf => {
            let model = train_mmmf(train, &cfg)?;
            predict_ordinal(&model, Some(train))?.map(|&r| r as f64)
        }
        Method::Hmf | Method::Phmf => {
            let lambdas = stage_lambdas(config, train.r_levels())?;
            let model = if method == Method::Phmf {
                let workers: usize = config.parse_or("workers", 2)?;
                train_hmf_parallel(train, cfg.d, theta_cut, &lambdas, &cfg, workers)?
            } else {
                train_hmf(train, cfg.d, theta_cut, &lambdas, &cfg)?
            };
            predict_hmf(&model, train)?.map(|&r| r as f64)
        }
        Method::Pmmmf => {
            let (model, thresholds) = train_pmmmf(train, &cfg)?;
            predict_pmmmf(&model, &thresholds, Some(train)).map(|&r| r as f64)
        }
        Method::MlcHmf | Method::Grople => {
            return Err(CliError::new(
                ErrorKind::Config,
                "multi-label methods need features/labels data",
            ))
        }
    };
    Ok(completed)
}

fn eval_completion(
    completed: &Array2<f64>,
    test: &[RatingEntry],
    divisor: f64,
) -> Result<CfEval, CliError> {
    let truth: Vec<(usize, usize, f64)> = test
        .iter()
        .map(|e| (e.user, e.item, e.rating as f64))
        .collect();
    Ok(metrics::cf_metrics(&truth, completed, divisor)?)
}

/// Strong generalization: train on the base users, fold in each novel user
/// with the frozen item factors, score the held-out ratings.
fn run_strong(
    method: Method,
    full: &SparseRatingMatrix,
    split: &StrongSplit,
    config: &Config,
    seed: u64,
) -> Result<CfEval, CliError> {
    let cfg = train_config(config, seed)?;
    let theta_cut: f64 = config.parse_or("theta_cut", 0.0)?;
    let divisor = nmae_divisor(config)?;
    let r = full.r_levels();
    let mut pairs: Vec<(f64, f64)> = Vec::new();

    match method {
        Method::Mmmf => {
            let model = train_mmmf(&split.base_train, &cfg)?;
            for (idx, &user) in split.held_users.iter().enumerate() {
                let tweak = &split.novel_tweak[idx];
                let Some(held) = split.novel_heldout.iter().find(|e| e.user == user) else {
                    continue;
                };
                if tweak.is_empty() {
                    continue;
                }
                let (row, theta) =
                    data_io::fold_in_ordinal(&model.v, r, tweak, cfg.lambda, &cfg)?;
                let mut sorted: Vec<f64> = theta.to_vec();
                sorted.sort_by(f64::total_cmp);
                let score: f64 = row
                    .iter()
                    .zip(model.v.row(held.item))
                    .map(|(a, b)| a * b)
                    .sum();
                let rating = 1 + sorted.iter().filter(|&&t| score >= t).count() as u8;
                pairs.push((held.rating as f64, rating as f64));
            }
        }
        Method::Pmmmf => {
            let (model, _) = train_pmmmf(&split.base_train, &cfg)?;
            for (idx, &user) in split.held_users.iter().enumerate() {
                let tweak = &split.novel_tweak[idx];
                let Some(held) = split.novel_heldout.iter().find(|e| e.user == user) else {
                    continue;
                };
                if tweak.is_empty() {
                    continue;
                }
                let row = data_io::fold_in_proximal(&model.v, r, tweak, cfg.lambda, &cfg)?;
                // Rebuild the user's thresholds and cuts from the fitted row.
                let trips: Vec<(usize, usize, i64)> = tweak
                    .iter()
                    .map(|&(j, rr)| (0usize, j, rr as i64))
                    .collect();
                let mini =
                    SparseRatingMatrix::from_triplets(&trips, r, Some((1, model.v.nrows())))?;
                let row_mat = Mat::from_shape_fn((1, row.len()), |(_, p)| row[p]);
                let th = compute_thresholds(&row_mat, &model.v, &mini)?;
                let mini_model = mf_core::FactorModel::new(row_mat, model.v.clone())?;
                let pred = predict_pmmmf(&mini_model, &th, None);
                pairs.push((held.rating as f64, pred[[0, held.item]] as f64));
            }
        }
        Method::Hmf | Method::Phmf => {
            let lambdas = stage_lambdas(config, r)?;
            let model = if method == Method::Phmf {
                let workers: usize = config.parse_or("workers", 2)?;
                train_hmf_parallel(&split.base_train, cfg.d, theta_cut, &lambdas, &cfg, workers)?
            } else {
                train_hmf(&split.base_train, cfg.d, theta_cut, &lambdas, &cfg)?
            };
            for (idx, &user) in split.held_users.iter().enumerate() {
                let tweak = &split.novel_tweak[idx];
                let Some(held) = split.novel_heldout.iter().find(|e| e.user == user) else {
                    continue;
                };
                if tweak.is_empty() {
                    continue;
                }
                // Fold one row per stage on the stage-binarized ratings,
                // then run the stage-priority rule for the held item.
                let mut rating = r;
                for (stage_idx, stage) in model.stages.iter().enumerate() {
                    let q = stage_idx as u8 + 1;
                    let signs: Vec<(usize, i8)> = tweak
                        .iter()
                        .map(|&(j, rr)| (j, if rr <= q { -1 } else { 1 }))
                        .collect();
                    let row = data_io::fold_in_sign(&stage.v, &signs, lambdas[stage_idx], &cfg)?;
                    let score: f64 = row
                        .iter()
                        .zip(stage.v.row(held.item))
                        .map(|(a, b)| a * b)
                        .sum();
                    if score < theta_cut {
                        rating = q;
                        break;
                    }
                }
                pairs.push((held.rating as f64, rating as f64));
            }
        }
        Method::Bmmmf => {
            let signs = ratings_to_signs(&split.base_train)?;
            let model = train_bmmmf(&signs, &cfg)?;
            for (idx, &user) in split.held_users.iter().enumerate() {
                let tweak = &split.novel_tweak[idx];
                let Some(held) = split.novel_heldout.iter().find(|e| e.user == user) else {
                    continue;
                };
                if tweak.is_empty() {
                    continue;
                }
                let sign_ratings: Vec<(usize, i8)> = tweak
                    .iter()
                    .map(|&(j, rr)| (j, if rr == 2 { 1 } else { -1 }))
                    .collect();
                let row = data_io::fold_in_sign(&model.v, &sign_ratings, cfg.lambda, &cfg)?;
                let score: f64 = row
                    .iter()
                    .zip(model.v.row(held.item))
                    .map(|(a, b)| a * b)
                    .sum();
                let rating = if score >= theta_cut { 2.0 } else { 1.0 };
                pairs.push((held.rating as f64, rating));
            }
        }
        Method::MlcHmf | Method::Grople => {
            return Err(CliError::new(
                ErrorKind::Config,
                "strong generalization applies to rating methods",
            ))
        }
    }
    Ok(metrics::cf_metrics_pairs(&pairs, divisor)?)
}

fn run_cf_seed(
    method: Method,
    full: &SparseRatingMatrix,
    config: &Config,
    seed: u64,
) -> Result<SeedResult, CliError> {
    let divisor = nmae_divisor(config)?;
    let protocol = parse_protocol(config)?;
    let mut timing = BTreeMap::new();

    let split_start = Instant::now();
    enum Prepared {
        Single(TrainTestSplit),
        Strong(StrongSplit),
        Folds(Vec<TrainTestSplit>),
    }
    let prepared = match protocol {
        Protocol::Weak => Prepared::Single(split_weak(full, seed)?),
        Protocol::Holdout(f) => Prepared::Single(split_random_holdout(full, f, seed)?),
        Protocol::KFold(k) => Prepared::Folds(split_kfold(full, k, seed)?),
        Protocol::Strong(f) => Prepared::Strong(split_strong(full, f, seed)?),
    };
    timing.insert("split".to_string(), split_start.elapsed().as_secs_f64());

    let train_start = Instant::now();
    let metrics_map = match &prepared {
        Prepared::Single(s) => {
            let completed = train_and_complete(method, &s.train, config, seed)?;
            timing.insert("train_predict".into(), train_start.elapsed().as_secs_f64());
            let eval_start = Instant::now();
            let eval = eval_completion(&completed, &s.test, divisor)?;
            timing.insert("evaluate".into(), eval_start.elapsed().as_secs_f64());
            cf_metric_map(&eval)
        }
        Prepared::Folds(folds) => {
            let mut fold_maps = Vec::new();
            for s in folds {
                let completed = train_and_complete(method, &s.train, config, seed)?;
                let eval = eval_completion(&completed, &s.test, divisor)?;
                fold_maps.push(cf_metric_map(&eval));
            }
            timing.insert("train_predict".into(), train_start.elapsed().as_secs_f64());
            mean_of(&fold_maps)
        }
        Prepared::Strong(s) => {
            let eval = run_strong(method, full, s, config, seed)?;
            timing.insert("train_predict".into(), train_start.elapsed().as_secs_f64());
            cf_metric_map(&eval)
        }
    };
    Ok(SeedResult {
        seed,
        metrics: metrics_map,
        wall_clock_seconds: timing,
    })
}

fn run_mlc_seed(
    method: Method,
    data: &MultiLabelDataset,
    config: &Config,
    seed: u64,
) -> Result<SeedResult, CliError> {
    let k = match parse_protocol(config)? {
        Protocol::KFold(k) => k,
        _ => 10,
    };
    if k < 2 || k > data.n_instances() {
        return Err(CliError::new(
            ErrorKind::Config,
            format!("fold count {k} invalid for {} instances", data.n_instances()),
        ));
    }
    let mut timing = BTreeMap::new();
    let start = Instant::now();
    let folds = data_io::split_instances_kfold(data.n_instances(), k, seed)?;
    let mut fold_maps = Vec::new();
    for fold in &folds {
        let test_set: std::collections::HashSet<usize> = fold.iter().copied().collect();
        let train_ids: Vec<usize> = (0..data.n_instances())
            .filter(|i| !test_set.contains(i))
            .collect();
        let train = data.select(&train_ids);
        let test = data.select(fold);
        let pred = match method {
            Method::MlcHmf => {
                let mut cfg = MlcConfig::new(config.parse_or("lambda", 0.1)?, seed);
                if let Some(d) = config.parse::<usize>("d")? {
                    cfg.d = Some(d);
                }
                cfg.tau = config.parse_or("tau", cfg.tau)?;
                cfg.depth_limit = config.parse_or("depth_limit", cfg.depth_limit)?;
                cfg.min_node_size = config.parse_or("min_node_size", cfg.min_node_size)?;
                cfg.k_neighbors = config.parse_or("k_neighbors", cfg.k_neighbors)?;
                cfg.max_iters = config.parse_or("max_iters", cfg.max_iters)?;
                cfg.rel_tol = config.parse_or("rel_tol", cfg.rel_tol)?;
                let tree = build_tree(&train, &cfg)?;
                classify_matrix(&tree, &test.features, cfg.k_neighbors)?
            }
            Method::Grople => {
                let mut cfg = GropleConfig::new(
                    config.parse_or("d", 100)?,
                    config.parse_or("groups", 10)?,
                    seed,
                );
                cfg.lambda1 = config.parse_or("lambda1", cfg.lambda1)?;
                cfg.lambda2 = config.parse_or("lambda2", cfg.lambda2)?;
                cfg.alpha = config.parse_or("alpha", cfg.alpha)?;
                cfg.beta = config.parse_or("beta", cfg.beta)?;
                cfg.max_outer_iters = config.parse_or("max_iters", cfg.max_outer_iters)?;
                cfg.tol = config.parse_or("rel_tol", cfg.tol)?;
                let model = train_grople(&train, &cfg)?;
                predict_grople_matrix(&model, &test.features)?
            }
            _ => unreachable!("mlc runner only handles multi-label methods"),
        };
        let eval = metrics::mlc_metrics(&test.labels, &pred)?;
        fold_maps.push(mlc_metric_map(&eval));
    }
    timing.insert("cv_total".to_string(), start.elapsed().as_secs_f64());
    Ok(SeedResult {
        seed,
        metrics: mean_of(&fold_maps),
        wall_clock_seconds: timing,
    })
}

/// End-to-end `run`: split, train, predict and evaluate for every seed.
pub fn run(config: &Config) -> Result<RunReport, CliError> {
    let method = Method::parse(config.require("method")?)?;
    let seeds = config.seeds()?;
    let mut per_seed = Vec::new();
    if method.is_multilabel() {
        let data = load_multilabel(config)?;
        for &seed in &seeds {
            per_seed.push(run_mlc_seed(method, &data, config, seed)?);
        }
    } else {
        let ratings = load_ratings(config)?;
        for &seed in &seeds {
            per_seed.push(run_cf_seed(method, &ratings, config, seed)?);
        }
    }
    Ok(RunReport::new(method.name(), config, per_seed))
}

/// Regularization tuning by the one-per-user validation protocol: three
/// repetitions per candidate, scored by zero-one error, ties to the
/// smaller value.
pub fn tune(config: &Config) -> Result<(f64, Vec<(f64, f64)>), CliError> {
    let method = Method::parse(config.require("method")?)?;
    if method.is_multilabel() {
        return Err(CliError::new(
            ErrorKind::Config,
            "tune applies to rating methods",
        ));
    }
    let ratings = load_ratings(config)?;
    let grid = match config.parse_list::<f64>("lambda_grid")? {
        Some(g) if !g.is_empty() => g,
        Some(_) => {
            return Err(CliError::new(ErrorKind::Config, "lambda_grid is empty"));
        }
        None => mf_core::hmf::thesis_lambda_grid(),
    };
    let repetitions: usize = config.parse_or("repetitions", 3)?;
    let seeds = config.seeds()?;
    let base_seed = seeds[0];

    let mut scored: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut sorted_grid = grid.clone();
    sorted_grid.sort_by(f64::total_cmp);
    for &lambda in &sorted_grid {
        let mut zoe_sum = 0.0;
        for rep in 0..repetitions {
            let split = split_weak(&ratings, base_seed.wrapping_add(rep as u64 * 7919))?;
            let mut candidate = config.clone();
            candidate.set("lambda", lambda);
            let completed =
                train_and_complete(method, &split.train, &candidate, base_seed + rep as u64)?;
            let eval = eval_completion(&completed, &split.test, nmae_divisor(config)?)?;
            zoe_sum += eval.zero_one;
        }
        let zoe = zoe_sum / repetitions as f64;
        scored.push((lambda, zoe));
        if best.is_none_or(|(_, bz)| zoe < bz) {
            best = Some((lambda, zoe));
        }
    }
    Ok((best.expect("non-empty grid").0, scored))
}

/// Trains on the full ratings file and saves the model.
pub fn train_model(config: &Config, model_path: &Path) -> Result<(), CliError> {
    let method = Method::parse(config.require("method")?)?;
    let ratings = load_ratings(config)?;
    let seeds = config.seeds()?;
    let cfg = train_config(config, seeds[0])?;
    let theta_cut: f64 = config.parse_or("theta_cut", 0.0)?;
    let file = match method {
        Method::Bmmmf => {
            let signs = ratings_to_signs(&ratings)?;
            let model = train_bmmmf(&signs, &cfg)?;
            ModelFile::Bmmmf {
                r_levels: ratings.r_levels(),
                theta_cut,
                factors: model_io::factors_to_file(&model),
            }
        }
        Method::Mmmf => {
            let model = train_mmmf(&ratings, &cfg)?;
            ModelFile::Mmmf {
                r_levels: ratings.r_levels(),
                factors: model_io::factors_to_file(&model),
            }
        }
        Method::Hmf | Method::Phmf => {
            let lambdas = stage_lambdas(config, ratings.r_levels())?;
            let model = if method == Method::Phmf {
                let workers: usize = config.parse_or("workers", 2)?;
                train_hmf_parallel(&ratings, cfg.d, theta_cut, &lambdas, &cfg, workers)?
            } else {
                train_hmf(&ratings, cfg.d, theta_cut, &lambdas, &cfg)?
            };
            model_io::hmf_to_file(&model)
        }
        Method::Pmmmf => {
            let (model, thresholds) = train_pmmmf(&ratings, &cfg)?;
            let r = ratings.r_levels();
            let theta: Vec<Vec<Option<f64>>> = (0..ratings.n_users())
                .map(|i| (1..=r).map(|rr| thresholds.get(i, rr)).collect())
                .collect();
            let counts: Vec<Vec<usize>> = (0..ratings.n_users())
                .map(|i| (1..=r).map(|rr| thresholds.count(i, rr)).collect())
                .collect();
            ModelFile::Pmmmf {
                r_levels: r,
                factors: model_io::factors_to_file(&model),
                thresholds: model_io::PmmmfThresholdsFile {
                    r_levels: r,
                    theta,
                    counts,
                },
            }
        }
        Method::MlcHmf | Method::Grople => {
            return Err(CliError::new(
                ErrorKind::Config,
                "train/predict persistence covers rating methods; use run for multi-label",
            ))
        }
    };
    model_io::save_model(model_path, &file)
}

/// Loads a model and writes the dense completion as `user item rating`
/// lines (1-based ids).
pub fn predict_with_model(
    config: &Config,
    model_path: &Path,
    out_path: &Path,
) -> Result<(), CliError> {
    let ratings = load_ratings(config)?;
    let file = model_io::load_model(model_path)?;
    let completed: Array2<f64> = match &file {
        ModelFile::Bmmmf {
            theta_cut, factors, ..
        } => {
            let model = model_io::factors_from_file(factors)?;
            let signs = ratings_to_signs(&ratings)?;
            predict_bilevel(&model, *theta_cut, Some(&signs))
                .map(|&s| if s > 0 { 2.0 } else { 1.0 })
        }
        ModelFile::Mmmf { factors, .. } => {
            let model = model_io::factors_from_file(factors)?;
            predict_ordinal(&model, Some(&ratings))?.map(|&r| r as f64)
        }
        ModelFile::Hmf {
            r_levels,
            theta_cut,
            stages,
        } => {
            let model = model_io::hmf_from_file(*r_levels, *theta_cut, stages)?;
            predict_hmf(&model, &ratings)?.map(|&r| r as f64)
        }
        ModelFile::Pmmmf { factors, .. } => {
            let model = model_io::factors_from_file(factors)?;
            // Thresholds are a function of the factors and the ratings.
            let thresholds = compute_thresholds(&model.u, &model.v, &ratings)?;
            predict_pmmmf(&model, &thresholds, Some(&ratings)).map(|&r| r as f64)
        }
    };
    let mut out = String::new();
    for ((i, j), v) in completed.indexed_iter() {
        out.push_str(&format!("{}\t{}\t{}\n", i + 1, j + 1, v));
    }
    std::fs::write(out_path, out).map_err(|e| {
        CliError::new(
            ErrorKind::Data,
            format!("cannot write predictions {}: {e}", out_path.display()),
        )
    })
}

/// Scores a prediction file against a truth ratings file.
pub fn evaluate_predictions(
    truth_path: &Path,
    predictions_path: &Path,
    divisor: f64,
) -> Result<CfEval, CliError> {
    let truth = data_io::load_ratings_tsv(truth_path)?;
    let text = std::fs::read_to_string(predictions_path).map_err(|e| {
        CliError::new(
            ErrorKind::Data,
            format!("cannot read predictions {}: {e}", predictions_path.display()),
        )
    })?;
    let mut predicted: std::collections::HashMap<(usize, usize), f64> =
        std::collections::HashMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(CliError::new(
                ErrorKind::Data,
                format!("predictions line {}: expected 3 fields", line_no + 1),
            ));
        }
        let u: usize = fields[0].parse().map_err(|_| {
            CliError::new(ErrorKind::Data, format!("bad user on line {}", line_no + 1))
        })?;
        let i: usize = fields[1].parse().map_err(|_| {
            CliError::new(ErrorKind::Data, format!("bad item on line {}", line_no + 1))
        })?;
        let v: f64 = fields[2].parse().map_err(|_| {
            CliError::new(ErrorKind::Data, format!("bad value on line {}", line_no + 1))
        })?;
        predicted.insert((u - 1, i - 1), v);
    }
    let mut pairs = Vec::new();
    for e in truth.entries() {
        let Some(&p) = predicted.get(&(e.user, e.item)) else {
            return Err(CliError::new(
                ErrorKind::Data,
                format!("no prediction for observed entry ({}, {})", e.user + 1, e.item + 1),
            ));
        };
        pairs.push((e.rating as f64, p));
    }
    Ok(metrics::cf_metrics_pairs(&pairs, divisor)?)
}
