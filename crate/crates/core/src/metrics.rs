//! Evaluation metrics: MAE / NMAE / RMSE / FRE / zero-one error for rating
//! prediction, and the six standard multi-label scores.

use crate::data::Mat;
use crate::error::{Error, Result};

/// NMAE divisor for the MovieLens rating scale.
pub const NMAE_DIVISOR_MOVIELENS: f64 = 1.6;
/// NMAE divisor for the remapped EachMovie scale.
pub const NMAE_DIVISOR_EACHMOVIE: f64 = 1.944;

/// Rating-prediction scores over a truth set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfEval {
    pub mae: f64,
    pub rmse: f64,
    pub fre: f64,
    pub nmae: f64,
    pub zero_one: f64,
    pub nmae_divisor: f64,
}

/// Evaluates predictions against `(user, item, rating)` truth triples.
/// `pred` is the dense completed matrix; only truth positions are read.
pub fn cf_metrics(truth: &[(usize, usize, f64)], pred: &Mat, nmae_divisor: f64) -> Result<CfEval> {
    let pairs: Vec<(f64, f64)> = truth.iter().map(|&(i, j, y)| (y, pred[[i, j]])).collect();
    cf_metrics_pairs(&pairs, nmae_divisor)
}

/// Same scores from aligned `(truth, prediction)` pairs.
pub fn cf_metrics_pairs(pairs: &[(f64, f64)], nmae_divisor: f64) -> Result<CfEval> {
    if pairs.is_empty() {
        return Err(Error::EmptyTruth);
    }
    let n = pairs.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut truth_sq = 0.0;
    let mut mismatches = 0usize;
    for &(y, yhat) in pairs {
        let diff = y - yhat;
        abs_sum += diff.abs();
        sq_sum += diff * diff;
        truth_sq += y * y;
        if diff.abs() > 1e-9 {
            mismatches += 1;
        }
    }
    let mae = abs_sum / n;
    let rmse = (sq_sum / n).sqrt();
    let fre = if truth_sq > 0.0 {
        (sq_sum / truth_sq).sqrt()
    } else {
        0.0
    };
    Ok(CfEval {
        mae,
        rmse,
        fre,
        nmae: mae / nmae_divisor,
        zero_one: mismatches as f64 / n,
        nmae_divisor,
    })
}

/// Multi-label scores over `{-1,+1}` matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlcEval {
    pub hamming_loss: f64,
    pub accuracy: f64,
    pub subset_accuracy: f64,
    pub example_f1: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

/// Computes all six multi-label metrics. Degenerate ratios follow fixed
/// conventions: per-example F1 with no positives anywhere is 0, accuracy on
/// an instance with no positives anywhere is 1, zero-support labels
/// contribute 0 to macro-F1.
pub fn mlc_metrics(y_true: &Mat, y_pred: &Mat) -> Result<MlcEval> {
    if y_true.dim() != y_pred.dim() {
        return Err(Error::DimensionMismatch(format!(
            "truth is {:?}, prediction is {:?}",
            y_true.dim(),
            y_pred.dim()
        )));
    }
    let (n, l) = y_true.dim();
    if n == 0 || l == 0 {
        return Err(Error::EmptyTruth);
    }

    let mut bit_errors = 0usize;
    let mut exact = 0usize;
    let mut accuracy_sum = 0.0;
    let mut example_f1_sum = 0.0;
    let mut tp = vec![0usize; l];
    let mut fp = vec![0usize; l];
    let mut fn_ = vec![0usize; l];

    for i in 0..n {
        let mut inter = 0usize;
        let mut union = 0usize;
        let mut true_pos = 0usize;
        let mut pred_pos = 0usize;
        let mut row_exact = true;
        for j in 0..l {
            let t = y_true[[i, j]] > 0.0;
            let p = y_pred[[i, j]] > 0.0;
            if t != p {
                bit_errors += 1;
                row_exact = false;
            }
            if t {
                true_pos += 1;
            }
            if p {
                pred_pos += 1;
            }
            match (t, p) {
                (true, true) => {
                    inter += 1;
                    union += 1;
                    tp[j] += 1;
                }
                (true, false) => {
                    union += 1;
                    fn_[j] += 1;
                }
                (false, true) => {
                    union += 1;
                    fp[j] += 1;
                }
                (false, false) => {}
            }
        }
        if row_exact {
            exact += 1;
        }
        accuracy_sum += if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
        let denom = true_pos + pred_pos;
        example_f1_sum += if denom == 0 {
            0.0
        } else {
            2.0 * inter as f64 / denom as f64
        };
    }

    let mut macro_sum = 0.0;
    let mut tp_total = 0usize;
    let mut fp_total = 0usize;
    let mut fn_total = 0usize;
    for j in 0..l {
        let denom = 2 * tp[j] + fp[j] + fn_[j];
        if denom > 0 {
            macro_sum += 2.0 * tp[j] as f64 / denom as f64;
        }
        tp_total += tp[j];
        fp_total += fp[j];
        fn_total += fn_[j];
    }
    let micro_denom = 2 * tp_total + fp_total + fn_total;

    Ok(MlcEval {
        hamming_loss: bit_errors as f64 / (n * l) as f64,
        accuracy: accuracy_sum / n as f64,
        subset_accuracy: exact as f64 / n as f64,
        example_f1: example_f1_sum / n as f64,
        macro_f1: macro_sum / l as f64,
        micro_f1: if micro_denom == 0 {
            0.0
        } else {
            2.0 * tp_total as f64 / micro_denom as f64
        },
    })
}
