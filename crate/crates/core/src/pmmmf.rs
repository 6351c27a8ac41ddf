//! Proximal MMMF: per-(user, rating) thresholds are the closed-form class
//! means of the current predictions, the loss mixes squared proximity to the
//! own-class threshold with hinge separation from the others, and prediction
//! counts weighted cuts between adjacent thresholds.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FactorModel, Mat, SparseRatingMatrix};
use crate::error::{Error, Result};
use crate::losses::{smooth_hinge, smooth_hinge_grad};
use crate::opt::{self, Objective, TrainConfig};

/// Closed-form thresholds `theta*[i][r]` (class mean of `U_i V_j^T` over the
/// items user `i` rated `r`) with their class counts. Undefined where the
/// class is empty.
#[derive(Debug, Clone)]
pub struct ProximalThresholds {
    n_users: usize,
    r_levels: u8,
    theta: Vec<Option<f64>>,
    counts: Vec<usize>,
}

impl ProximalThresholds {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn r_levels(&self) -> u8 {
        self.r_levels
    }

    /// `theta*[user][rating]`, `rating` in `1..=R`.
    pub fn get(&self, user: usize, rating: u8) -> Option<f64> {
        self.theta[user * self.r_levels as usize + rating as usize - 1]
    }

    /// Number of items `user` rated `rating`.
    pub fn count(&self, user: usize, rating: u8) -> usize {
        self.counts[user * self.r_levels as usize + rating as usize - 1]
    }

    /// Defined `(rating, theta*, count)` triples for one user, sorted by
    /// threshold value.
    pub fn sorted_defined(&self, user: usize) -> Vec<(u8, f64, usize)> {
        let r = self.r_levels as usize;
        let mut out: Vec<(u8, f64, usize)> = (1..=r)
            .filter_map(|k| {
                self.theta[user * r + k - 1].map(|t| (k as u8, t, self.counts[user * r + k - 1]))
            })
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        out
    }
}

/// Computes the closed-form thresholds for fixed factors.
pub fn compute_thresholds(
    u: &Mat,
    v: &Mat,
    y: &SparseRatingMatrix,
) -> Result<ProximalThresholds> {
    if u.ncols() != v.ncols() || u.nrows() != y.n_users() || v.nrows() != y.n_items() {
        return Err(Error::DimensionMismatch(
            "factor shapes do not match the rating matrix".into(),
        ));
    }
    let r = y.r_levels() as usize;
    let n = y.n_users();
    let mut sums = vec![0.0; n * r];
    let mut counts = vec![0usize; n * r];
    for e in y.entries() {
        let x = u.row(e.user).dot(&v.row(e.item));
        let slot = e.user * r + e.rating as usize - 1;
        sums[slot] += x;
        counts[slot] += 1;
    }
    let theta = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect();
    Ok(ProximalThresholds {
        n_users: n,
        r_levels: y.r_levels(),
        theta,
        counts,
    })
}

/// x = [U, V]; thresholds are recomputed from the current factors inside
/// every evaluation, so the gradient carries the class-mean correction.
struct PmmmfProblem<'a> {
    y: &'a SparseRatingMatrix,
    d: usize,
    lambda: f64,
}

impl PmmmfProblem<'_> {
    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.d;
        let n = self.y.n_users();
        let r_levels = self.y.r_levels() as usize;
        let un = n * d;
        let (u, v) = x.split_at(un);
        let mut value = 0.5 * self.lambda * x.iter().map(|t| t * t).sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            for (gk, xk) in g.iter_mut().zip(x) {
                *gk = self.lambda * xk;
            }
        }

        let mut scores: Vec<f64> = Vec::new();
        let mut class_mean_v = vec![0.0; r_levels * d];
        let mut hinge_sum = vec![0.0; r_levels];
        for i in 0..n {
            let items = self.y.user_ratings(i);
            if items.is_empty() {
                continue;
            }
            let ui = &u[i * d..(i + 1) * d];
            scores.clear();
            scores.extend(items.iter().map(|&(j, _)| {
                let vj = &v[j * d..(j + 1) * d];
                ui.iter().zip(vj).map(|(a, b)| a * b).sum::<f64>()
            }));

            // Class means of scores (theta*) and of item factors (V-bar).
            let mut theta = [f64::NAN; 16];
            let mut counts = [0usize; 16];
            debug_assert!(r_levels <= 16);
            class_mean_v.iter_mut().for_each(|t| *t = 0.0);
            let mut sums = [0.0f64; 16];
            for (&(j, rating), &x_ij) in items.iter().zip(&scores) {
                let c = rating as usize - 1;
                sums[c] += x_ij;
                counts[c] += 1;
                let vj = &v[j * d..(j + 1) * d];
                for (t, &vk) in class_mean_v[c * d..(c + 1) * d].iter_mut().zip(vj) {
                    *t += vk;
                }
            }
            for c in 0..r_levels {
                if counts[c] > 0 {
                    theta[c] = sums[c] / counts[c] as f64;
                    let inv = 1.0 / counts[c] as f64;
                    for t in &mut class_mean_v[c * d..(c + 1) * d] {
                        *t *= inv;
                    }
                }
            }

            hinge_sum[..r_levels].iter_mut().for_each(|t| *t = 0.0);
            for (&(j, rating), &x_ij) in items.iter().zip(&scores) {
                let own = rating as usize - 1;
                for c in 0..r_levels {
                    if counts[c] == 0 {
                        continue;
                    }
                    let diff = x_ij - theta[c];
                    if c == own {
                        value += diff * diff;
                        if let Some(g) = grad.as_deref_mut() {
                            let (gu, gv) = g.split_at_mut(un);
                            let vj = &v[j * d..(j + 1) * d];
                            let vbar = &class_mean_v[c * d..(c + 1) * d];
                            let gui = &mut gu[i * d..(i + 1) * d];
                            for p in 0..d {
                                gui[p] += 2.0 * diff * (vj[p] - vbar[p]);
                            }
                            let gvj = &mut gv[j * d..(j + 1) * d];
                            for (gk, &uk) in gvj.iter_mut().zip(ui) {
                                *gk += 2.0 * diff * uk;
                            }
                        }
                    } else {
                        // +1 when the class boundary lies below the rating.
                        let t_sign = if (c as u8 + 1) < rating { 1.0 } else { -1.0 };
                        let z = t_sign * diff;
                        value += smooth_hinge(z);
                        let hp = smooth_hinge_grad(z);
                        if hp != 0.0 {
                            let coef = t_sign * hp;
                            hinge_sum[c] += coef;
                            if let Some(g) = grad.as_deref_mut() {
                                let (gu, gv) = g.split_at_mut(un);
                                let vj = &v[j * d..(j + 1) * d];
                                let vbar = &class_mean_v[c * d..(c + 1) * d];
                                let gui = &mut gu[i * d..(i + 1) * d];
                                for p in 0..d {
                                    gui[p] += coef * (vj[p] - vbar[p]);
                                }
                                let gvj = &mut gv[j * d..(j + 1) * d];
                                for (gk, &uk) in gvj.iter_mut().zip(ui) {
                                    *gk += coef * uk;
                                }
                            }
                        }
                    }
                }
            }

            // Mean correction: theta*[i][c] depends on the factors of every
            // item in class c, so each hinge term pushes back on them.
            if let Some(g) = grad.as_deref_mut() {
                let (_, gv) = g.split_at_mut(un);
                for &(j, rating) in items {
                    let c = rating as usize - 1;
                    if hinge_sum[c] != 0.0 {
                        let w = hinge_sum[c] / counts[c] as f64;
                        let gvj = &mut gv[j * d..(j + 1) * d];
                        for (gk, &uk) in gvj.iter_mut().zip(ui) {
                            *gk -= w * uk;
                        }
                    }
                }
            }
        }
        value
    }
}

impl Objective for PmmmfProblem<'_> {
    fn dim(&self) -> usize {
        (self.y.n_users() + self.y.n_items()) * self.d
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

/// Proximal objective and its exact gradients; the thresholds are treated as
/// functions of `(U, V)` and recomputed internally.
pub fn pmmmf_objective_grad(
    u: &Mat,
    v: &Mat,
    y: &SparseRatingMatrix,
    lambda: f64,
) -> Result<(f64, Mat, Mat)> {
    if u.ncols() != v.ncols() || u.nrows() != y.n_users() || v.nrows() != y.n_items() {
        return Err(Error::DimensionMismatch(
            "factor shapes do not match the rating matrix".into(),
        ));
    }
    if y.r_levels() > 16 {
        return Err(Error::DomainError("at most 16 rating levels supported".into()));
    }
    let d = u.ncols();
    let prob = PmmmfProblem { y, d, lambda };
    let x = opt::flatten(&[u, v]);
    let mut grad = vec![0.0; x.len()];
    let value = prob.value_grad(&x, &mut grad);
    let mut parts = opt::unflatten(&grad, &[(u.nrows(), d), (v.nrows(), d)]);
    let gv = parts.pop().expect("two parts");
    let gu = parts.pop().expect("two parts");
    Ok((value, gu, gv))
}

/// Trains PMMMF and returns the converged factors with their final
/// closed-form thresholds.
pub fn train_pmmmf(
    y: &SparseRatingMatrix,
    cfg: &TrainConfig,
) -> Result<(FactorModel, ProximalThresholds)> {
    if y.n_observed() == 0 {
        return Err(Error::NoObservedEntries);
    }
    if y.r_levels() > 16 {
        return Err(Error::DomainError("at most 16 rating levels supported".into()));
    }
    let (n, m, d) = (y.n_users(), y.n_items(), cfg.d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = opt::init_factor(&mut rng, n, d);
    let v0 = opt::init_factor(&mut rng, m, d);
    let prob = PmmmfProblem { y, d, lambda: cfg.lambda };
    let res = opt::minimize(
        &prob,
        opt::flatten(&[&u0, &v0]),
        cfg.step_rule,
        cfg.max_iters,
        cfg.rel_tol,
        n + m,
    );
    let mut parts = opt::unflatten(&res.x, &[(n, d), (m, d)]);
    let v = parts.pop().expect("two parts");
    let u = parts.pop().expect("two parts");
    let thresholds = compute_thresholds(&u, &v, y)?;
    Ok((FactorModel::new(u, v)?, thresholds))
}

/// Count-weighted cut between two adjacent defined thresholds.
fn cut(theta_lo: f64, n_lo: usize, theta_hi: f64, n_hi: usize) -> f64 {
    theta_lo + n_lo as f64 / (n_lo + n_hi) as f64 * (theta_hi - theta_lo)
}

/// Completes the rating matrix by locating each score among the weighted
/// cuts of its user's sorted defined thresholds; the region between two cuts
/// predicts the rating whose threshold lies inside it. Users with no defined
/// threshold fall back to rating 1. Observed entries pass through.
pub fn predict_pmmmf(
    model: &FactorModel,
    thresholds: &ProximalThresholds,
    source: Option<&SparseRatingMatrix>,
) -> Array2<u8> {
    let x = model.predictions();
    let mut out = Array2::<u8>::zeros((x.nrows(), x.ncols()));
    for i in 0..x.nrows() {
        let classes = thresholds.sorted_defined(i);
        let cuts: Vec<f64> = classes
            .windows(2)
            .map(|w| cut(w[0].1, w[0].2, w[1].1, w[1].2))
            .collect();
        for j in 0..x.ncols() {
            out[[i, j]] = if classes.is_empty() {
                1
            } else {
                let above = cuts.iter().filter(|&&c| x[[i, j]] > c).count();
                classes[above].0
            };
        }
    }
    if let Some(y) = source {
        for e in y.entries() {
            out[[e.user, e.item]] = e.rating;
        }
    }
    out
}
