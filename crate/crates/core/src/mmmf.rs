//! Maximum-margin matrix factorization: the bi-level solver for sign
//! matrices and the multi-level ordinal solver with learned per-user
//! thresholds. Both minimize smooth-hinge objectives by gradient descent
//! (conjugate gradient by default).

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FactorModel, Mat, SparseRatingMatrix};
use crate::error::{Error, Result};
use crate::losses::{smooth_hinge, smooth_hinge_grad};
use crate::opt::{self, Objective, TrainConfig};

/// Bi-level preference matrix over `{-1, 0, +1}` with 0 marking unobserved
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SignMatrix {
    dense: Array2<i8>,
    observed: Vec<(usize, usize, i8)>,
}

impl SignMatrix {
    pub fn from_dense(dense: Array2<i8>) -> Result<Self> {
        let mut observed = Vec::new();
        for ((i, j), &s) in dense.indexed_iter() {
            match s {
                0 => {}
                1 | -1 => observed.push((i, j, s)),
                other => {
                    return Err(Error::DomainError(format!(
                        "sign matrix entry ({i},{j}) = {other}, expected -1, 0 or +1"
                    )))
                }
            }
        }
        Ok(Self { dense, observed })
    }

    pub fn n_users(&self) -> usize {
        self.dense.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.dense.ncols()
    }

    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }

    /// Observed `(user, item, sign)` triplets.
    pub fn observed(&self) -> &[(usize, usize, i8)] {
        &self.observed
    }

    pub fn get(&self, user: usize, item: usize) -> i8 {
        self.dense[[user, item]]
    }

    pub fn dense(&self) -> &Array2<i8> {
        &self.dense
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// x = [U row-major, V row-major]
struct BmmmfProblem<'a> {
    y: &'a SignMatrix,
    d: usize,
    lambda: f64,
}

impl BmmmfProblem<'_> {
    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.d;
        let n = self.y.n_users();
        let un = n * d;
        let (u, v) = x.split_at(un);
        if let Some(g) = grad.as_deref_mut() {
            for (gk, xk) in g.iter_mut().zip(x) {
                *gk = self.lambda * xk;
            }
        }
        let mut value = 0.5 * self.lambda * x.iter().map(|t| t * t).sum::<f64>();
        for &(i, j, s) in self.y.observed() {
            let ui = &u[i * d..(i + 1) * d];
            let vj = &v[j * d..(j + 1) * d];
            let z = s as f64 * dot(ui, vj);
            value += smooth_hinge(z);
            if let Some(g) = grad.as_deref_mut() {
                let coef = s as f64 * smooth_hinge_grad(z);
                if coef != 0.0 {
                    let (gu, gv) = g.split_at_mut(un);
                    let gui = &mut gu[i * d..(i + 1) * d];
                    for (gk, &vk) in gui.iter_mut().zip(vj) {
                        *gk += coef * vk;
                    }
                    let gvj = &mut gv[j * d..(j + 1) * d];
                    for (gk, &uk) in gvj.iter_mut().zip(ui) {
                        *gk += coef * uk;
                    }
                }
            }
        }
        value
    }
}

impl Objective for BmmmfProblem<'_> {
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

/// Smooth-hinge objective of the bi-level problem and its exact gradients.
///
/// `J = sum_{(i,j) observed} h(y_ij * U_i V_j^T) + lambda/2 (|U|_F^2 + |V|_F^2)`
pub fn bmmmf_objective_grad(
    u: &Mat,
    v: &Mat,
    y: &SignMatrix,
    lambda: f64,
) -> Result<(f64, Mat, Mat)> {
    if u.ncols() != v.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "U has {} factor columns, V has {}",
            u.ncols(),
            v.ncols()
        )));
    }
    if u.nrows() != y.n_users() || v.nrows() != y.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "factors are {}x{} users/items but matrix is {}x{}",
            u.nrows(),
            v.nrows(),
            y.n_users(),
            y.n_items()
        )));
    }
    let d = u.ncols();
    let prob = BmmmfProblem { y, d, lambda };
    let x = opt::flatten(&[u, v]);
    let mut grad = vec![0.0; x.len()];
    let value = prob.value_grad(&x, &mut grad);
    let mut parts = opt::unflatten(&grad, &[(u.nrows(), d), (v.nrows(), d)]);
    let gv = parts.pop().expect("two parts");
    let gu = parts.pop().expect("two parts");
    Ok((value, gu, gv))
}

/// Trains bi-level MMMF on a sign matrix.
pub fn train_bmmmf(y: &SignMatrix, cfg: &TrainConfig) -> Result<FactorModel> {
    if y.n_observed() == 0 {
        return Err(Error::NoObservedEntries);
    }
    let (n, m, d) = (y.n_users(), y.n_items(), cfg.d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = opt::init_factor(&mut rng, n, d);
    let v0 = opt::init_factor(&mut rng, m, d);
    let prob = BmmmfProblem { y, d, lambda: cfg.lambda };
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
    FactorModel::new(u, v)
}

/// Completes a sign matrix: `+1` where `U_i V_j^T >= theta_cut`, else `-1`.
/// Observed entries of `source` pass through unchanged.
pub fn predict_bilevel(model: &FactorModel, theta_cut: f64, source: Option<&SignMatrix>) -> Array2<i8> {
    let x = model.predictions();
    let mut out = x.map(|&s| if s >= theta_cut { 1i8 } else { -1i8 });
    if let Some(y) = source {
        for &(i, j, s) in y.observed() {
            out[[i, j]] = s;
        }
    }
    out
}

/// x = [U, V, theta (N x (R-1))]
struct MmmfProblem<'a> {
    y: &'a SparseRatingMatrix,
    d: usize,
    lambda: f64,
}

impl MmmfProblem<'_> {
    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.d;
        let n = self.y.n_users();
        let m = self.y.n_items();
        let rm1 = self.y.r_levels() as usize - 1;
        let un = n * d;
        let vn = m * d;
        let (uv, theta) = x.split_at(un + vn);
        let (u, v) = uv.split_at(un);
        let mut value = 0.5 * self.lambda * uv.iter().map(|t| t * t).sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            for k in 0..un + vn {
                g[k] = self.lambda * x[k];
            }
            for k in un + vn..x.len() {
                g[k] = 0.0;
            }
        }
        for e in self.y.entries() {
            let (i, j, rating) = (e.user, e.item, e.rating as usize);
            let ui = &u[i * d..(i + 1) * d];
            let vj = &v[j * d..(j + 1) * d];
            let xij = dot(ui, vj);
            let mut coef = 0.0;
            for r in 1..=rm1 {
                let t = if r >= rating { 1.0 } else { -1.0 };
                let z = t * (theta[i * rm1 + (r - 1)] - xij);
                value += smooth_hinge(z);
                let hp = smooth_hinge_grad(z);
                if hp != 0.0 {
                    let thp = t * hp;
                    coef += thp;
                    if let Some(g) = grad.as_deref_mut() {
                        g[un + vn + i * rm1 + (r - 1)] += thp;
                    }
                }
            }
            if coef != 0.0 {
                if let Some(g) = grad.as_deref_mut() {
                    let (guv, _) = g.split_at_mut(un + vn);
                    let (gu, gv) = guv.split_at_mut(un);
                    let gui = &mut gu[i * d..(i + 1) * d];
                    for (gk, &vk) in gui.iter_mut().zip(vj) {
                        *gk -= coef * vk;
                    }
                    let gvj = &mut gv[j * d..(j + 1) * d];
                    for (gk, &uk) in gvj.iter_mut().zip(ui) {
                        *gk -= coef * uk;
                    }
                }
            }
        }
        value
    }
}

impl Objective for MmmfProblem<'_> {
    fn dim(&self) -> usize {
        let n = self.y.n_users();
        let m = self.y.n_items();
        (n + m) * self.d + n * (self.y.r_levels() as usize - 1)
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

/// All-threshold smooth-hinge objective of ordinal MMMF with its gradients
/// in `U`, `V` and the per-user threshold matrix.
pub fn mmmf_objective_grad(
    u: &Mat,
    v: &Mat,
    theta: &Mat,
    y: &SparseRatingMatrix,
    lambda: f64,
) -> Result<(f64, Mat, Mat, Mat)> {
    let rm1 = y.r_levels() as usize - 1;
    if u.ncols() != v.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "U has {} factor columns, V has {}",
            u.ncols(),
            v.ncols()
        )));
    }
    if u.nrows() != y.n_users() || v.nrows() != y.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "factors are {}x{} users/items but matrix is {}x{}",
            u.nrows(),
            v.nrows(),
            y.n_users(),
            y.n_items()
        )));
    }
    if theta.nrows() != y.n_users() || theta.ncols() != rm1 {
        return Err(Error::DimensionMismatch(format!(
            "theta is {}x{}, expected {}x{}",
            theta.nrows(),
            theta.ncols(),
            y.n_users(),
            rm1
        )));
    }
    let d = u.ncols();
    let prob = MmmfProblem { y, d, lambda };
    let x = opt::flatten(&[u, v, theta]);
    let mut grad = vec![0.0; x.len()];
    let value = prob.value_grad(&x, &mut grad);
    let mut parts = opt::unflatten(&grad, &[(u.nrows(), d), (v.nrows(), d), (theta.nrows(), rm1)]);
    let gt = parts.pop().expect("three parts");
    let gv = parts.pop().expect("three parts");
    let gu = parts.pop().expect("three parts");
    Ok((value, gu, gv, gt))
}

/// Trains ordinal MMMF; the returned model carries the learned thresholds.
pub fn train_mmmf(y: &SparseRatingMatrix, cfg: &TrainConfig) -> Result<FactorModel> {
    if y.n_observed() == 0 {
        return Err(Error::NoObservedEntries);
    }
    let (n, m, d) = (y.n_users(), y.n_items(), cfg.d);
    let r = y.r_levels() as usize;
    let rm1 = r - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = opt::init_factor(&mut rng, n, d);
    let v0 = opt::init_factor(&mut rng, m, d);
    // theta_{i,r} starts at r - R/2, evenly straddling zero.
    let theta0 = Mat::from_shape_fn((n, rm1), |(_, k)| (k + 1) as f64 - r as f64 / 2.0);
    let prob = MmmfProblem { y, d, lambda: cfg.lambda };
    let res = opt::minimize(
        &prob,
        opt::flatten(&[&u0, &v0, &theta0]),
        cfg.step_rule,
        cfg.max_iters,
        cfg.rel_tol,
        n + m,
    );
    let mut parts = opt::unflatten(&res.x, &[(n, d), (m, d), (n, rm1)]);
    let theta = parts.pop().expect("three parts");
    let v = parts.pop().expect("three parts");
    let u = parts.pop().expect("three parts");
    FactorModel::new(u, v)?.with_thresholds(theta)
}

/// Region lookup: rating `r` such that `x` lies in `[theta_{r-1}, theta_r)`
/// with sentinels at both ends. `row` must be sorted ascending.
fn region(sorted_row: &[f64], x: f64) -> u8 {
    let mut r = 1u8;
    for &t in sorted_row {
        if x >= t {
            r += 1;
        } else {
            break;
        }
    }
    r
}

/// Completes an ordinal rating matrix from a trained model. Threshold rows
/// are sorted defensively before use; observed entries pass through.
pub fn predict_ordinal(model: &FactorModel, source: Option<&SparseRatingMatrix>) -> Result<Array2<u8>> {
    let theta = model
        .thresholds
        .as_ref()
        .ok_or(Error::EmptyModel("ordinal prediction requires thresholds"))?;
    let x = model.predictions();
    let mut out = Array2::<u8>::zeros((x.nrows(), x.ncols()));
    for i in 0..x.nrows() {
        let mut row: Vec<f64> = theta.row(i).to_vec();
        row.sort_by(f64::total_cmp);
        for j in 0..x.ncols() {
            out[[i, j]] = region(&row, x[[i, j]]);
        }
    }
    if let Some(y) = source {
        for e in y.entries() {
            out[[e.user, e.item]] = e.rating;
        }
    }
    Ok(out)
}
