//! Group-preserving label embedding: spectral clustering of label columns,
//! alternating minimization with a closed-form basis update and accelerated
//! proximal gradient (FISTA) coefficient updates under row sparsity, then a
//! correlation-regularized sparse linear feature map.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Mat, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::kmeans;
use crate::linalg;
use crate::opt;

const RIDGE_INIT_GAMMA: f64 = 1e-6;

/// Partition of the label columns into K non-empty groups.
#[derive(Debug, Clone)]
pub struct LabelGrouping {
    pub k: usize,
    /// Group index per label.
    pub assignment: Vec<usize>,
    /// Label indices per group, each sorted ascending.
    pub groups: Vec<Vec<usize>>,
}

impl LabelGrouping {
    fn from_assignment(assignment: Vec<usize>, k: usize) -> Self {
        let mut groups = vec![Vec::new(); k];
        for (label, &g) in assignment.iter().enumerate() {
            groups[g].push(label);
        }
        Self { k, assignment, groups }
    }
}

/// Groups label columns by spectral clustering of a self-tuned heat-kernel
/// affinity: `A_ij = exp(-|Y_.i - Y_.j|^2 / (sigma_i sigma_j))` with
/// `sigma_i` the distance to the 7th nearest other column, k-means on the
/// row-normalized top-K eigenvectors of `D^-1/2 A D^-1/2`.
pub fn label_groups(y: &Mat, k: usize, seed: u64) -> Result<LabelGrouping> {
    let l = y.ncols();
    if k == 0 || k > l {
        return Err(Error::KTooLarge { k, labels: l });
    }
    if k == 1 {
        return Ok(LabelGrouping::from_assignment(vec![0; l], 1));
    }
    if k == l {
        return Ok(LabelGrouping::from_assignment((0..l).collect(), l));
    }

    let mut dist = Array2::<f64>::zeros((l, l));
    for i in 0..l {
        for j in i + 1..l {
            let d2: f64 = y
                .column(i)
                .iter()
                .zip(y.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let d = d2.sqrt();
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }
    // Local scale: distance to the 7th nearest other column (or the
    // farthest available when there are fewer).
    let neigh = 7.min(l - 1);
    let mut sigma = vec![0.0; l];
    for i in 0..l {
        let mut ds: Vec<f64> = (0..l).filter(|&j| j != i).map(|j| dist[[i, j]]).collect();
        ds.sort_by(f64::total_cmp);
        sigma[i] = ds[neigh - 1].max(1e-12);
    }
    let mut affinity = Array2::<f64>::zeros((l, l));
    for i in 0..l {
        for j in 0..l {
            affinity[[i, j]] = (-(dist[[i, j]] * dist[[i, j]]) / (sigma[i] * sigma[j])).exp();
        }
    }
    let deg_inv_sqrt: Vec<f64> = (0..l)
        .map(|i| affinity.row(i).sum().max(1e-300).powf(-0.5))
        .collect();
    let normalized = Array2::from_shape_fn((l, l), |(i, j)| {
        deg_inv_sqrt[i] * affinity[[i, j]] * deg_inv_sqrt[j]
    });
    let (_, vectors) = linalg::sym_eig_desc(&normalized)?;
    let mut embedding = Array2::<f64>::zeros((l, k));
    for i in 0..l {
        for c in 0..k {
            embedding[[i, c]] = vectors[[i, c]];
        }
        let norm = embedding.row(i).dot(&embedding.row(i)).sqrt();
        if norm > 0.0 {
            let mut row = embedding.row_mut(i);
            row /= norm;
        }
    }
    let clusters = kmeans::kmeans(&embedding, k, seed)?;
    Ok(LabelGrouping::from_assignment(clusters.assignments, k))
}

/// Closed-form basis update `U = Y V^T (V V^T + lambda1 I)^-1`.
pub fn update_u_closed_form(y: &Mat, v: &Mat, lambda1: f64) -> Result<Mat> {
    if v.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "V has {} label columns, Y has {}",
            v.ncols(),
            y.ncols()
        )));
    }
    let d = v.nrows();
    let mut gram = v.dot(&v.t());
    for p in 0..d {
        gram[[p, p]] += lambda1;
    }
    // (V V^T + l1 I) U^T = V Y^T
    let rhs = v.dot(&y.t());
    let ut = linalg::solve_spd(&gram, &rhs.to_owned())?;
    Ok(ut.t().to_owned())
}

/// Row-wise shrinkage, the proximal operator of `tau * sum_i |row_i|_2`:
/// each row scales by `(1 - tau/|row|)+`, zeroing rows with norm <= tau.
pub fn prox_l21(v: &Mat, tau: f64) -> Mat {
    let mut out = v.clone();
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm <= tau {
            row.fill(0.0);
        } else {
            let scale = 1.0 - tau / norm;
            row *= scale;
        }
    }
    out
}

/// Elementwise soft threshold, the proximal operator of `tau * |Z|_1`.
pub fn soft_threshold(z: &Mat, tau: f64) -> Mat {
    z.map(|&t| {
        if t > tau {
            t - tau
        } else if t < -tau {
            t + tau
        } else {
            0.0
        }
    })
}

/// Sum of row 2-norms.
pub fn norm_l21(v: &Mat) -> f64 {
    v.rows().into_iter().map(|r| r.dot(&r).sqrt()).sum()
}

fn frob_sq(m: &Mat) -> f64 {
    m.iter().map(|t| t * t).sum()
}

/// Generic FISTA loop over matrices; momentum follows
/// `b_next = (1 + sqrt(1 + 4 b^2)) / 2`. Returns the best iterate by
/// composite objective together with the objective trace.
fn fista<G, P, F>(
    x0: Mat,
    grad: G,
    prox: P,
    objective: F,
    lipschitz: f64,
    tol: f64,
    max_iters: usize,
) -> (Mat, Vec<f64>)
where
    G: Fn(&Mat) -> Mat,
    P: Fn(&Mat) -> Mat,
    F: Fn(&Mat) -> f64,
{
    let mut trace = vec![objective(&x0)];
    if lipschitz <= 0.0 || !lipschitz.is_finite() {
        return (x0, trace);
    }
    let step = 1.0 / lipschitz;
    let mut x_prev = x0.clone();
    let mut x = x0;
    let mut best = (trace[0], x.clone());
    let mut b_prev = 1.0f64;
    let mut b = 1.0f64;
    for _ in 0..max_iters {
        let momentum = (b_prev - 1.0) / b;
        let g_point = &x + &((&x - &x_prev) * momentum);
        let descended = &g_point - &(grad(&g_point) * step);
        let x_next = prox(&descended);
        let value = objective(&x_next);
        trace.push(value);
        if value < best.0 {
            best = (value, x_next.clone());
        }
        let prev_value = trace[trace.len() - 2];
        x_prev = x;
        x = x_next;
        let b_next = 0.5 * (1.0 + (1.0 + 4.0 * b * b).sqrt());
        b_prev = b;
        b = b_next;
        if (prev_value - value).abs() / prev_value.abs().max(1.0) < tol {
            break;
        }
    }
    (best.1, trace)
}

/// Composite objective of one group subproblem:
/// `|Y^k - U V^k|_F^2 + lambda2 |V^k|_2,1`.
pub fn group_objective(u: &Mat, yk: &Mat, vk: &Mat, lambda2: f64) -> f64 {
    let residual = yk - &u.dot(vk);
    frob_sq(&residual) + lambda2 * norm_l21(vk)
}

/// FISTA update of one group's coefficients with `U` fixed, warm-started at
/// the ridge solution `(U^T U + gamma I)^-1 U^T Y^k`. Returns the iterate
/// with the best composite objective.
pub fn apg_update_vk(u: &Mat, yk: &Mat, lambda2: f64, tol: f64, max_iters: usize) -> Result<Mat> {
    Ok(apg_update_vk_traced(u, yk, lambda2, tol, max_iters)?.0)
}

/// As [`apg_update_vk`] but also returns the composite-objective trace.
pub fn apg_update_vk_traced(
    u: &Mat,
    yk: &Mat,
    lambda2: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(Mat, Vec<f64>)> {
    if u.nrows() != yk.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "U has {} rows, Y^k has {}",
            u.nrows(),
            yk.nrows()
        )));
    }
    let d = u.ncols();
    let gram = u.t().dot(u).to_owned();
    let uty = u.t().dot(yk).to_owned();
    let lipschitz = 2.0 * frob_sq(&gram).sqrt();

    let mut ridge = gram.clone();
    for p in 0..d {
        ridge[[p, p]] += RIDGE_INIT_GAMMA;
    }
    let v0 = linalg::solve_spd(&ridge, &uty)?;

    let tau = if lipschitz > 0.0 { lambda2 / lipschitz } else { 0.0 };
    let (v, trace) = fista(
        v0,
        |v| (gram.dot(v) - &uty) * 2.0,
        |v| prox_l21(v, tau),
        |v| group_objective(u, yk, v, lambda2),
        lipschitz,
        tol,
        max_iters,
    );
    Ok((v, trace))
}

/// Full label-embedding objective
/// `sum_k |Y^k - U V^k|_F^2 + lambda1 |U|_F^2 + lambda2 sum_k |V^k|_2,1`.
pub fn grople_objective(
    y: &Mat,
    u: &Mat,
    v: &Mat,
    grouping: &LabelGrouping,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    let residual = y - &u.dot(v);
    let mut value = frob_sq(&residual) + lambda1 * frob_sq(u);
    for group in &grouping.groups {
        let vk = take_columns(v, group);
        value += lambda2 * norm_l21(&vk);
    }
    value
}

fn take_columns(m: &Mat, cols: &[usize]) -> Mat {
    Array2::from_shape_fn((m.nrows(), cols.len()), |(i, c)| m[[i, cols[c]]])
}

fn put_columns(target: &mut Mat, cols: &[usize], block: &Mat) {
    for (c, &col) in cols.iter().enumerate() {
        for i in 0..target.nrows() {
            target[[i, col]] = block[[i, c]];
        }
    }
}

/// Alternating label embedding: per-group APG coefficient updates and the
/// closed-form basis update until the objective stalls. Returns the basis,
/// the recombined coefficients and the grouping.
pub fn label_embedding(
    y: &Mat,
    d: usize,
    k: usize,
    lambda1: f64,
    lambda2: f64,
    seed: u64,
    tol: f64,
    max_outer_iters: usize,
) -> Result<(Mat, Mat, LabelGrouping)> {
    if d == 0 || y.nrows() == 0 || y.ncols() == 0 {
        return Err(Error::EmptyModel("label embedding needs data and d >= 1"));
    }
    let grouping = label_groups(y, k, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = opt::init_factor(&mut rng, y.nrows(), d);
    let mut v = Mat::zeros((d, y.ncols()));
    let mut prev_objective = f64::INFINITY;
    let mut best: Option<(f64, Mat, Mat)> = None;
    for _ in 0..max_outer_iters {
        let blocks: Result<Vec<Mat>> = grouping
            .groups
            .par_iter()
            .map(|group| {
                let yk = take_columns(y, group);
                apg_update_vk(&u, &yk, lambda2, tol * 0.1, 500)
            })
            .collect();
        let blocks = blocks?;
        for (group, block) in grouping.groups.iter().zip(&blocks) {
            put_columns(&mut v, group, block);
        }
        u = update_u_closed_form(y, &v, lambda1)?;
        let objective = grople_objective(y, &u, &v, &grouping, lambda1, lambda2);
        if best.as_ref().is_none_or(|(b, _, _)| objective < *b) {
            best = Some((objective, u.clone(), v.clone()));
        }
        if (prev_objective - objective).abs() / prev_objective.abs().max(1.0) < tol {
            break;
        }
        prev_objective = objective;
    }
    let (_, u, v) = best.expect("at least one outer iteration");
    Ok((u, v, grouping))
}

/// Correlation-residual penalty `R_ij = 1 - corr(U_.i, U_.j)` with zero
/// diagonal; zero-variance columns correlate with nothing (`R_ij = 1`).
pub fn correlation_penalty(u: &Mat) -> Mat {
    let d = u.ncols();
    let n = u.nrows() as f64;
    let means: Vec<f64> = (0..d).map(|c| u.column(c).sum() / n).collect();
    let stds: Vec<f64> = (0..d)
        .map(|c| {
            u.column(c)
                .iter()
                .map(|&t| (t - means[c]) * (t - means[c]))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut r = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let corr = if stds[i] > 0.0 && stds[j] > 0.0 {
                let cov: f64 = u
                    .column(i)
                    .iter()
                    .zip(u.column(j).iter())
                    .map(|(&a, &b)| (a - means[i]) * (b - means[j]))
                    .sum();
                cov / (stds[i] * stds[j])
            } else {
                0.0
            };
            r[[i, j]] = 1.0 - corr;
        }
    }
    r
}

/// Composite feature-embedding objective consistent with the implemented
/// gradient `2 X^T (XZ - U) + alpha Z R`:
/// `|XZ - U|_F^2 + alpha/2 tr(R Z^T Z) + beta |Z|_1`.
pub fn feature_objective(x: &Mat, u: &Mat, z: &Mat, r: &Mat, alpha: f64, beta: f64) -> f64 {
    let residual = x.dot(z) - u;
    let zr = z.dot(r);
    let quad: f64 = zr.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    frob_sq(&residual) + 0.5 * alpha * quad + beta * z.iter().map(|t| t.abs()).sum::<f64>()
}

/// Learns the sparse linear feature map `Z` with `X Z ~ U` by FISTA,
/// starting from the ridge solution `(X^T X + gamma I)^-1 X^T U`.
pub fn feature_embedding(
    x: &Mat,
    u: &Mat,
    alpha: f64,
    beta: f64,
    tol: f64,
    max_iters: usize,
) -> Result<Mat> {
    Ok(feature_embedding_traced(x, u, alpha, beta, tol, max_iters)?.0)
}

pub fn feature_embedding_traced(
    x: &Mat,
    u: &Mat,
    alpha: f64,
    beta: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(Mat, Vec<f64>)> {
    if x.nrows() != u.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows, U has {}",
            x.nrows(),
            u.nrows()
        )));
    }
    let feat = x.ncols();
    let r = correlation_penalty(u);
    let gram = x.t().dot(x).to_owned();
    let xtu = x.t().dot(u).to_owned();
    // Gradient difference is 2 X^T X D + alpha D R, bounded by the sum of
    // the two Frobenius norms.
    let lipschitz = 2.0 * frob_sq(&gram).sqrt() + alpha * frob_sq(&r).sqrt();

    let mut ridge = gram.clone();
    for p in 0..feat {
        ridge[[p, p]] += RIDGE_INIT_GAMMA;
    }
    let z0 = linalg::solve_spd(&ridge, &xtu)?;
    let tau = if lipschitz > 0.0 { beta / lipschitz } else { 0.0 };
    let (z, trace) = fista(
        z0,
        |z| (gram.dot(z) - &xtu) * 2.0 + &(z.dot(&r) * alpha),
        |z| soft_threshold(z, tau),
        |z| feature_objective(x, u, z, &r, alpha, beta),
        lipschitz,
        tol,
        max_iters,
    );
    Ok((z, trace))
}

/// Hyperparameters of the full pipeline.
#[derive(Debug, Clone)]
pub struct GropleConfig {
    pub d: usize,
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_outer_iters: usize,
    pub fista_max_iters: usize,
}

impl GropleConfig {
    pub fn new(d: usize, k: usize, seed: u64) -> Self {
        Self {
            d,
            k,
            lambda1: 1e-3,
            lambda2: 1.0,
            alpha: 0.1,
            beta: 0.01,
            seed,
            tol: 1e-5,
            max_outer_iters: 50,
            fista_max_iters: 500,
        }
    }
}

/// Trained model: basis, grouped coefficients and the feature map.
#[derive(Debug, Clone)]
pub struct GroupedLabelEmbedding {
    pub u: Mat,
    pub v: Mat,
    pub z: Mat,
    pub grouping: LabelGrouping,
}

/// Runs both embedding stages on a training set.
pub fn train_grople(data: &MultiLabelDataset, cfg: &GropleConfig) -> Result<GroupedLabelEmbedding> {
    let (u, v, grouping) = label_embedding(
        &data.labels,
        cfg.d,
        cfg.k,
        cfg.lambda1,
        cfg.lambda2,
        cfg.seed,
        cfg.tol,
        cfg.max_outer_iters,
    )?;
    let z = feature_embedding(
        &data.features,
        &u,
        cfg.alpha,
        cfg.beta,
        cfg.tol,
        cfg.fista_max_iters,
    )?;
    Ok(GroupedLabelEmbedding { u, v, z, grouping })
}

/// Decodes one instance: `sign(x Z V)` with zeros mapped to -1.
pub fn predict_grople(model: &GroupedLabelEmbedding, x_new: &Array1<f64>) -> Result<Array1<f64>> {
    if x_new.len() != model.z.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "instance has {} features, Z expects {}",
            x_new.len(),
            model.z.nrows()
        )));
    }
    let embedded = x_new.dot(&model.z);
    let scores = embedded.dot(&model.v);
    Ok(Array1::from_iter(scores.iter().map(|&s| if s > 0.0 { 1.0 } else { -1.0 })))
}

/// Decodes every row of a feature matrix.
pub fn predict_grople_matrix(model: &GroupedLabelEmbedding, x: &Mat) -> Result<Mat> {
    let scores = x.dot(&model.z).dot(&model.v);
    Ok(scores.map(|&s| if s > 0.0 { 1.0 } else { -1.0 }))
}
