//! Multi-label classification by hierarchical piecewise-linear embedding:
//! recursive two-way k-means splits, a maximum-margin embedding per node,
//! retention of well-classified instances, and kNN majority voting over the
//! retained sets at prediction time.

use ndarray::{Array1, Array2};

use crate::data::{Mat, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::kmeans;
use crate::losses::{smooth_hinge, smooth_hinge_grad};
use crate::opt::{self, Objective};

/// Hyperparameters of the tree builder and classifier.
#[derive(Debug, Clone)]
pub struct MlcConfig {
    /// Latent dimension; `None` means `ceil(L / 2)`.
    pub d: Option<usize>,
    /// Per-instance hamming-loss retention threshold.
    pub tau: f64,
    /// Maximum hierarchy depth.
    pub depth_limit: usize,
    /// Sides smaller than this become leaves.
    pub min_node_size: usize,
    /// Neighbors consulted at prediction time.
    pub k_neighbors: usize,
    pub lambda: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl MlcConfig {
    pub fn new(lambda: f64, seed: u64) -> Self {
        Self {
            d: None,
            tau: 0.02,
            depth_limit: 5,
            min_node_size: 5,
            k_neighbors: 5,
            lambda,
            seed,
            max_iters: 200,
            rel_tol: 1e-5,
        }
    }

    fn latent_dim(&self, n_labels: usize) -> usize {
        self.d.unwrap_or_else(|| n_labels.div_ceil(2)).max(1)
    }
}

/// One trained node: feature map `U` (D x d), label hyperplanes `V` (d x L)
/// and the retained training pairs that this embedding classifies within
/// the threshold.
#[derive(Debug, Clone)]
pub struct EmbeddingNode {
    pub u: Mat,
    pub v: Mat,
    pub retained_features: Mat,
    pub retained_labels: Mat,
    /// Row indices into the original training matrix.
    pub retained_ids: Vec<usize>,
}

/// A side of a two-way split: either a terminal leaf (no model) or a
/// trained node whose residue continues below.
#[derive(Debug, Clone)]
pub enum Branch {
    Leaf { ids: Vec<usize> },
    Node {
        node: EmbeddingNode,
        child: Option<Box<Split>>,
    },
}

/// A k-means split into two branches.
#[derive(Debug, Clone)]
pub struct Split {
    pub left: Branch,
    pub right: Branch,
}

/// Binary tree of embedding nodes with disjoint retained sets.
#[derive(Debug, Clone)]
pub struct EmbeddingTree {
    pub root: Option<Split>,
    /// Instances never retained by any node (leaf and residual instances).
    pub residue: Vec<usize>,
    pub n_instances: usize,
    pub n_labels: usize,
}

impl EmbeddingTree {
    /// All trained nodes in deterministic depth-first order.
    pub fn nodes(&self) -> Vec<&EmbeddingNode> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            collect_nodes(root, &mut out);
        }
        out
    }

    /// Depth of the deepest trained node (0 for an empty tree).
    pub fn depth(&self) -> usize {
        self.root.as_ref().map_or(0, split_depth)
    }
}

fn collect_nodes<'a>(split: &'a Split, out: &mut Vec<&'a EmbeddingNode>) {
    for branch in [&split.left, &split.right] {
        if let Branch::Node { node, child } = branch {
            out.push(node);
            if let Some(c) = child {
                collect_nodes(c, out);
            }
        }
    }
}

fn split_depth(split: &Split) -> usize {
    let mut depth = 0;
    for branch in [&split.left, &split.right] {
        if let Branch::Node { child, .. } = branch {
            let below = child.as_ref().map_or(0, |c| split_depth(c));
            depth = depth.max(1 + below);
        }
    }
    depth
}

/// x = [U (D x d), V (d x L)]
struct NodeProblem<'a> {
    x: &'a Mat,
    y: &'a Mat,
    d: usize,
    lambda: f64,
}

impl NodeProblem<'_> {
    fn eval(&self, params: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let (n, feat) = self.x.dim();
        let l = self.y.ncols();
        let d = self.d;
        let un = feat * d;
        let (u, v) = params.split_at(un);
        let mut value = 0.5 * self.lambda * params.iter().map(|t| t * t).sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            for (gk, pk) in g.iter_mut().zip(params) {
                *gk = self.lambda * pk;
            }
        }
        // e_i = x_i U, scores s_il = e_i . V_{.l}
        let mut e = vec![0.0; d];
        for i in 0..n {
            let xi = self.x.row(i);
            for (p, ep) in e.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (q, &xq) in xi.iter().enumerate() {
                    acc += xq * u[q * d + p];
                }
                *ep = acc;
            }
            for label in 0..l {
                let mut s = 0.0;
                for (p, &ep) in e.iter().enumerate() {
                    s += ep * v[p * l + label];
                }
                let yl = self.y[[i, label]];
                let z = yl * s;
                value += smooth_hinge(z);
                let hp = smooth_hinge_grad(z);
                if hp != 0.0 {
                    if let Some(g) = grad.as_deref_mut() {
                        let coef = yl * hp;
                        let (gu, gv) = g.split_at_mut(un);
                        // dJ/dV_{p,label} += coef * e_p
                        for (p, &ep) in e.iter().enumerate() {
                            gv[p * l + label] += coef * ep;
                        }
                        // dJ/dU_{q,p} += coef * x_q * V_{p,label}
                        for (q, &xq) in xi.iter().enumerate() {
                            if xq != 0.0 {
                                let gr = &mut gu[q * d..(q + 1) * d];
                                for (p, gk) in gr.iter_mut().enumerate() {
                                    *gk += coef * xq * v[p * l + label];
                                }
                            }
                        }
                    }
                }
            }
        }
        value
    }
}

impl Objective for NodeProblem<'_> {
    fn dim(&self) -> usize {
        (self.x.ncols() + self.y.ncols()) * self.d
    }
    fn value(&self, params: &[f64]) -> f64 {
        self.eval(params, None)
    }
    fn value_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(params, Some(grad))
    }
}

/// Smooth-hinge node objective
/// `J = sum_l sum_i h(y_il x_i U V_{.l}) + lambda/2 (|U|^2 + |V|^2)`
/// with gradients in both factors.
pub fn node_objective_grad(
    u: &Mat,
    v: &Mat,
    x: &Mat,
    y: &Mat,
    lambda: f64,
) -> Result<(f64, Mat, Mat)> {
    if u.nrows() != x.ncols() || u.ncols() != v.nrows() || v.ncols() != y.ncols() || x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "U {}x{}, V {}x{}, X {}x{}, Y {}x{}",
            u.nrows(),
            u.ncols(),
            v.nrows(),
            v.ncols(),
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let d = u.ncols();
    let prob = NodeProblem { x, y, d, lambda };
    let params = opt::flatten(&[u, v]);
    let mut grad = vec![0.0; params.len()];
    let value = prob.value_grad(&params, &mut grad);
    let mut parts = opt::unflatten(&grad, &[(u.nrows(), d), (d, v.ncols())]);
    let gv = parts.pop().expect("two parts");
    let gu = parts.pop().expect("two parts");
    Ok((value, gu, gv))
}

fn train_node(x: &Mat, y: &Mat, d: usize, cfg: &MlcConfig, seed: u64) -> (Mat, Mat) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let u0 = opt::init_factor(&mut rng, x.ncols(), d);
    let v0 = opt::init_factor(&mut rng, d, y.ncols());
    let prob = NodeProblem { x, y, d, lambda: cfg.lambda };
    let res = opt::minimize(
        &prob,
        opt::flatten(&[&u0, &v0]),
        crate::opt::StepRule::ConjugateGradient,
        cfg.max_iters,
        cfg.rel_tol,
        x.ncols() + y.ncols(),
    );
    let mut parts = opt::unflatten(&res.x, &[(x.ncols(), d), (d, y.ncols())]);
    let v = parts.pop().expect("two parts");
    let u = parts.pop().expect("two parts");
    (u, v)
}

/// Fraction of labels the embedding gets wrong on one instance; scores of
/// exactly zero count as -1.
fn instance_hamming(u: &Mat, v: &Mat, x_row: &Array1<f64>, y_row: &Array1<f64>) -> f64 {
    let e = x_row.dot(u);
    let s = e.dot(v);
    let mut wrong = 0usize;
    for (sv, yv) in s.iter().zip(y_row.iter()) {
        let pred = if *sv > 0.0 { 1.0 } else { -1.0 };
        if pred != *yv {
            wrong += 1;
        }
    }
    wrong as f64 / y_row.len() as f64
}

/// Two-way Euclidean k-means on the rows of `x`; identical rows fall back to
/// a first-half / second-half split. Both sides are always non-empty.
pub fn kmeans2(x: &Mat, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::TooFewInstances { need: 2, got: n });
    }
    let first = x.row(0);
    let all_identical = (1..n).all(|i| x.row(i) == first);
    if all_identical {
        let half = n.div_ceil(2);
        return Ok(((0..half).collect(), (half..n).collect()));
    }
    let res = kmeans::kmeans(x, 2, seed)?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, &c) in res.assignments.iter().enumerate() {
        if c == 0 {
            a.push(i);
        } else {
            b.push(i);
        }
    }
    Ok((a, b))
}

fn build_call(
    data: &MultiLabelDataset,
    ids: &[usize],
    depth: usize,
    d: usize,
    cfg: &MlcConfig,
    seed_counter: &mut u64,
    residue: &mut Vec<usize>,
) -> Result<Option<Split>> {
    if ids.len() < 2 {
        residue.extend_from_slice(ids);
        return Ok(None);
    }
    let subset = data.select(ids);
    *seed_counter += 1;
    let (left_local, right_local) = kmeans2(&subset.features, cfg.seed ^ (*seed_counter << 8))?;
    let mut sides = Vec::with_capacity(2);
    for local in [left_local, right_local] {
        let side_ids: Vec<usize> = local.iter().map(|&k| ids[k]).collect();
        if side_ids.len() < cfg.min_node_size || depth > cfg.depth_limit {
            residue.extend_from_slice(&side_ids);
            sides.push(Branch::Leaf { ids: side_ids });
            continue;
        }
        let side = data.select(&side_ids);
        *seed_counter += 1;
        let (u, v) = train_node(&side.features, &side.labels, d, cfg, cfg.seed ^ (*seed_counter << 8));
        let mut retained_local = Vec::new();
        let mut rest_ids = Vec::new();
        for (k, &gid) in side_ids.iter().enumerate() {
            let h = instance_hamming(
                &u,
                &v,
                &side.features.row(k).to_owned(),
                &side.labels.row(k).to_owned(),
            );
            if h <= cfg.tau {
                retained_local.push(k);
            } else {
                rest_ids.push(gid);
            }
        }
        let retained_ids: Vec<usize> = retained_local.iter().map(|&k| side_ids[k]).collect();
        let retained = data.select(&retained_ids);
        let child = build_call(data, &rest_ids, depth + 1, d, cfg, seed_counter, residue)?
            .map(Box::new);
        sides.push(Branch::Node {
            node: EmbeddingNode {
                u,
                v,
                retained_features: retained.features,
                retained_labels: retained.labels,
                retained_ids,
            },
            child,
        });
    }
    let right = sides.pop().expect("two sides");
    let left = sides.pop().expect("two sides");
    Ok(Some(Split { left, right }))
}

/// Builds the embedding hierarchy over the training set.
pub fn build_tree(data: &MultiLabelDataset, cfg: &MlcConfig) -> Result<EmbeddingTree> {
    let n = data.n_instances();
    let d = cfg.latent_dim(data.n_labels());
    let ids: Vec<usize> = (0..n).collect();
    let mut residue = Vec::new();
    let mut seed_counter = 0u64;
    let root = build_call(data, &ids, 1, d, cfg, &mut seed_counter, &mut residue)?;
    Ok(EmbeddingTree {
        root,
        residue,
        n_instances: n,
        n_labels: data.n_labels(),
    })
}

/// Classifies a new instance: find the K nearest retained training
/// instances across all nodes, let each neighbor's node embedding vote
/// `sign(x U V)` per label (with multiplicity), and take the majority.
/// Ties and zero scores resolve to -1.
pub fn classify(tree: &EmbeddingTree, x_new: &Array1<f64>, k: usize) -> Result<Array1<f64>> {
    let nodes = tree.nodes();
    if nodes.iter().all(|n| n.retained_ids.is_empty()) {
        return Err(Error::EmptyModel("no retained instances in the tree"));
    }
    // (distance^2, node index, instance index) with lexicographic ties.
    let mut neighbors: Vec<(f64, usize, usize)> = Vec::new();
    for (ni, node) in nodes.iter().enumerate() {
        for r in 0..node.retained_features.nrows() {
            let row = node.retained_features.row(r);
            let d2: f64 = row
                .iter()
                .zip(x_new.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            neighbors.push((d2, ni, r));
        }
    }
    neighbors.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let k = k.max(1).min(neighbors.len());
    let mut votes = vec![0i64; tree.n_labels];
    for &(_, ni, _) in &neighbors[..k] {
        let node = nodes[ni];
        let e = x_new.dot(&node.u);
        let s = e.dot(&node.v);
        for (label, &sv) in s.iter().enumerate() {
            votes[label] += if sv > 0.0 { 1 } else { -1 };
        }
    }
    Ok(Array1::from_iter(
        votes.iter().map(|&t| if t > 0 { 1.0 } else { -1.0 }),
    ))
}

/// Classifies every row of a feature matrix.
pub fn classify_matrix(tree: &EmbeddingTree, x: &Mat, k: usize) -> Result<Mat> {
    let mut out = Array2::zeros((x.nrows(), tree.n_labels));
    for i in 0..x.nrows() {
        let pred = classify(tree, &x.row(i).to_owned(), k)?;
        out.row_mut(i).assign(&pred);
    }
    Ok(out)
}
