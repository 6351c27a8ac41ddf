//! Dataset loading and writing, the iterative synthetic rating generator,
//! the weak/strong/holdout/k-fold split protocols, and per-user fold-in for
//! strong generalization.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Mat, MultiLabelDataset, RatingEntry, SparseRatingMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::{smooth_hinge, smooth_hinge_grad};
use crate::opt::{self, Objective, StepRule, TrainConfig};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Options for the ratings loader.
#[derive(Debug, Clone, Copy, Default)]
pub struct RatingsLoadOptions {
    /// Force the rating-level count instead of inferring max(rating).
    pub r_override: Option<u8>,
    /// Remap the EachMovie scale {0, 0.2, ..., 1.0} to {1..6}.
    pub eachmovie_scale: bool,
}

/// Loads `user<TAB>item<TAB>rating[<TAB>timestamp]` with 1-based ids
/// (MovieLens `u.data` convention). Timestamps are ignored; blank lines are
/// skipped.
pub fn load_ratings_tsv(path: impl AsRef<Path>) -> Result<SparseRatingMatrix> {
    load_ratings_tsv_opts(path, RatingsLoadOptions::default())
}

pub fn load_ratings_tsv_opts(
    path: impl AsRef<Path>,
    opts: RatingsLoadOptions,
) -> Result<SparseRatingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut triplets = Vec::new();
    let mut max_rating: i64 = 0;
    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(parse_err(line_no, format!("expected 3+ fields, got {}", fields.len())));
        }
        let user: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad user id {:?}", fields[0])))?;
        let item: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad item id {:?}", fields[1])))?;
        let raw: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad rating {:?}", fields[2])))?;
        let rating = if opts.eachmovie_scale {
            (raw * 5.0).round() as i64 + 1
        } else {
            if raw.fract() != 0.0 {
                return Err(parse_err(line_no, format!("non-integer rating {raw}")));
            }
            raw as i64
        };
        max_rating = max_rating.max(rating);
        triplets.push((user, item, rating));
    }
    let r_levels = match opts.r_override {
        Some(r) => r,
        None => u8::try_from(max_rating.max(2))
            .map_err(|_| Error::RatingOutOfRange { value: max_rating, max: u8::MAX })?,
    };
    SparseRatingMatrix::from_triplets_1based(&triplets, r_levels, None)
}

/// Writes a rating matrix in the same TSV format (1-based ids, no
/// timestamps).
pub fn write_ratings_tsv(path: impl AsRef<Path>, y: &SparseRatingMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for e in y.entries() {
        writeln!(w, "{}\t{}\t{}", e.user + 1, e.item + 1, e.rating).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn load_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: line_no,
                msg: format!("bad numeric field {field:?}"),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: line_no,
                    msg: format!("ragged row: {} fields vs {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Loads a multi-label dataset from paired numeric CSV files. Label entries
/// may be `{-1,+1}` or `{0,1}`; zeros map to -1.
pub fn load_multilabel_csv(
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<MultiLabelDataset> {
    let features_path = features_path.as_ref();
    let labels_path = labels_path.as_ref();
    let x_rows = load_numeric_csv(features_path)?;
    let y_rows = load_numeric_csv(labels_path)?;
    if x_rows.len() != y_rows.len() {
        return Err(Error::RowCountMismatch {
            features: x_rows.len(),
            labels: y_rows.len(),
        });
    }
    if x_rows.is_empty() {
        return Err(Error::TooFewInstances { need: 1, got: 0 });
    }
    for (line0, row) in y_rows.iter().enumerate() {
        for &v in row {
            if v != 1.0 && v != -1.0 && v != 0.0 {
                return Err(Error::NonBinaryLabel {
                    path: labels_path.display().to_string(),
                    line: line0 + 1,
                    value: v,
                });
            }
        }
    }
    let (n, dx) = (x_rows.len(), x_rows[0].len());
    let ly = y_rows[0].len();
    let features = Array2::from_shape_fn((n, dx), |(i, j)| x_rows[i][j]);
    let labels = Array2::from_shape_fn((n, ly), |(i, j)| if y_rows[i][j] > 0.0 { 1.0 } else { -1.0 });
    MultiLabelDataset::new(features, labels)
}

/// Output of the synthetic rating generator.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub ratings: SparseRatingMatrix,
    pub u: Mat,
    pub v: Mat,
    pub rounds: usize,
    pub stabilized: bool,
}

/// Generates a fully observed `n x m` rating matrix by alternating
/// least-squares refits and round-and-clamp steps until the integer matrix
/// stops changing. At termination the matrix equals `[U V^T]` clamped to
/// `1..=r` elementwise.
pub fn synthesize_ratings(
    n: usize,
    m: usize,
    d: usize,
    r: u8,
    seed: u64,
    max_rounds: usize,
) -> Result<SynthesisResult> {
    if d > n.min(m) {
        return Err(Error::DimensionMismatch(format!(
            "latent dimension {d} exceeds min({n}, {m})"
        )));
    }
    let mut last_err = Error::SingularGram(0);
    for attempt in 0..3 {
        match synthesize_once(n, m, d, r, seed.wrapping_add(attempt * 0x9e3779b9), max_rounds) {
            Ok(res) => return Ok(res),
            Err(Error::SingularSystem) => last_err = Error::SingularGram(attempt as usize + 1),
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

fn round_clamp(x: &Mat, r: u8) -> Array2<u8> {
    x.map(|&v| (v.round().max(1.0).min(r as f64)) as u8)
}

fn synthesize_once(
    n: usize,
    m: usize,
    d: usize,
    r: u8,
    seed: u64,
    max_rounds: usize,
) -> Result<SynthesisResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Array2::<u8>::from_shape_fn((n, m), |_| rng.random_range(1..=r));
    // A non-negative draw keeps the mean rating level inside the column
    // space of U; zero-mean draws collapse the fit toward the clamp floor.
    let mut u = Mat::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0));
    let mut rounds = 0;
    let mut stabilized = false;
    loop {
        rounds += 1;
        let yf = y.map(|&t| t as f64);
        // V^T = (U^T U)^-1 U^T Y
        let gram_u = u.t().dot(&u);
        let vt = linalg::solve_spd(&gram_u.to_owned(), &u.t().dot(&yf).to_owned())?;
        let v = vt.t().to_owned();
        let next = round_clamp(&u.dot(&vt), r);
        if next == y {
            stabilized = true;
            y = next;
            return finish_synthesis(y, u, v, rounds, stabilized);
        }
        y = next;
        if rounds >= max_rounds {
            return finish_synthesis(y, u, v, rounds, stabilized);
        }
        // U = Y V (V^T V)^-1, via the transposed system.
        let yf = y.map(|&t| t as f64);
        let gram_v = v.t().dot(&v);
        let ut = linalg::solve_spd(&gram_v.to_owned(), &v.t().dot(&yf.t()).to_owned())?;
        u = ut.t().to_owned();
    }
}

fn finish_synthesis(
    y: Array2<u8>,
    u: Mat,
    v: Mat,
    rounds: usize,
    stabilized: bool,
) -> Result<SynthesisResult> {
    let (n, m) = (y.nrows(), y.ncols());
    let mut trips = Vec::with_capacity(n * m);
    for ((i, j), &rating) in y.indexed_iter() {
        trips.push((i, j, rating as i64));
    }
    let r = y.iter().copied().max().unwrap_or(2).max(2);
    let ratings = SparseRatingMatrix::from_triplets(&trips, r, Some((n, m)))?;
    Ok(SynthesisResult {
        ratings,
        u,
        v,
        rounds,
        stabilized,
    })
}

/// Test-protocol specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitKind {
    /// One held-out rating per user with at least two ratings.
    Weak,
    /// Hold out a user fraction entirely; novel users keep all but one
    /// rating for fold-in.
    Strong { held_user_fraction: f64 },
    /// Uniform sample of observed entries without replacement.
    RandomHoldout { test_fraction: f64 },
    /// k disjoint near-equal folds over the observed entries.
    KFold { k: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub seed: u64,
}

/// Result of a weak/holdout split.
#[derive(Debug, Clone)]
pub struct TrainTestSplit {
    pub train: SparseRatingMatrix,
    pub test: Vec<RatingEntry>,
}

/// Strong-generalization split: the base model never sees held users; each
/// held user keeps one rating for evaluation and the rest for fold-in.
#[derive(Debug, Clone)]
pub struct StrongSplit {
    pub base_train: SparseRatingMatrix,
    pub held_users: Vec<usize>,
    /// Fold-in ratings per held user, parallel to `held_users`.
    pub novel_tweak: Vec<Vec<(usize, u8)>>,
    /// At most one held-out rating per held user (absent for single-rating
    /// users).
    pub novel_heldout: Vec<RatingEntry>,
}

#[derive(Debug, Clone)]
pub enum SplitOutput {
    TrainTest(TrainTestSplit),
    Strong(StrongSplit),
    Folds(Vec<TrainTestSplit>),
}

/// Dispatches on the split kind; every protocol is deterministic in the
/// seed.
pub fn split(y: &SparseRatingMatrix, spec: &SplitSpec) -> Result<SplitOutput> {
    match spec.kind {
        SplitKind::Weak => Ok(SplitOutput::TrainTest(split_weak(y, spec.seed)?)),
        SplitKind::Strong { held_user_fraction } => {
            Ok(SplitOutput::Strong(split_strong(y, held_user_fraction, spec.seed)?))
        }
        SplitKind::RandomHoldout { test_fraction } => Ok(SplitOutput::TrainTest(
            split_random_holdout(y, test_fraction, spec.seed)?,
        )),
        SplitKind::KFold { k } => Ok(SplitOutput::Folds(split_kfold(y, k, spec.seed)?)),
    }
}

fn rebuild(
    y: &SparseRatingMatrix,
    keep: impl Fn(&RatingEntry) -> bool,
) -> Result<SparseRatingMatrix> {
    let trips: Vec<_> = y
        .entries()
        .iter()
        .filter(|e| keep(e))
        .map(|e| (e.user, e.item, e.rating as i64))
        .collect();
    SparseRatingMatrix::from_triplets(&trips, y.r_levels(), Some((y.n_users(), y.n_items())))
}

/// Holds out exactly one rating from every user with two or more ratings.
pub fn split_weak(y: &SparseRatingMatrix, seed: u64) -> Result<TrainTestSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    for user in 0..y.n_users() {
        let items = y.user_ratings(user);
        if items.len() >= 2 {
            let &(item, rating) = &items[rng.random_range(0..items.len())];
            test.push(RatingEntry { user, item, rating });
        }
    }
    let held: std::collections::HashSet<(usize, usize)> =
        test.iter().map(|e| (e.user, e.item)).collect();
    let train = rebuild(y, |e| !held.contains(&(e.user, e.item)))?;
    Ok(TrainTestSplit { train, test })
}

/// Uniform holdout of a fraction of the observed entries.
pub fn split_random_holdout(
    y: &SparseRatingMatrix,
    test_fraction: f64,
    seed: u64,
) -> Result<TrainTestSplit> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::DomainError(format!(
            "test fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..y.n_observed()).collect();
    order.shuffle(&mut rng);
    let n_test = ((y.n_observed() as f64) * test_fraction).round() as usize;
    let n_test = n_test.clamp(1, y.n_observed().saturating_sub(1));
    let test_idx: std::collections::HashSet<usize> = order[..n_test].iter().copied().collect();
    let mut test = Vec::with_capacity(n_test);
    for (k, e) in y.entries().iter().enumerate() {
        if test_idx.contains(&k) {
            test.push(*e);
        }
    }
    let train = {
        let trips: Vec<_> = y
            .entries()
            .iter()
            .enumerate()
            .filter(|(k, _)| !test_idx.contains(k))
            .map(|(_, e)| (e.user, e.item, e.rating as i64))
            .collect();
        SparseRatingMatrix::from_triplets(&trips, y.r_levels(), Some((y.n_users(), y.n_items())))?
    };
    Ok(TrainTestSplit { train, test })
}

/// k disjoint near-equal folds; pair `i` trains on everything outside fold
/// `i`.
pub fn split_kfold(y: &SparseRatingMatrix, k: usize, seed: u64) -> Result<Vec<TrainTestSplit>> {
    if k < 2 || k > y.n_observed() {
        return Err(Error::DomainError(format!(
            "k must be in 2..=|observed|, got {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..y.n_observed()).collect();
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; y.n_observed()];
    for (pos, &entry_idx) in order.iter().enumerate() {
        fold_of[entry_idx] = pos % k;
    }
    let mut out = Vec::with_capacity(k);
    for fold in 0..k {
        let mut test = Vec::new();
        let mut trips = Vec::new();
        for (idx, e) in y.entries().iter().enumerate() {
            if fold_of[idx] == fold {
                test.push(*e);
            } else {
                trips.push((e.user, e.item, e.rating as i64));
            }
        }
        let train = SparseRatingMatrix::from_triplets(
            &trips,
            y.r_levels(),
            Some((y.n_users(), y.n_items())),
        )?;
        out.push(TrainTestSplit { train, test });
    }
    Ok(out)
}

/// k near-equal folds of instance indices `0..n`, for cross-validation over
/// multi-label datasets.
pub fn split_instances_kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::DomainError(format!(
            "k must be in 2..=n, got k={k}, n={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    Ok(folds)
}

/// Strong-generalization split.
pub fn split_strong(
    y: &SparseRatingMatrix,
    held_user_fraction: f64,
    seed: u64,
) -> Result<StrongSplit> {
    if !(0.0..1.0).contains(&held_user_fraction) || held_user_fraction <= 0.0 {
        return Err(Error::DomainError(format!(
            "held user fraction must be in (0,1), got {held_user_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users_with_ratings: Vec<usize> = (0..y.n_users())
        .filter(|&u| !y.user_ratings(u).is_empty())
        .collect();
    let mut pool = users_with_ratings.clone();
    pool.shuffle(&mut rng);
    let n_held = ((users_with_ratings.len() as f64) * held_user_fraction).round() as usize;
    let n_held = n_held.clamp(1, users_with_ratings.len().saturating_sub(1));
    let mut held_users: Vec<usize> = pool[..n_held].to_vec();
    held_users.sort_unstable();
    let held_set: std::collections::HashSet<usize> = held_users.iter().copied().collect();

    let base_train = rebuild(y, |e| !held_set.contains(&e.user))?;
    let mut novel_tweak = Vec::with_capacity(held_users.len());
    let mut novel_heldout = Vec::new();
    for &user in &held_users {
        let items = y.user_ratings(user);
        if items.len() >= 2 {
            let pick = rng.random_range(0..items.len());
            let (item, rating) = items[pick];
            novel_heldout.push(RatingEntry { user, item, rating });
            let tweak: Vec<(usize, u8)> = items
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != pick)
                .map(|(_, &p)| p)
                .collect();
            novel_tweak.push(tweak);
        } else {
            novel_tweak.push(items.to_vec());
        }
    }
    Ok(StrongSplit {
        base_train,
        held_users,
        novel_tweak,
        novel_heldout,
    })
}

/// Fold-in objective for one user row against frozen item factors, with the
/// smooth-hinge sign loss.
struct SignRowProblem<'a> {
    v: &'a Mat,
    ratings: &'a [(usize, i8)],
    lambda: f64,
}

impl Objective for SignRowProblem<'_> {
    fn dim(&self) -> usize {
        self.v.ncols()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mut value = 0.5 * self.lambda * x.iter().map(|t| t * t).sum::<f64>();
        for &(j, s) in self.ratings {
            let z = s as f64 * x.iter().zip(self.v.row(j)).map(|(a, b)| a * b).sum::<f64>();
            value += smooth_hinge(z);
        }
        value
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        for (g, t) in grad.iter_mut().zip(x) {
            *g = self.lambda * t;
        }
        let mut value = 0.5 * self.lambda * x.iter().map(|t| t * t).sum::<f64>();
        for &(j, s) in self.ratings {
            let score: f64 = x.iter().zip(self.v.row(j)).map(|(a, b)| a * b).sum();
            let z = s as f64 * score;
            value += smooth_hinge(z);
            let coef = s as f64 * smooth_hinge_grad(z);
            if coef != 0.0 {
                for (g, &vk) in grad.iter_mut().zip(self.v.row(j)) {
                    *g += coef * vk;
                }
            }
        }
        value
    }
}

/// Ordinal fold-in: a fresh user row plus its threshold row under the
/// all-threshold objective.
struct OrdinalRowProblem<'a> {
    v: &'a Mat,
    r_levels: u8,
    ratings: &'a [(usize, u8)],
    lambda: f64,
}

impl OrdinalRowProblem<'_> {
    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.v.ncols();
        let rm1 = self.r_levels as usize - 1;
        let (u, theta) = x.split_at(d);
        let mut value = 0.5 * self.lambda * u.iter().map(|t| t * t).sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            for k in 0..d {
                g[k] = self.lambda * x[k];
            }
            for k in d..d + rm1 {
                g[k] = 0.0;
            }
        }
        for &(j, rating) in self.ratings {
            let xij: f64 = u.iter().zip(self.v.row(j)).map(|(a, b)| a * b).sum();
            let mut coef = 0.0;
            for r in 1..=rm1 {
                let t = if r >= rating as usize { 1.0 } else { -1.0 };
                let z = t * (theta[r - 1] - xij);
                value += smooth_hinge(z);
                let hp = smooth_hinge_grad(z);
                if hp != 0.0 {
                    coef += t * hp;
                    if let Some(g) = grad.as_deref_mut() {
                        g[d + r - 1] += t * hp;
                    }
                }
            }
            if coef != 0.0 {
                if let Some(g) = grad.as_deref_mut() {
                    for (gk, &vk) in g[..d].iter_mut().zip(self.v.row(j)) {
                        *gk -= coef * vk;
                    }
                }
            }
        }
        value
    }
}

impl Objective for OrdinalRowProblem<'_> {
    fn dim(&self) -> usize {
        self.v.ncols() + self.r_levels as usize - 1
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

fn fold_in_settings(cfg: &TrainConfig) -> (StepRule, usize, f64) {
    (cfg.step_rule, cfg.max_iters, cfg.rel_tol)
}

/// Fits a fresh user row against frozen item factors for +/-1 preferences.
/// The row starts at zero, so the result is deterministic.
pub fn fold_in_sign(
    v: &Mat,
    ratings: &[(usize, i8)],
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<Array1<f64>> {
    if ratings.is_empty() {
        return Err(Error::EmptyRatings);
    }
    let prob = SignRowProblem { v, ratings, lambda };
    let (rule, iters, tol) = fold_in_settings(cfg);
    let res = opt::minimize(&prob, vec![0.0; v.ncols()], rule, iters, tol, v.ncols().max(2));
    Ok(Array1::from_vec(res.x))
}

/// Ordinal fold-in; returns the fitted user row and its threshold row.
pub fn fold_in_ordinal(
    v: &Mat,
    r_levels: u8,
    ratings: &[(usize, u8)],
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if ratings.is_empty() {
        return Err(Error::EmptyRatings);
    }
    let d = v.ncols();
    let rm1 = r_levels as usize - 1;
    let prob = OrdinalRowProblem { v, r_levels, ratings, lambda };
    let mut x0 = vec![0.0; d + rm1];
    for r in 1..=rm1 {
        x0[d + r - 1] = r as f64 - r_levels as f64 / 2.0;
    }
    let (rule, iters, tol) = fold_in_settings(cfg);
    let res = opt::minimize(&prob, x0, rule, iters, tol, (d + rm1).max(2));
    let (u, theta) = res.x.split_at(d);
    Ok((Array1::from_vec(u.to_vec()), Array1::from_vec(theta.to_vec())))
}

/// Proximal fold-in: one user row against frozen item factors, with the
/// class-mean thresholds re-derived from the row's own scores inside every
/// evaluation.
struct ProximalRowProblem<'a> {
    v: &'a Mat,
    r_levels: u8,
    ratings: &'a [(usize, u8)],
    lambda: f64,
}

impl ProximalRowProblem<'_> {
    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        use crate::losses::{smooth_hinge as sh, smooth_hinge_grad as shg};
        let d = self.v.ncols();
        let r_levels = self.r_levels as usize;
        let mut value = 0.5 * self.lambda * x.iter().map(|t| t * t).sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            for (gk, xk) in g.iter_mut().zip(x) {
                *gk = self.lambda * xk;
            }
        }
        let scores: Vec<f64> = self
            .ratings
            .iter()
            .map(|&(j, _)| x.iter().zip(self.v.row(j)).map(|(a, b)| a * b).sum())
            .collect();
        let mut sums = vec![0.0; r_levels];
        let mut counts = vec![0usize; r_levels];
        let mut mean_v = vec![0.0; r_levels * d];
        for (&(j, rating), &s) in self.ratings.iter().zip(&scores) {
            let c = rating as usize - 1;
            sums[c] += s;
            counts[c] += 1;
            for (t, &vk) in mean_v[c * d..(c + 1) * d].iter_mut().zip(self.v.row(j)) {
                *t += vk;
            }
        }
        let theta: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
            .collect();
        for c in 0..r_levels {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for t in &mut mean_v[c * d..(c + 1) * d] {
                    *t *= inv;
                }
            }
        }
        for (&(j, rating), &s) in self.ratings.iter().zip(&scores) {
            let own = rating as usize - 1;
            for c in 0..r_levels {
                if counts[c] == 0 {
                    continue;
                }
                let diff = s - theta[c];
                let coef = if c == own {
                    value += diff * diff;
                    2.0 * diff
                } else {
                    let t_sign = if (c as u8 + 1) < rating { 1.0 } else { -1.0 };
                    let z = t_sign * diff;
                    value += sh(z);
                    t_sign * shg(z)
                };
                if coef != 0.0 {
                    if let Some(g) = grad.as_deref_mut() {
                        let vj = self.v.row(j);
                        let vbar = &mean_v[c * d..(c + 1) * d];
                        for (p, gk) in g.iter_mut().enumerate() {
                            *gk += coef * (vj[p] - vbar[p]);
                        }
                    }
                }
            }
        }
        value
    }
}

impl Objective for ProximalRowProblem<'_> {
    fn dim(&self) -> usize {
        self.v.ncols()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

/// Proximal fold-in of a fresh user row; thresholds follow from the row.
pub fn fold_in_proximal(
    v: &Mat,
    r_levels: u8,
    ratings: &[(usize, u8)],
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<Array1<f64>> {
    if ratings.is_empty() {
        return Err(Error::EmptyRatings);
    }
    let prob = ProximalRowProblem { v, r_levels, ratings, lambda };
    let (rule, iters, tol) = fold_in_settings(cfg);
    let res = opt::minimize(&prob, vec![0.0; v.ncols()], rule, iters, tol, v.ncols().max(2));
    Ok(Array1::from_vec(res.x))
}

/// Fold-in against a model trained by ordinal MMMF (thresholds present) or
/// by a bi-level method (thresholds absent; ratings are recoded by the
/// midpoint of the scale).
pub fn fold_in_user(
    model: &crate::data::FactorModel,
    r_levels: u8,
    ratings: &[(usize, u8)],
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<(Array1<f64>, Option<Array1<f64>>)> {
    if ratings.is_empty() {
        return Err(Error::EmptyRatings);
    }
    if model.thresholds.is_some() {
        let (u, theta) = fold_in_ordinal(&model.v, r_levels, ratings, lambda, cfg)?;
        Ok((u, Some(theta)))
    } else {
        let mid = (r_levels as f64 + 1.0) / 2.0;
        let signs: Vec<(usize, i8)> = ratings
            .iter()
            .map(|&(j, r)| (j, if (r as f64) > mid { 1 } else { -1 }))
            .collect();
        let u = fold_in_sign(&model.v, &signs, lambda, cfg)?;
        Ok((u, None))
    }
}
