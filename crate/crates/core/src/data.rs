//! Core containers: sparse ordinal rating matrices, dense factor pairs and
//! multi-label datasets. Everything here is immutable after construction and
//! safe to share across threads.

use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit reals. All solvers work on this type.
pub type Mat = Array2<f64>;

/// Validates that every entry of `m` is finite.
pub fn check_finite(m: &Mat, name: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::DomainError(format!("{name} contains non-finite values")))
    }
}

/// One observed rating, 0-based indices, rating in `1..=R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingEntry {
    pub user: usize,
    pub item: usize,
    pub rating: u8,
}

/// Partially observed `N x M` ordinal rating matrix with an explicit
/// observed-index set.
#[derive(Debug, Clone)]
pub struct SparseRatingMatrix {
    n_users: usize,
    n_items: usize,
    r_levels: u8,
    entries: Vec<RatingEntry>,
    index: HashMap<(usize, usize), u8>,
    by_user: Vec<Vec<(usize, u8)>>,
}

impl SparseRatingMatrix {
    /// Builds a validated matrix from 1-based `(user, item, rating)` triplets,
    /// the convention of the MovieLens file format. Dimensions are inferred
    /// unless larger bounds are supplied.
    pub fn from_triplets_1based(
        triplets: &[(usize, usize, i64)],
        r_levels: u8,
        min_shape: Option<(usize, usize)>,
    ) -> Result<Self> {
        let mut zero_based = Vec::with_capacity(triplets.len());
        for &(u, i, r) in triplets {
            if u == 0 || i == 0 {
                return Err(Error::IndexOutOfRange(format!(
                    "1-based user/item ids must be positive, got ({u}, {i})"
                )));
            }
            zero_based.push((u - 1, i - 1, r));
        }
        Self::from_triplets(&zero_based, r_levels, min_shape)
    }

    /// Builds a validated matrix from 0-based triplets.
    pub fn from_triplets(
        triplets: &[(usize, usize, i64)],
        r_levels: u8,
        min_shape: Option<(usize, usize)>,
    ) -> Result<Self> {
        if r_levels < 2 {
            return Err(Error::DomainError(format!(
                "need at least 2 rating levels, got {r_levels}"
            )));
        }
        let (mut n_users, mut n_items) = min_shape.unwrap_or((0, 0));
        let mut index = HashMap::with_capacity(triplets.len());
        let mut entries = Vec::with_capacity(triplets.len());
        for &(u, i, r) in triplets {
            if r < 1 || r > r_levels as i64 {
                return Err(Error::RatingOutOfRange {
                    value: r,
                    max: r_levels,
                });
            }
            if index.insert((u, i), r as u8).is_some() {
                return Err(Error::DuplicateEntry { user: u, item: i });
            }
            entries.push(RatingEntry {
                user: u,
                item: i,
                rating: r as u8,
            });
            n_users = n_users.max(u + 1);
            n_items = n_items.max(i + 1);
        }
        let mut by_user = vec![Vec::new(); n_users];
        for e in &entries {
            by_user[e.user].push((e.item, e.rating));
        }
        Ok(Self {
            n_users,
            n_items,
            r_levels,
            entries,
            index,
            by_user,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Number of rating levels R.
    pub fn r_levels(&self) -> u8 {
        self.r_levels
    }

    /// Observed entries in insertion order.
    pub fn entries(&self) -> &[RatingEntry] {
        &self.entries
    }

    /// Size of the observed set.
    pub fn n_observed(&self) -> usize {
        self.entries.len()
    }

    /// O(1) observed-set membership.
    pub fn is_observed(&self, user: usize, item: usize) -> bool {
        self.index.contains_key(&(user, item))
    }

    pub fn get(&self, user: usize, item: usize) -> Option<u8> {
        self.index.get(&(user, item)).copied()
    }

    /// Ratings of one user as `(item, rating)` pairs.
    pub fn user_ratings(&self, user: usize) -> &[(usize, u8)] {
        &self.by_user[user]
    }

    /// Rebuilds with a different R (used when a loader overrides the inferred
    /// rating scale).
    pub fn with_r_levels(&self, r_levels: u8) -> Result<Self> {
        let triplets: Vec<_> = self
            .entries
            .iter()
            .map(|e| (e.user, e.item, e.rating as i64))
            .collect();
        Self::from_triplets(&triplets, r_levels, Some((self.n_users, self.n_items)))
    }
}

/// Builds a rating matrix from 1-based file-convention triplets.
pub fn build_rating_matrix(
    triplets: &[(usize, usize, i64)],
    r_levels: u8,
) -> Result<SparseRatingMatrix> {
    SparseRatingMatrix::from_triplets_1based(triplets, r_levels, None)
}

/// `X = U V^T`, the dense prediction matrix of a factor pair.
pub fn matmul_transpose(u: &Mat, v: &Mat) -> Result<Mat> {
    if u.ncols() != v.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "U has {} factor columns, V has {}",
            u.ncols(),
            v.ncols()
        )));
    }
    Ok(u.dot(&v.t()))
}

/// Latent factor pair with an optional per-user threshold matrix
/// (`N x (R-1)`, present after ordinal training).
#[derive(Debug, Clone)]
pub struct FactorModel {
    pub u: Mat,
    pub v: Mat,
    pub thresholds: Option<Mat>,
}

impl FactorModel {
    pub fn new(u: Mat, v: Mat) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "U has {} factor columns, V has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        Ok(Self {
            u,
            v,
            thresholds: None,
        })
    }

    pub fn with_thresholds(mut self, thresholds: Mat) -> Result<Self> {
        if thresholds.nrows() != self.u.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "thresholds for {} users but U has {} rows",
                thresholds.nrows(),
                self.u.nrows()
            )));
        }
        self.thresholds = Some(thresholds);
        Ok(self)
    }

    /// Latent dimension d.
    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    /// Full prediction matrix `U V^T`.
    pub fn predictions(&self) -> Mat {
        self.u.dot(&self.v.t())
    }

    pub fn score(&self, user: usize, item: usize) -> f64 {
        self.u.row(user).dot(&self.v.row(item))
    }
}

/// Feature matrix paired with a `{-1,+1}` label matrix.
#[derive(Debug, Clone)]
pub struct MultiLabelDataset {
    pub features: Mat,
    pub labels: Mat,
}

impl MultiLabelDataset {
    pub fn new(features: Mat, labels: Mat) -> Result<Self> {
        if features.nrows() != labels.nrows() {
            return Err(Error::RowCountMismatch {
                features: features.nrows(),
                labels: labels.nrows(),
            });
        }
        check_finite(&features, "features")?;
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::DomainError(
                "label matrix entries must be exactly -1 or +1".into(),
            ));
        }
        Ok(Self { features, labels })
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// Row subset by instance indices.
    pub fn select(&self, rows: &[usize]) -> Self {
        let take = |m: &Mat| {
            let mut out = Array2::zeros((rows.len(), m.ncols()));
            for (k, &r) in rows.iter().enumerate() {
                out.row_mut(k).assign(&m.row(r));
            }
            out
        };
        Self {
            features: take(&self.features),
            labels: take(&self.labels),
        }
    }
}
