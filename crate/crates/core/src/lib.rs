//! Matrix-factorization solvers for ordinal rating completion and
//! multi-label embedding.
//!
//! The crate covers five related methods built on the same smooth-hinge
//! machinery:
//!
//! - [`mmmf`]: bi-level maximum-margin factorization of sign matrices and
//!   its multi-level extension with learned per-user thresholds;
//! - [`hmf`]: a hierarchy of R-1 bi-level stages with a stage-priority
//!   combination rule and a bit-identical parallel trainer;
//! - [`pmmmf`]: proximal factorization whose thresholds are closed-form
//!   class means, with a weighted-cut decoder;
//! - [`mlc_hmf`]: multi-label classification by recursive piecewise-linear
//!   embedding and kNN majority voting;
//! - [`grople`]: group-preserving label embedding with row-sparse
//!   coefficients and a sparse linear feature map.
//!
//! [`data_io`] holds loaders, the synthetic generator and the evaluation
//! protocols; [`metrics`] the rating and multi-label scores.

pub mod data;
pub mod data_io;
pub mod error;
pub mod grople;
pub mod hmf;
pub mod kmeans;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod mlc_hmf;
pub mod mmmf;
pub mod opt;
pub mod pmmmf;

pub use data::{
    build_rating_matrix, matmul_transpose, FactorModel, Mat, MultiLabelDataset, RatingEntry,
    SparseRatingMatrix,
};
pub use error::{Error, Result};
pub use opt::{StepRule, TrainConfig};
