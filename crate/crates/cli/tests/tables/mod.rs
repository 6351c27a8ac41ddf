//! Worked-example fixtures for the acceptance suite (same published tables
//! as the core golden tests).

#![allow(dead_code)]

use mf_core::data::Mat;
use mf_core::SparseRatingMatrix;

pub const BILEVEL_Y: [[i8; 7]; 7] = [
    [0, 1, 0, 0, 1, 0, -1],
    [-1, 0, 1, 1, 1, 0, -1],
    [0, 1, -1, 0, 0, 1, -1],
    [-1, 1, -1, 1, -1, 1, 0],
    [-1, 0, -1, 1, 1, 0, 0],
    [0, -1, 0, 1, 0, 1, 1],
    [1, 1, 0, -1, 0, 0, 0],
];

pub const BILEVEL_U: [[f64; 2]; 7] = [
    [-0.63, -0.50],
    [-0.69, -0.96],
    [0.27, -1.09],
    [0.63, -0.84],
    [-0.02, -1.03],
    [1.19, -0.03],
    [-1.11, 0.21],
];

pub const BILEVEL_V: [[f64; 2]; 7] = [
    [-0.37, 0.94],
    [-0.70, -1.02],
    [-1.06, 0.42],
    [0.55, -0.97],
    [-1.04, -0.36],
    [0.67, -0.58],
    [0.65, 0.81],
];

pub const BILEVEL_X: [[f64; 7]; 7] = [
    [-0.24, 0.95, 0.46, 0.14, 0.84, -0.13, -0.81],
    [-0.65, 1.46, 0.33, 0.55, 1.06, 0.09, -1.23],
    [-1.12, 0.92, -0.74, 1.21, 0.11, 0.81, -0.71],
    [-1.02, 0.42, -1.02, 1.16, -0.35, 0.91, -0.27],
    [-0.96, 1.06, -0.41, 0.99, 0.39, 0.58, -0.85],
    [-0.47, -0.80, -1.27, 0.68, -1.23, 0.81, 0.75],
    [0.61, 0.56, 1.26, -0.81, 1.08, -0.87, -0.55],
];

pub const HINGE_TABLE: [[f64; 7]; 7] = [
    [0.0, 0.05, 0.0, 0.0, 0.16, 0.0, 0.0],
    [0.35, 0.0, 0.67, 0.45, 0.0, 0.0, 0.35],
    [0.0, 0.08, 0.26, 0.0, 0.0, 0.19, 0.0],
    [0.0, 0.58, 0.0, 0.0, 0.65, 0.09, 0.0],
    [0.04, 0.0, 0.59, 0.01, 0.61, 0.0, 0.04],
    [0.0, 0.20, 0.0, 0.32, 0.0, 0.19, 0.0],
    [0.39, 0.44, 0.0, 0.19, 0.0, 0.0, 0.39],
];

pub const SMOOTH_HINGE_TABLE: [[f64; 7]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.01, 0.0, 0.0],
    [0.06, 0.0, 0.23, 0.10, 0.0, 0.0, 0.06],
    [0.0, 0.0, 0.03, 0.0, 0.0, 0.02, 0.0],
    [0.0, 0.17, 0.0, 0.0, 0.21, 0.0, 0.0],
    [0.0, 0.0, 0.17, 0.0, 0.19, 0.0, 0.0],
    [0.0, 0.02, 0.0, 0.05, 0.0, 0.02, 0.0],
    [0.08, 0.10, 0.0, 0.02, 0.0, 0.0, 0.08],
];

/// Cells of the printed loss tables whose values contradict the same
/// source's Y, U, V and loss definitions (all in the final column).
pub const CORRUPT_LOSS_CELLS: [(usize, usize); 6] =
    [(0, 6), (1, 6), (2, 6), (4, 6), (5, 6), (6, 6)];

pub const HMF_Y: [[u8; 7]; 5] = [
    [3, 0, 0, 5, 2, 0, 0],
    [5, 4, 0, 1, 5, 3, 4],
    [1, 0, 4, 0, 3, 1, 0],
    [5, 4, 0, 0, 0, 0, 1],
    [0, 3, 2, 0, 5, 2, 0],
];

pub const HMF_STAGE_U: [[[f64; 2]; 5]; 4] = [
    [
        [-0.48, -0.54],
        [0.12, -1.09],
        [0.98, -0.13],
        [-0.77, -0.29],
        [-0.01, -0.94],
    ],
    [
        [-0.69, -0.47],
        [-0.43, 1.06],
        [0.92, 0.01],
        [-0.79, 0.05],
        [0.24, 0.86],
    ],
    [
        [-0.42, 0.70],
        [0.26, -1.05],
        [-0.80, 0.44],
        [0.84, 0.08],
        [-0.05, -0.81],
    ],
    [
        [0.76, 0.28],
        [-0.76, -0.73],
        [0.81, -0.58],
        [-0.71, -0.43],
        [-0.43, -0.85],
    ],
];

pub const HMF_STAGE_V: [[[f64; 2]; 7]; 4] = [
    [
        [-0.70, -0.63],
        [-0.36, -0.72],
        [0.47, -0.53],
        [-0.51, 0.25],
        [0.28, -0.80],
        [-0.52, -0.66],
        [0.58, -0.37],
    ],
    [
        [-0.89, 0.21],
        [-0.43, 0.64],
        [0.42, -0.54],
        [-0.21, -0.67],
        [0.53, 0.76],
        [-0.76, 0.01],
        [0.35, 0.56],
    ],
    [
        [0.72, -0.54],
        [0.80, -0.12],
        [-0.18, 0.68],
        [-0.26, 0.62],
        [0.26, -0.83],
        [0.59, 0.52],
        [-0.39, -0.57],
    ],
    [
        [-0.89, -0.15],
        [0.54, 0.55],
        [-0.17, 0.69],
        [0.58, 0.35],
        [-0.86, -0.27],
        [0.01, 0.83],
        [0.54, 0.40],
    ],
];

pub const HMF_COMPLETED: [[u8; 7]; 5] = [
    [3, 2, 2, 5, 2, 5, 1],
    [5, 4, 2, 1, 5, 3, 4],
    [1, 1, 4, 1, 3, 1, 5],
    [5, 4, 1, 3, 2, 4, 1],
    [2, 3, 2, 1, 5, 2, 4],
];

pub fn mat_from<const R: usize, const C: usize>(rows: &[[f64; C]; R]) -> Mat {
    Mat::from_shape_fn((R, C), |(i, j)| rows[i][j])
}

pub fn hmf_rating_matrix() -> SparseRatingMatrix {
    let mut trips = Vec::new();
    for (i, row) in HMF_Y.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            if r > 0 {
                trips.push((i, j, r as i64));
            }
        }
    }
    SparseRatingMatrix::from_triplets(&trips, 5, Some((5, 7))).unwrap()
}
