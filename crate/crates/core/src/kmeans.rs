//! Seeded Euclidean k-means with k-means++ initialization, a fixed iteration
//! cap and deterministic empty-cluster repair.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Mat;
use crate::error::{Error, Result};

const MAX_ITERS: usize = 100;

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Mat,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn row(m: &Mat, i: usize) -> &[f64] {
    m.row(i).to_slice().expect("standard layout row")
}

/// k-means++ seeding.
fn seed_centroids(data: &Mat, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(row(data, i), row(data, chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining mass is zero (duplicate points); take the first
            // index not yet selected.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for i in 0..n {
            let d = sq_dist(row(data, i), row(data, next));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen
}

/// Clusters the rows of `data` into `k` groups. Every cluster in the result
/// is non-empty; ties in assignment go to the lowest cluster index.
pub fn kmeans(data: &Mat, k: usize, seed: u64) -> Result<KmeansResult> {
    let n = data.nrows();
    if k == 0 || n < k {
        return Err(Error::TooFewInstances { need: k, got: n });
    }
    let dim = data.ncols();
    if n == k {
        // One point per cluster.
        return Ok(KmeansResult {
            assignments: (0..n).collect(),
            centroids: data.clone(),
            iterations: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = seed_centroids(data, k, &mut rng);
    let mut centroids = Mat::zeros((k, dim));
    for (c, &i) in seeds.iter().enumerate() {
        centroids.row_mut(c).assign(&data.row(i));
    }

    let mut assignments = vec![0usize; n];
    let mut iterations = 0;
    for it in 0..MAX_ITERS {
        iterations = it;
        // Assignment step.
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(row(data, i), row(&centroids, c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        repair_empty(data, &mut assignments, k);
        if !changed && it > 0 {
            break;
        }
        // Update step.
        let mut counts = vec![0usize; k];
        centroids.fill(0.0);
        for i in 0..n {
            let c = assignments[i];
            counts[c] += 1;
            let mut cr = centroids.row_mut(c);
            cr += &data.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mut cr = centroids.row_mut(c);
                cr /= counts[c] as f64;
            }
        }
    }
    Ok(KmeansResult {
        assignments,
        centroids,
        iterations,
    })
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(data: &Mat, assignments: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // Centroid distances with current assignments.
        let dim = data.ncols();
        let n = data.nrows();
        let mut sums = vec![vec![0.0; dim]; k];
        for i in 0..n {
            for (s, &v) in sums[assignments[i]].iter_mut().zip(row(data, i)) {
                *s += v;
            }
        }
        let mut far_idx = usize::MAX;
        let mut far_d = -1.0;
        for i in 0..n {
            let c = assignments[i];
            if counts[c] < 2 {
                continue;
            }
            let centroid: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            let d = sq_dist(row(data, i), &centroid);
            if d > far_d {
                far_d = d;
                far_idx = i;
            }
        }
        if far_idx == usize::MAX {
            return; // fewer distinct points than clusters; leave as-is
        }
        assignments[far_idx] = empty;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push([10.0 + 0.01 * i as f64, 10.0]);
        }
        for i in 0..10 {
            rows.push([-10.0 - 0.01 * i as f64, -10.0]);
        }
        let data = Mat::from_shape_fn((20, 2), |(i, j)| rows[i][j]);
        let res = kmeans(&data, 2, 3).unwrap();
        let first = res.assignments[0];
        assert!(res.assignments[..10].iter().all(|&a| a == first));
        assert!(res.assignments[10..].iter().all(|&a| a == 1 - first));
    }

    #[test]
    fn n_equals_k_gives_singletons() {
        let data = Mat::from_shape_fn((3, 2), |(i, j)| (i * 2 + j) as f64);
        let res = kmeans(&data, 3, 1).unwrap();
        assert_eq!(res.assignments, vec![0, 1, 2]);
    }

    #[test]
    fn clusters_are_never_empty() {
        let data = Mat::from_shape_fn((7, 2), |(i, _)| if i < 6 { 0.0 } else { 5.0 });
        let res = kmeans(&data, 2, 9).unwrap();
        let ones = res.assignments.iter().filter(|&&a| a == 1).count();
        let zeros = res.assignments.len() - ones;
        assert!(ones > 0 && zeros > 0);
    }

    #[test]
    fn deterministic_in_seed() {
        let data = Mat::from_shape_fn((30, 3), |(i, j)| ((i * 7 + j * 13) % 11) as f64);
        let a = kmeans(&data, 4, 42).unwrap();
        let b = kmeans(&data, 4, 42).unwrap();
        assert_eq!(a.assignments, b.assignments);
    }
}
