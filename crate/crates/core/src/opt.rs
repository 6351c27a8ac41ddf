//! Shared gradient-based minimizer: nonlinear conjugate gradient
//! (Polak-Ribiere with periodic restart and Armijo backtracking) plus a
//! fixed-step fallback that halves its step whenever the objective rises.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Mat;

/// Step rule for gradient-based training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Plain gradient descent; the step length is halved whenever a step
    /// would increase the objective, so accepted iterations are monotone.
    FixedStep(f64),
    /// Polak-Ribiere conjugate gradient with backtracking line search.
    ConjugateGradient,
}

/// Hyperparameters shared by all gradient-trained models.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Latent dimension.
    pub d: usize,
    /// Frobenius regularization weight.
    pub lambda: f64,
    pub max_iters: usize,
    /// Relative objective-change stopping tolerance.
    pub rel_tol: f64,
    pub seed: u64,
    pub step_rule: StepRule,
}

impl TrainConfig {
    pub fn new(d: usize, lambda: f64, seed: u64) -> Self {
        Self {
            d,
            lambda,
            max_iters: 500,
            rel_tol: 1e-5,
            seed,
            step_rule: StepRule::ConjugateGradient,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }
}

/// A smooth objective over a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the gradient into `grad` and returns the objective value.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Objective value after every accepted iteration, starting at x0.
    pub trace: Vec<f64>,
}

const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

/// Minimizes `obj` from `x0`. `restart_every` resets the conjugate direction
/// (callers pass N+M for factorization problems).
pub fn minimize(
    obj: &dyn Objective,
    x0: Vec<f64>,
    rule: StepRule,
    max_iters: usize,
    rel_tol: f64,
    restart_every: usize,
) -> MinimizeResult {
    match rule {
        StepRule::FixedStep(c) => minimize_fixed(obj, x0, c, max_iters, rel_tol),
        StepRule::ConjugateGradient => minimize_cg(obj, x0, max_iters, rel_tol, restart_every),
    }
}

fn minimize_fixed(
    obj: &dyn Objective,
    mut x: Vec<f64>,
    c0: f64,
    max_iters: usize,
    rel_tol: f64,
) -> MinimizeResult {
    let n = obj.dim();
    let mut grad = vec![0.0; n];
    let mut value = obj.value_grad(&x, &mut grad);
    let mut trace = vec![value];
    let mut c = c0;
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    for _ in 0..max_iters {
        let mut accepted = false;
        while c > 1e-18 {
            for k in 0..n {
                trial[k] = x[k] - c * grad[k];
            }
            let trial_value = obj.value(&trial);
            if trial_value <= value {
                std::mem::swap(&mut x, &mut trial);
                let change = (value - trial_value).abs() / value.abs().max(1.0);
                value = obj.value_grad(&x, &mut grad);
                trace.push(value);
                iterations += 1;
                accepted = true;
                if change < rel_tol {
                    return MinimizeResult {
                        x,
                        objective: value,
                        iterations,
                        trace,
                    };
                }
                break;
            }
            c *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    MinimizeResult {
        x,
        objective: value,
        iterations,
        trace,
    }
}

fn minimize_cg(
    obj: &dyn Objective,
    mut x: Vec<f64>,
    max_iters: usize,
    rel_tol: f64,
    restart_every: usize,
) -> MinimizeResult {
    let n = obj.dim();
    let restart_every = restart_every.max(1);
    let mut grad = vec![0.0; n];
    let mut value = obj.value_grad(&x, &mut grad);
    let mut trace = vec![value];
    let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut new_grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut alpha_init = 1.0;
    let mut iterations = 0;

    for t in 0..max_iters {
        let mut slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if slope >= 0.0 {
            // Not a descent direction; restart on steepest descent.
            for k in 0..n {
                dir[k] = -grad[k];
            }
            slope = -grad.iter().map(|g| g * g).sum::<f64>();
        }
        if slope.abs() < 1e-300 {
            break; // stationary
        }

        let mut alpha = alpha_init;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            for k in 0..n {
                trial[k] = x[k] + alpha * dir[k];
            }
            let trial_value = obj.value(&trial);
            if trial_value <= value + ARMIJO_SLOPE * alpha * slope {
                accepted = true;
                break;
            }
            alpha *= BACKTRACK;
        }
        if !accepted {
            break;
        }

        std::mem::swap(&mut x, &mut trial);
        let new_value = obj.value_grad(&x, &mut new_grad);
        iterations += 1;
        trace.push(new_value);
        let change = (value - new_value).abs() / value.abs().max(1.0);

        let gg: f64 = grad.iter().map(|g| g * g).sum();
        let mut beta = if gg > 0.0 {
            new_grad
                .iter()
                .zip(&grad)
                .map(|(gn, g)| gn * (gn - g))
                .sum::<f64>()
                / gg
        } else {
            0.0
        };
        beta = beta.max(0.0);
        if (t + 1) % restart_every == 0 {
            beta = 0.0;
        }
        for k in 0..n {
            dir[k] = -new_grad[k] + beta * dir[k];
        }
        std::mem::swap(&mut grad, &mut new_grad);
        value = new_value;
        // Grow the trial step again after a cheap accepted step.
        alpha_init = (alpha * 2.0).clamp(1e-12, 1e3);

        if change < rel_tol {
            break;
        }
    }
    MinimizeResult {
        x,
        objective: value,
        iterations,
        trace,
    }
}

/// Uniform init in `[-0.5, 0.5] / sqrt(d)`, the scale of the worked examples.
pub fn init_factor(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Mat {
    let scale = 1.0 / (d as f64).sqrt();
    Mat::from_shape_fn((rows, d), |_| rng.random_range(-0.5..0.5) * scale)
}

/// Splits a flat parameter vector into consecutive matrices with the given
/// shapes.
pub fn unflatten(x: &[f64], shapes: &[(usize, usize)]) -> Vec<Mat> {
    let mut out = Vec::with_capacity(shapes.len());
    let mut offset = 0;
    for &(r, c) in shapes {
        let m = Mat::from_shape_vec((r, c), x[offset..offset + r * c].to_vec())
            .expect("shape matches slice length");
        offset += r * c;
        out.push(m);
    }
    debug_assert_eq!(offset, x.len());
    out
}

/// Concatenates matrices row-major into one flat vector.
pub fn flatten(mats: &[&Mat]) -> Vec<f64> {
    let mut x = Vec::with_capacity(mats.iter().map(|m| m.len()).sum());
    for m in mats {
        x.extend(m.iter().copied());
    }
    x
}
