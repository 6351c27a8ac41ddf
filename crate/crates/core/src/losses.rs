//! Loss functions: margin losses on binary labels, their ordinal-threshold
//! extensions, and divergences for real-valued targets.
//!
//! All margin losses take the scalar `z = y * prediction` and vanish for
//! `z >= 1` (zero-one vanishes for `z >= 0`). The beta-divergence at
//! `beta = 2` evaluates to `(y - yhat)^2 / 2` while [`DivergenceKind::Squared`]
//! is the plain `(y - yhat)^2`; the factor-2 relationship is deliberate, both
//! normalizations are kept as-is.

use crate::error::{Error, Result};

/// Margin losses on binary (+1/-1) observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryLossKind {
    ZeroOne,
    Hinge,
    SmoothHinge,
    ModifiedSquare,
    Logistic,
}

/// Loss value at margin `z`.
pub fn binary_loss(kind: BinaryLossKind, z: f64) -> f64 {
    use BinaryLossKind::*;
    match kind {
        ZeroOne => {
            if z >= 0.0 {
                0.0
            } else {
                1.0
            }
        }
        Hinge => {
            if z >= 1.0 {
                0.0
            } else {
                1.0 - z
            }
        }
        SmoothHinge => {
            if z >= 1.0 {
                0.0
            } else if z > 0.0 {
                0.5 * (1.0 - z) * (1.0 - z)
            } else {
                0.5 - z
            }
        }
        ModifiedSquare => {
            if z >= 1.0 {
                0.0
            } else {
                (1.0 - z) * (1.0 - z)
            }
        }
        // ln(1 + e^-z), stable on both tails.
        Logistic => {
            if z > 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            }
        }
    }
}

/// Derivative d loss / dz. The hinge subgradient at the kink `z = 1` is 0,
/// the smooth-hinge limit.
pub fn binary_loss_grad(kind: BinaryLossKind, z: f64) -> Result<f64> {
    use BinaryLossKind::*;
    Ok(match kind {
        ZeroOne => return Err(Error::NonDifferentiable("ZeroOne")),
        Hinge => {
            if z >= 1.0 {
                0.0
            } else {
                -1.0
            }
        }
        SmoothHinge => smooth_hinge_grad(z),
        ModifiedSquare => {
            if z >= 1.0 {
                0.0
            } else {
                -2.0 * (1.0 - z)
            }
        }
        Logistic => -1.0 / (1.0 + z.exp()),
    })
}

/// Smooth hinge value, the workhorse of every solver in this crate.
#[inline]
pub fn smooth_hinge(z: f64) -> f64 {
    binary_loss(BinaryLossKind::SmoothHinge, z)
}

#[inline]
pub fn smooth_hinge_grad(z: f64) -> f64 {
    if z >= 1.0 {
        0.0
    } else if z > 0.0 {
        z - 1.0
    } else {
        -1.0
    }
}

/// Divergences between a positive observation and its prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceKind {
    Squared,
    KullbackLeibler,
    ItakuraSaito,
    /// Generalized beta-divergence; KL at `beta = 1`, Itakura-Saito at
    /// `beta = 0`, half of the squared loss at `beta = 2`.
    Beta(f64),
}

fn require_positive(y: f64, yhat: f64) -> Result<()> {
    if y > 0.0 && yhat > 0.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!(
            "divergence requires positive arguments, got y={y}, yhat={yhat}"
        )))
    }
}

fn kl(y: f64, yhat: f64) -> f64 {
    y * (y / yhat).ln() - y + yhat
}

fn itakura_saito(y: f64, yhat: f64) -> f64 {
    y / yhat - (y / yhat).ln() - 1.0
}

/// Divergence between observation `y` and prediction `yhat`.
pub fn divergence_loss(kind: DivergenceKind, y: f64, yhat: f64) -> Result<f64> {
    use DivergenceKind::*;
    let value = match kind {
        Squared => (y - yhat) * (y - yhat),
        KullbackLeibler => {
            require_positive(y, yhat)?;
            kl(y, yhat)
        }
        ItakuraSaito => {
            require_positive(y, yhat)?;
            itakura_saito(y, yhat)
        }
        Beta(beta) => {
            if !beta.is_finite() || beta < 0.0 {
                return Err(Error::DomainError(format!(
                    "beta must be finite and >= 0, got {beta}"
                )));
            }
            if beta < 2.0 {
                require_positive(y, yhat)?;
            }
            if beta == 0.0 {
                itakura_saito(y, yhat)
            } else if beta == 1.0 {
                kl(y, yhat)
            } else {
                y.powf(beta) / (beta * (beta - 1.0)) + yhat.powf(beta) / beta
                    - y * yhat.powf(beta - 1.0) / (beta - 1.0)
            }
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::DomainError(format!(
            "divergence is not finite for y={y}, yhat={yhat}"
        )))
    }
}

/// Per-user rating boundaries `theta_1 ..= theta_{R-1}` with implicit
/// sentinels `theta_0 = -inf`, `theta_R = +inf`. Sentinel and undefined
/// entries never enter arithmetic; their loss terms are simply absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    values: Vec<Option<f64>>,
}

impl ThresholdRow {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn with_undefined(values: Vec<Option<f64>>) -> Self {
        Self { values }
    }

    /// Number of boundaries, R-1.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Boundary `theta_k` for `k in 1..=R-1`; `None` for sentinels (`k = 0`,
    /// `k = R`) and undefined entries.
    pub fn get(&self, k: usize) -> Option<f64> {
        if k == 0 || k > self.values.len() {
            None
        } else {
            self.values[k - 1]
        }
    }
}

/// Loss against the two boundaries adjacent to rating `r`:
/// `base(x - theta_{r-1}) + base(theta_r - x)`.
pub fn immediate_threshold_loss(x: f64, r: u8, theta: &ThresholdRow, base: BinaryLossKind) -> f64 {
    let r = r as usize;
    let mut loss = 0.0;
    if let Some(lo) = theta.get(r - 1) {
        loss += binary_loss(base, x - lo);
    }
    if let Some(hi) = theta.get(r) {
        loss += binary_loss(base, hi - x);
    }
    loss
}

/// Loss against every boundary: ratings below `r` must lie left of `x`,
/// the rest right of it.
pub fn all_threshold_loss(x: f64, r: u8, theta: &ThresholdRow, base: BinaryLossKind) -> f64 {
    let r = r as usize;
    let mut loss = 0.0;
    for k in 1..=theta.len() {
        if let Some(t) = theta.get(k) {
            if k < r {
                loss += binary_loss(base, x - t);
            } else {
                loss += binary_loss(base, t - x);
            }
        }
    }
    loss
}
