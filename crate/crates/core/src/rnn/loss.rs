use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mae,
    WeightedMae,
    Mse,
    Huber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Per-signal weights, used by `WeightedMae`.
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default = "default_delta")]
    pub huber_delta: f64,
}

fn default_delta() -> f64 {
    1.0
}

impl LossSpec {
    pub fn mae() -> LossSpec {
        LossSpec { kind: LossKind::Mae, weights: Vec::new(), huber_delta: 1.0 }
    }

    pub fn weighted_mae(weights: &[f64]) -> LossSpec {
        LossSpec { kind: LossKind::WeightedMae, weights: weights.to_vec(), huber_delta: 1.0 }
    }

    pub fn validate(&self, outputs: usize) -> Result<()> {
        if self.kind == LossKind::WeightedMae {
            if self.weights.len() != outputs {
                return Err(Error::Shape(alloc::format!(
                    "loss has {} weights for {} outputs",
                    self.weights.len(),
                    outputs
                )));
            }
            if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                return Err(Error::Config("loss weights must be finite and > 0".into()));
            }
        }
        if self.kind == LossKind::Huber && !(self.huber_delta > 0.0) {
            return Err(Error::Config("huber delta must be > 0".into()));
        }
        Ok(())
    }

    #[inline]
    fn weight(&self, i: usize) -> f64 {
        match self.kind {
            LossKind::WeightedMae => self.weights[i],
            _ => 1.0,
        }
    }
}

/// Loss of one prediction: `Σ w_i |ŷ_i − y_i| / n` for the MAE kinds,
/// `Σ e_i² / n` for MSE and the mean Huber penalty for Huber.
pub fn loss<T: Real>(y_hat: &[T], y: &[T], spec: &LossSpec) -> T {
    debug_assert_eq!(y_hat.len(), y.len());
    let n = T::from_f64(y.len() as f64);
    let delta = T::from_f64(spec.huber_delta);
    let half = T::from_f64(0.5);
    let mut total = T::zero();
    for (i, (p, t)) in y_hat.iter().zip(y).enumerate() {
        let e = *p - *t;
        total += match spec.kind {
            LossKind::Mae | LossKind::WeightedMae => e.abs() * T::from_f64(spec.weight(i)),
            LossKind::Mse => e * e,
            LossKind::Huber => {
                if e.abs() <= delta {
                    half * e * e
                } else {
                    delta * (e.abs() - half * delta)
                }
            }
        };
    }
    total / n
}

/// Gradient of [`loss`] w.r.t. `y_hat`, written into `grad`. The absolute
/// value's subgradient at zero is taken as zero.
pub fn loss_grad<T: Real>(y_hat: &[T], y: &[T], spec: &LossSpec, grad: &mut [T]) {
    let n = T::from_f64(y.len() as f64);
    let delta = T::from_f64(spec.huber_delta);
    let two = T::from_f64(2.0);
    for (i, ((p, t), g)) in y_hat.iter().zip(y).zip(grad.iter_mut()).enumerate() {
        let e = *p - *t;
        let sign = if e > T::zero() {
            T::one()
        } else if e < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        *g = match spec.kind {
            LossKind::Mae | LossKind::WeightedMae => sign * T::from_f64(spec.weight(i)),
            LossKind::Mse => two * e,
            LossKind::Huber => {
                if e.abs() <= delta {
                    e
                } else {
                    delta * sign
                }
            }
        } / n;
    }
}
