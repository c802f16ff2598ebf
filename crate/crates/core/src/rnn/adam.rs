use serde::{Deserialize, Serialize};

use super::params::NetworkParams;
use super::{NetworkConfig, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: NetworkParams<T>,
    pub v: NetworkParams<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(cfg: &NetworkConfig) -> AdamState<T> {
        AdamState { m: NetworkParams::zeros(cfg), v: NetworkParams::zeros(cfg), step: 0 }
    }
}

/// One bias-corrected Adam update of `params` with gradient `grads`.
pub fn adam_step<T: Real>(
    params: &mut NetworkParams<T>,
    grads: &NetworkParams<T>,
    state: &mut AdamState<T>,
    lr: f64,
    cfg: &AdamConfig,
) {
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t);
    let step_size = T::from_f64(lr / bc1);
    let inv_sqrt_bc2 = T::from_f64(1.0 / libm::sqrt(bc2));
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let eps = T::from_f64(cfg.eps);
    let params_s = params.slices_mut();
    let grads_s = grads.slices();
    let m_s = state.m.slices_mut();
    let v_s = state.v.slices_mut();
    for (((p, g), m), v) in params_s.into_iter().zip(grads_s).zip(m_s).zip(v_s) {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            p[i] -= step_size * m[i] / (v[i].sqrt() * inv_sqrt_bc2 + eps);
        }
    }
}
