//! Stacked recurrent regressor with hand-derived backpropagation through
//! time, the (weighted) MAE loss family and the Adam optimizer.
//!
//! Every routine is generic over [`Real`] so the same code runs in `f64`
//! for gradient checks and `f32` for training.

mod adam;
mod kernels;
mod loss;
mod network;
mod params;

use core::fmt::Debug;
use core::ops::{AddAssign, MulAssign, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{loss, loss_grad, LossKind, LossSpec};
pub use network::{Network, Tape};
pub use params::{init_params, LayerParams, NetworkParams, TensorInfo};

/// Floating-point type the network computes in.
pub trait Real:
    num_traits::Float + Default + Debug + Send + Sync + AddAssign + SubAssign + MulAssign + 'static
{
    fn from_f64(v: f64) -> Self;
    fn from_f32(v: f32) -> Self;
    fn as_f64(self) -> f64;
    fn as_f32(self) -> f32;
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn from_f32(v: f32) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn as_f32(self) -> f32 {
        self
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn as_f32(self) -> f32 {
        self as f32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Lstm,
    Gru,
    Vanilla,
}

impl CellKind {
    /// Number of stacked gate blocks in the kernels.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
            CellKind::Vanilla => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub recurrent_layers: usize,
    pub hidden_size: usize,
    pub input_size: usize,
    pub output_size: usize,
    pub cell: CellKind,
    /// Activation of the candidate and cell output; gates always use sigmoid.
    pub input_activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            recurrent_layers: 4,
            hidden_size: 200,
            input_size: crate::preprocess::FEATURES,
            output_size: crate::preprocess::LABELS,
            cell: CellKind::Lstm,
            input_activation: Activation::Tanh,
        }
    }
}

impl NetworkConfig {
    pub fn small(layers: usize, hidden: usize) -> NetworkConfig {
        NetworkConfig {
            recurrent_layers: layers,
            hidden_size: hidden,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.recurrent_layers == 0 || self.hidden_size == 0 || self.input_size == 0 || self.output_size == 0 {
            return Err(Error::Config("network sizes must be > 0".into()));
        }
        Ok(())
    }

    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_size
        } else {
            self.hidden_size
        }
    }
}
