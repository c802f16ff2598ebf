use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{CellKind, NetworkConfig, Real};
use crate::error::{Error, Result};

/// Weights of one recurrent layer. Gate blocks are stacked along the rows:
/// `i, f, g, o` for LSTM, `z, r, n` for GRU, a single block for the vanilla cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// `[gates·hidden × input]`
    pub input_kernel: Vec<T>,
    /// `[gates·hidden × hidden]`
    pub recurrent_kernel: Vec<T>,
    /// `[gates·hidden]`
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    pub layers: Vec<LayerParams<T>>,
    /// `[output × hidden]`
    pub dense_kernel: Vec<T>,
    pub dense_bias: Vec<T>,
}

/// Name and shape of one parameter tensor, in serialisation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: Real> NetworkParams<T> {
    pub fn zeros(cfg: &NetworkConfig) -> NetworkParams<T> {
        let g = cfg.cell.gates() * cfg.hidden_size;
        let h = cfg.hidden_size;
        NetworkParams {
            layers: (0..cfg.recurrent_layers)
                .map(|l| LayerParams {
                    input_kernel: vec![T::zero(); g * cfg.layer_input(l)],
                    recurrent_kernel: vec![T::zero(); g * h],
                    bias: vec![T::zero(); g],
                })
                .collect(),
            dense_kernel: vec![T::zero(); cfg.output_size * h],
            dense_bias: vec![T::zero(); cfg.output_size],
        }
    }

    /// Tensor names and shapes for `cfg`, in the order of [`Self::slices`].
    pub fn layout(cfg: &NetworkConfig) -> Vec<TensorInfo> {
        let g = cfg.cell.gates() * cfg.hidden_size;
        let h = cfg.hidden_size;
        let mut out = Vec::new();
        for l in 0..cfg.recurrent_layers {
            out.push(TensorInfo { name: format!("layer{l}.input_kernel"), shape: vec![g, cfg.layer_input(l)] });
            out.push(TensorInfo { name: format!("layer{l}.recurrent_kernel"), shape: vec![g, h] });
            out.push(TensorInfo { name: format!("layer{l}.bias"), shape: vec![g] });
        }
        out.push(TensorInfo { name: "dense.kernel".into(), shape: vec![cfg.output_size, h] });
        out.push(TensorInfo { name: "dense.bias".into(), shape: vec![cfg.output_size] });
        out
    }

    pub fn slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::with_capacity(self.layers.len() * 3 + 2);
        for l in &self.layers {
            out.push(&l.input_kernel);
            out.push(&l.recurrent_kernel);
            out.push(&l.bias);
        }
        out.push(&self.dense_kernel);
        out.push(&self.dense_bias);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(self.layers.len() * 3 + 2);
        for l in &mut self.layers {
            out.push(&mut l.input_kernel);
            out.push(&mut l.recurrent_kernel);
            out.push(&mut l.bias);
        }
        out.push(&mut self.dense_kernel);
        out.push(&mut self.dense_bias);
        out
    }

    /// Rebuilds parameters from flat tensors in layout order.
    pub fn from_tensors(cfg: &NetworkConfig, tensors: Vec<Vec<T>>) -> Result<NetworkParams<T>> {
        let layout = Self::layout(cfg);
        if tensors.len() != layout.len() {
            return Err(Error::Shape(format!("expected {} tensors, got {}", layout.len(), tensors.len())));
        }
        for (info, t) in layout.iter().zip(&tensors) {
            if info.len() != t.len() {
                return Err(Error::Shape(format!("{}: expected {} values, got {}", info.name, info.len(), t.len())));
            }
        }
        let mut it = tensors.into_iter();
        let layers = (0..cfg.recurrent_layers)
            .map(|_| LayerParams {
                input_kernel: it.next().unwrap_or_default(),
                recurrent_kernel: it.next().unwrap_or_default(),
                bias: it.next().unwrap_or_default(),
            })
            .collect();
        Ok(NetworkParams {
            layers,
            dense_kernel: it.next().unwrap_or_default(),
            dense_bias: it.next().unwrap_or_default(),
        })
    }

    /// Verifies tensor sizes against `cfg`.
    pub fn check_shapes(&self, cfg: &NetworkConfig) -> Result<()> {
        let layout = Self::layout(cfg);
        let slices = self.slices();
        if layout.len() != slices.len() {
            return Err(Error::Shape(format!(
                "config has {} recurrent layers, parameters have {}",
                cfg.recurrent_layers,
                self.layers.len()
            )));
        }
        for (info, s) in layout.iter().zip(slices) {
            if info.len() != s.len() {
                return Err(Error::Shape(format!("{}: expected {:?}", info.name, info.shape)));
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn fill_zero(&mut self) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &NetworkParams<T>) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::from_f64(x.as_f64())).collect::<Vec<U>>();
        NetworkParams {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    input_kernel: conv(&l.input_kernel),
                    recurrent_kernel: conv(&l.recurrent_kernel),
                    bias: conv(&l.bias),
                })
                .collect(),
            dense_kernel: conv(&self.dense_kernel),
            dense_bias: conv(&self.dense_bias),
        }
    }
}

fn glorot_uniform<T: Real>(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, out: &mut [T]) {
    let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    for v in out {
        *v = T::from_f64(rng.gen_range(-limit..limit));
    }
}

/// Square orthogonal matrix from the QR decomposition of a Gaussian matrix.
fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Sign fix so the distribution is uniform over the orthogonal group.
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Glorot-uniform input and dense kernels, orthogonal recurrent blocks,
/// zero biases except the LSTM forget gate (1.0).
pub fn init_params<T: Real>(cfg: &NetworkConfig, seed: u64) -> Result<NetworkParams<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = NetworkParams::<T>::zeros(cfg);
    let h = cfg.hidden_size;
    let gates = cfg.cell.gates();
    for (l, layer) in p.layers.iter_mut().enumerate() {
        glorot_uniform(&mut rng, cfg.layer_input(l), gates * h, &mut layer.input_kernel);
        for g in 0..gates {
            let q = orthogonal(&mut rng, h);
            let block = &mut layer.recurrent_kernel[g * h * h..(g + 1) * h * h];
            for r in 0..h {
                for c in 0..h {
                    block[r * h + c] = T::from_f64(q[(r, c)]);
                }
            }
        }
        if cfg.cell == CellKind::Lstm {
            layer.bias[h..2 * h].iter_mut().for_each(|b| *b = T::one());
        }
    }
    glorot_uniform(&mut rng, h, cfg.output_size, &mut p.dense_kernel);
    Ok(p)
}
