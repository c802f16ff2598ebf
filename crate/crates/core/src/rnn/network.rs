use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{gemv_acc, gemv_t_acc, outer_acc};
use super::loss::{loss, loss_grad, LossSpec};
use super::params::{LayerParams, NetworkParams};
use super::{sigmoid, Activation, CellKind, NetworkConfig, Real};
use crate::error::{Error, Result};

/// Per-step activations retained by [`Network::forward`] for backpropagation,
/// plus scratch buffers. Reusable across windows of any length.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    steps: usize,
    input: Vec<T>,
    /// Layer outputs `[steps × hidden]`.
    outputs: Vec<Vec<T>>,
    /// Post-nonlinearity gate values `[steps × gates·hidden]`.
    gates: Vec<Vec<T>>,
    /// LSTM cell state, or GRU reset-gated previous hidden state.
    aux: Vec<Vec<T>>,
    /// LSTM activated cell state.
    aux2: Vec<Vec<T>>,
    pre: Vec<T>,
    y_hat: Vec<T>,
    // backward scratch
    d_out: Vec<T>,
    d_in: Vec<T>,
    d_pre: Vec<T>,
    d_state: Vec<T>,
    d_cell: Vec<T>,
    d_tmp: Vec<T>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Tape<T> {
        Tape {
            steps: 0,
            input: Vec::new(),
            outputs: Vec::new(),
            gates: Vec::new(),
            aux: Vec::new(),
            aux2: Vec::new(),
            pre: Vec::new(),
            y_hat: Vec::new(),
            d_out: Vec::new(),
            d_in: Vec::new(),
            d_pre: Vec::new(),
            d_state: Vec::new(),
            d_cell: Vec::new(),
            d_tmp: Vec::new(),
        }
    }

    /// Output of the most recent forward pass.
    pub fn output(&self) -> &[T] {
        &self.y_hat
    }

    /// Top-layer hidden state after the last step.
    pub fn last_hidden(&self) -> &[T] {
        let top = self.outputs.last().map(|v| v.as_slice()).unwrap_or(&[]);
        let h = top.len() / self.steps.max(1);
        &top[top.len() - h..]
    }

    fn prepare(&mut self, cfg: &NetworkConfig, steps: usize) {
        let h = cfg.hidden_size;
        let g = cfg.cell.gates() * h;
        let layers = cfg.recurrent_layers;
        self.steps = steps;
        let resize = |v: &mut Vec<Vec<T>>, width: usize| {
            v.resize_with(layers, Vec::new);
            for x in v.iter_mut() {
                x.clear();
                x.resize(steps * width, T::zero());
            }
        };
        resize(&mut self.outputs, h);
        resize(&mut self.gates, g);
        resize(&mut self.aux, h);
        resize(&mut self.aux2, if cfg.cell == CellKind::Lstm { h } else { 0 });
        self.pre.resize(g, T::zero());
        self.y_hat.clear();
        self.y_hat.resize(cfg.output_size, T::zero());
    }
}

/// A recurrent stack plus the final dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: NetworkConfig,
    pub params: NetworkParams<T>,
}

impl<T: Real> Network<T> {
    pub fn new(config: NetworkConfig, params: NetworkParams<T>) -> Result<Network<T>> {
        config.validate()?;
        params.check_shapes(&config)?;
        Ok(Network { config, params })
    }

    /// Runs a `[steps × input]` window from a zero state and applies the dense
    /// layer to the final top-layer hidden state.
    pub fn forward<'t>(&self, window: &[T], tape: &'t mut Tape<T>) -> Result<&'t [T]> {
        let cfg = &self.config;
        if window.is_empty() || !window.len().is_multiple_of(cfg.input_size) {
            return Err(Error::Shape(alloc::format!(
                "window of {} values is not a positive multiple of {} features",
                window.len(),
                cfg.input_size
            )));
        }
        let steps = window.len() / cfg.input_size;
        tape.prepare(cfg, steps);
        tape.input.clear();
        tape.input.extend_from_slice(window);

        for l in 0..cfg.recurrent_layers {
            let (below, rest) = tape.outputs.split_at_mut(l);
            let x_seq: &[T] = if l == 0 { &tape.input } else { &below[l - 1] };
            let out = &mut rest[0];
            let p = &self.params.layers[l];
            let in_size = cfg.layer_input(l);
            match cfg.cell {
                CellKind::Lstm => lstm_forward(
                    p,
                    cfg,
                    x_seq,
                    in_size,
                    out,
                    &mut tape.gates[l],
                    &mut tape.aux[l],
                    &mut tape.aux2[l],
                    &mut tape.pre,
                ),
                CellKind::Gru => gru_forward(p, cfg, x_seq, in_size, out, &mut tape.gates[l], &mut tape.aux[l], &mut tape.pre),
                CellKind::Vanilla => vanilla_forward(p, cfg, x_seq, in_size, out, &mut tape.gates[l], &mut tape.pre),
            }
        }

        let h = cfg.hidden_size;
        let top = &tape.outputs[cfg.recurrent_layers - 1];
        let last = &top[(steps - 1) * h..];
        tape.y_hat.copy_from_slice(&self.params.dense_bias);
        gemv_acc(&mut tape.y_hat, &self.params.dense_kernel, last);
        Ok(&tape.y_hat)
    }

    /// Accumulates into `grads` the gradient of the loss for the most recent
    /// forward pass, given the gradient `d_y` of the loss w.r.t. the output.
    pub fn backward_from_output(&self, tape: &mut Tape<T>, d_y: &[T], grads: &mut NetworkParams<T>) {
        let cfg = &self.config;
        let h = cfg.hidden_size;
        let steps = tape.steps;
        let layers = cfg.recurrent_layers;

        let top = &tape.outputs[layers - 1];
        let last = &top[(steps - 1) * h..];
        outer_acc(&mut grads.dense_kernel, d_y, last);
        for (g, d) in grads.dense_bias.iter_mut().zip(d_y) {
            *g += *d;
        }

        tape.d_out.clear();
        tape.d_out.resize(steps * h, T::zero());
        gemv_t_acc(&mut tape.d_out[(steps - 1) * h..], &self.params.dense_kernel, d_y);

        for l in (0..layers).rev() {
            let in_size = cfg.layer_input(l);
            let need_dx = l > 0;
            tape.d_in.clear();
            if need_dx {
                tape.d_in.resize(steps * in_size, T::zero());
            }
            let x_seq: &[T] = if l == 0 { &tape.input } else { &tape.outputs[l - 1] };
            let ctx = LayerBackward {
                cfg,
                p: &self.params.layers[l],
                x_seq,
                in_size,
                out: &tape.outputs[l],
                gates: &tape.gates[l],
                aux: &tape.aux[l],
                aux2: &tape.aux2[l],
                steps,
            };
            let scratch = Scratch {
                d_pre: &mut tape.d_pre,
                d_state: &mut tape.d_state,
                d_cell: &mut tape.d_cell,
                d_tmp: &mut tape.d_tmp,
            };
            let dx = if need_dx { Some(tape.d_in.as_mut_slice()) } else { None };
            match cfg.cell {
                CellKind::Lstm => ctx.lstm(&tape.d_out, dx, &mut grads.layers[l], scratch),
                CellKind::Gru => ctx.gru(&tape.d_out, dx, &mut grads.layers[l], scratch),
                CellKind::Vanilla => ctx.vanilla(&tape.d_out, dx, &mut grads.layers[l], scratch),
            }
            if need_dx {
                core::mem::swap(&mut tape.d_out, &mut tape.d_in);
            }
        }
    }

    /// Backpropagates `spec`'s loss against `target` and returns the loss value.
    pub fn backward(&self, tape: &mut Tape<T>, target: &[T], spec: &LossSpec, grads: &mut NetworkParams<T>) -> T {
        let mut d_y = vec![T::zero(); self.config.output_size];
        let value = loss(&tape.y_hat, target, spec);
        loss_grad(&tape.y_hat, target, spec, &mut d_y);
        self.backward_from_output(tape, &d_y, grads);
        value
    }

    /// Single LSTM step outside any window, for inspection and tests.
    pub fn lstm_cell_step(&self, layer: usize, x: &[T], h: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
        lstm_cell_step(&self.params.layers[layer], self.config.input_activation, x, h, c)
    }
}

/// One LSTM step: `c' = f∘c + i∘g`, `h' = o∘act(c')` with sigmoid gates
/// `i, f, o` and `g = act(·)`.
pub fn lstm_cell_step<T: Real>(p: &LayerParams<T>, act: Activation, x: &[T], h: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
    let hs = h.len();
    let mut pre = p.bias.clone();
    gemv_acc(&mut pre, &p.input_kernel, x);
    gemv_acc(&mut pre, &p.recurrent_kernel, h);
    let mut h_new = vec![T::zero(); hs];
    let mut c_new = vec![T::zero(); hs];
    for j in 0..hs {
        let i = sigmoid(pre[j]);
        let f = sigmoid(pre[hs + j]);
        let g = act.apply(pre[2 * hs + j]);
        let o = sigmoid(pre[3 * hs + j]);
        c_new[j] = f * c[j] + i * g;
        h_new[j] = o * act.apply(c_new[j]);
    }
    (h_new, c_new)
}

#[allow(clippy::too_many_arguments)]
fn lstm_forward<T: Real>(
    p: &LayerParams<T>,
    cfg: &NetworkConfig,
    x_seq: &[T],
    in_size: usize,
    out: &mut [T],
    gates: &mut [T],
    cell: &mut [T],
    cell_act: &mut [T],
    pre: &mut [T],
) {
    let h = cfg.hidden_size;
    let act = cfg.input_activation;
    let steps = out.len() / h;
    for t in 0..steps {
        pre.copy_from_slice(&p.bias);
        gemv_acc(pre, &p.input_kernel, &x_seq[t * in_size..(t + 1) * in_size]);
        if t > 0 {
            let (prev, _) = out.split_at(t * h);
            gemv_acc(pre, &p.recurrent_kernel, &prev[(t - 1) * h..]);
        }
        let gate_row = &mut gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let i = sigmoid(pre[j]);
            let f = sigmoid(pre[h + j]);
            let g = act.apply(pre[2 * h + j]);
            let o = sigmoid(pre[3 * h + j]);
            let c_prev = if t > 0 { cell[(t - 1) * h + j] } else { T::zero() };
            let c = f * c_prev + i * g;
            let a = act.apply(c);
            gate_row[j] = i;
            gate_row[h + j] = f;
            gate_row[2 * h + j] = g;
            gate_row[3 * h + j] = o;
            cell[t * h + j] = c;
            cell_act[t * h + j] = a;
            out[t * h + j] = o * a;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gru_forward<T: Real>(
    p: &LayerParams<T>,
    cfg: &NetworkConfig,
    x_seq: &[T],
    in_size: usize,
    out: &mut [T],
    gates: &mut [T],
    reset_hidden: &mut [T],
    pre: &mut [T],
) {
    let h = cfg.hidden_size;
    let act = cfg.input_activation;
    let steps = out.len() / h;
    for t in 0..steps {
        pre.copy_from_slice(&p.bias);
        gemv_acc(pre, &p.input_kernel, &x_seq[t * in_size..(t + 1) * in_size]);
        let gate_row = &mut gates[t * 3 * h..(t + 1) * 3 * h];
        if t > 0 {
            let h_prev = &out[(t - 1) * h..t * h];
            gemv_acc(&mut pre[..2 * h], &p.recurrent_kernel[..2 * h * h], h_prev);
            for j in 0..h {
                let r = sigmoid(pre[h + j]);
                reset_hidden[t * h + j] = r * h_prev[j];
            }
            let (rh_prev, rh_cur) = reset_hidden.split_at(t * h);
            let _ = rh_prev;
            gemv_acc(&mut pre[2 * h..], &p.recurrent_kernel[2 * h * h..], &rh_cur[..h]);
        }
        for j in 0..h {
            let z = sigmoid(pre[j]);
            let r = sigmoid(pre[h + j]);
            let n = act.apply(pre[2 * h + j]);
            let h_prev = if t > 0 { out[(t - 1) * h + j] } else { T::zero() };
            gate_row[j] = z;
            gate_row[h + j] = r;
            gate_row[2 * h + j] = n;
            out[t * h + j] = (T::one() - z) * n + z * h_prev;
        }
    }
}

fn vanilla_forward<T: Real>(
    p: &LayerParams<T>,
    cfg: &NetworkConfig,
    x_seq: &[T],
    in_size: usize,
    out: &mut [T],
    gates: &mut [T],
    pre: &mut [T],
) {
    let h = cfg.hidden_size;
    let act = cfg.input_activation;
    let steps = out.len() / h;
    for t in 0..steps {
        pre.copy_from_slice(&p.bias);
        gemv_acc(pre, &p.input_kernel, &x_seq[t * in_size..(t + 1) * in_size]);
        if t > 0 {
            let (prev, _) = out.split_at(t * h);
            gemv_acc(pre, &p.recurrent_kernel, &prev[(t - 1) * h..]);
        }
        for j in 0..h {
            let y = act.apply(pre[j]);
            gates[t * h + j] = y;
            out[t * h + j] = y;
        }
    }
}

struct LayerBackward<'a, T> {
    cfg: &'a NetworkConfig,
    p: &'a LayerParams<T>,
    x_seq: &'a [T],
    in_size: usize,
    out: &'a [T],
    gates: &'a [T],
    aux: &'a [T],
    aux2: &'a [T],
    steps: usize,
}

struct Scratch<'a, T> {
    d_pre: &'a mut Vec<T>,
    d_state: &'a mut Vec<T>,
    d_cell: &'a mut Vec<T>,
    d_tmp: &'a mut Vec<T>,
}

fn reset<T: Real>(v: &mut Vec<T>, n: usize) {
    v.clear();
    v.resize(n, T::zero());
}

impl<T: Real> LayerBackward<'_, T> {
    fn x(&self, t: usize) -> &[T] {
        &self.x_seq[t * self.in_size..(t + 1) * self.in_size]
    }

    /// Shared tail: bias/kernel gradients for one step and the input gradient.
    fn accumulate(&self, t: usize, d_pre: &[T], grads: &mut LayerParams<T>, dx: &mut Option<&mut [T]>) {
        for (g, d) in grads.bias.iter_mut().zip(d_pre) {
            *g += *d;
        }
        outer_acc(&mut grads.input_kernel, d_pre, self.x(t));
        if let Some(dx) = dx.as_deref_mut() {
            gemv_t_acc(&mut dx[t * self.in_size..(t + 1) * self.in_size], &self.p.input_kernel, d_pre);
        }
    }

    fn lstm(&self, d_out: &[T], mut dx: Option<&mut [T]>, grads: &mut LayerParams<T>, s: Scratch<'_, T>) {
        let h = self.cfg.hidden_size;
        let act = self.cfg.input_activation;
        reset(s.d_pre, 4 * h);
        reset(s.d_state, h);
        reset(s.d_cell, h);
        let one = T::one();
        for t in (0..self.steps).rev() {
            let g_row = &self.gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let dh = d_out[t * h + j] + s.d_state[j];
                let (i, f, g, o) = (g_row[j], g_row[h + j], g_row[2 * h + j], g_row[3 * h + j]);
                let a = self.aux2[t * h + j];
                let c_prev = if t > 0 { self.aux[(t - 1) * h + j] } else { T::zero() };
                let d_o = dh * a;
                let dc = s.d_cell[j] + dh * o * act.derivative_from_output(a);
                s.d_cell[j] = dc * f;
                s.d_pre[j] = dc * g * i * (one - i);
                s.d_pre[h + j] = dc * c_prev * f * (one - f);
                s.d_pre[2 * h + j] = dc * i * act.derivative_from_output(g);
                s.d_pre[3 * h + j] = d_o * o * (one - o);
            }
            self.accumulate(t, s.d_pre, grads, &mut dx);
            s.d_state.iter_mut().for_each(|v| *v = T::zero());
            if t > 0 {
                let h_prev = &self.out[(t - 1) * h..t * h];
                outer_acc(&mut grads.recurrent_kernel, s.d_pre, h_prev);
                gemv_t_acc(s.d_state, &self.p.recurrent_kernel, s.d_pre);
            }
        }
    }

    fn gru(&self, d_out: &[T], mut dx: Option<&mut [T]>, grads: &mut LayerParams<T>, s: Scratch<'_, T>) {
        let h = self.cfg.hidden_size;
        let act = self.cfg.input_activation;
        reset(s.d_pre, 3 * h);
        reset(s.d_state, h);
        reset(s.d_cell, h);
        reset(s.d_tmp, h);
        let one = T::one();
        for t in (0..self.steps).rev() {
            let g_row = &self.gates[t * 3 * h..(t + 1) * 3 * h];
            // d_cell holds the direct path into h_{t-1}; d_tmp receives Uₙᵀ·dn.
            for j in 0..h {
                let dh = d_out[t * h + j] + s.d_state[j];
                let (z, n) = (g_row[j], g_row[2 * h + j]);
                let h_prev = if t > 0 { self.out[(t - 1) * h + j] } else { T::zero() };
                s.d_pre[j] = dh * (h_prev - n) * z * (one - z);
                s.d_pre[2 * h + j] = dh * (one - z) * act.derivative_from_output(n);
                s.d_cell[j] = dh * z;
            }
            s.d_tmp.iter_mut().for_each(|v| *v = T::zero());
            if t > 0 {
                gemv_t_acc(s.d_tmp, &self.p.recurrent_kernel[2 * h * h..], &s.d_pre[2 * h..]);
            }
            for j in 0..h {
                let r = g_row[h + j];
                let h_prev = if t > 0 { self.out[(t - 1) * h + j] } else { T::zero() };
                s.d_pre[h + j] = s.d_tmp[j] * h_prev * r * (one - r);
            }
            self.accumulate(t, s.d_pre, grads, &mut dx);
            s.d_state.iter_mut().for_each(|v| *v = T::zero());
            if t > 0 {
                let h_prev = &self.out[(t - 1) * h..t * h];
                let rh = &self.aux[t * h..(t + 1) * h];
                outer_acc(&mut grads.recurrent_kernel[..2 * h * h], &s.d_pre[..2 * h], h_prev);
                outer_acc(&mut grads.recurrent_kernel[2 * h * h..], &s.d_pre[2 * h..], rh);
                for j in 0..h {
                    s.d_state[j] = s.d_cell[j] + s.d_tmp[j] * g_row[h + j];
                }
                gemv_t_acc(s.d_state, &self.p.recurrent_kernel[..2 * h * h], &s.d_pre[..2 * h]);
            }
        }
    }

    fn vanilla(&self, d_out: &[T], mut dx: Option<&mut [T]>, grads: &mut LayerParams<T>, s: Scratch<'_, T>) {
        let h = self.cfg.hidden_size;
        let act = self.cfg.input_activation;
        reset(s.d_pre, h);
        reset(s.d_state, h);
        for t in (0..self.steps).rev() {
            for j in 0..h {
                let dh = d_out[t * h + j] + s.d_state[j];
                s.d_pre[j] = dh * act.derivative_from_output(self.out[t * h + j]);
            }
            self.accumulate(t, s.d_pre, grads, &mut dx);
            s.d_state.iter_mut().for_each(|v| *v = T::zero());
            if t > 0 {
                outer_acc(&mut grads.recurrent_kernel, s.d_pre, &self.out[(t - 1) * h..t * h]);
                gemv_t_acc(s.d_state, &self.p.recurrent_kernel, s.d_pre);
            }
        }
    }
}
