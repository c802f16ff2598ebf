//! Mini-batch training with a piecewise-constant learning-rate schedule,
//! early stopping and warm starts.
//!
//! Gradients of a batch are computed in a fixed number of contiguous chunks
//! and combined with a fixed-order pairwise sum, so results do not depend on
//! how a [`BatchRunner`] schedules the chunks.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{WindowedDataset, FEATURES, LABELS};
use crate::rnn::{adam_step, AdamConfig, AdamState, LossKind, LossSpec, Network, NetworkConfig, NetworkParams, Real, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// `(first epoch, learning rate)` pairs, epochs strictly increasing.
    pub lr_schedule: Vec<(usize, f64)>,
    pub shuffle_seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    /// A weighted MAE with no weights takes them from the dataset.
    pub loss: LossSpec,
    pub l2: f64,
    pub adam: AdamConfig,
    pub precision: Precision,
    /// Number of gradient partial sums per batch.
    pub reduction_chunks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 1024,
            lr_schedule: vec![(0, 0.005), (51, 0.0025), (101, 0.001)],
            shuffle_seed: 0,
            early_stop_patience: 10,
            loss: LossSpec { kind: LossKind::WeightedMae, weights: Vec::new(), huber_delta: 1.0 },
            l2: 0.0,
            adam: AdamConfig::default(),
            precision: Precision::F32,
            reduction_chunks: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.reduction_chunks == 0 {
            return Err(Error::Config("reduction_chunks must be >= 1".into()));
        }
        if self.lr_schedule.is_empty() {
            return Err(Error::Config("learning-rate schedule is empty".into()));
        }
        if self.lr_schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("learning-rate schedule epochs must increase strictly".into()));
        }
        if self.lr_schedule.iter().any(|(_, lr)| !(*lr > 0.0) || !lr.is_finite()) {
            return Err(Error::Config("learning rates must be finite and > 0".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Config("l2 must be >= 0".into()));
        }
        Ok(())
    }

    /// Loss spec with dataset weights filled in where none were given.
    pub fn resolve_loss(&self, data: &WindowedDataset) -> LossSpec {
        let mut spec = self.loss.clone();
        if spec.kind == LossKind::WeightedMae && spec.weights.is_empty() {
            spec.weights = data.weights.iter().map(|w| *w as f64).collect();
        }
        spec
    }
}

/// Learning rate of the last schedule entry starting at or before `epoch`.
pub fn lr_at(schedule: &[(usize, f64)], epoch: usize) -> Result<f64> {
    if schedule.is_empty() {
        return Err(Error::Config("learning-rate schedule is empty".into()));
    }
    schedule
        .iter()
        .rev()
        .find(|(start, _)| *start <= epoch)
        .map(|(_, lr)| *lr)
        .ok_or_else(|| Error::Config(alloc::format!("no learning rate defined for epoch {epoch}")))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss over each epoch's batches.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub lr: Vec<f64>,
    pub wall_time_s: Vec<f64>,
    pub best_epoch: Option<usize>,
    /// Loss of the initial parameters on the whole training set.
    pub initial_train_loss: f64,
    pub initial_val_loss: Option<f64>,
    pub warm_start: bool,
    pub stopped_early: bool,
}

/// Gradient and loss sums of one chunk of a batch.
#[derive(Debug, Clone)]
pub struct ChunkWork<T> {
    pub grads: NetworkParams<T>,
    pub loss: f64,
    tape: Tape<T>,
    window: Vec<T>,
    target: Vec<T>,
}

impl<T: Real> ChunkWork<T> {
    pub fn new(cfg: &NetworkConfig) -> ChunkWork<T> {
        ChunkWork {
            grads: NetworkParams::zeros(cfg),
            loss: 0.0,
            tape: Tape::new(),
            window: Vec::new(),
            target: Vec::new(),
        }
    }

    /// Forward/backward over `indices`, replacing the stored sums.
    pub fn run(&mut self, net: &Network<T>, data: &WindowedDataset, indices: &[usize], spec: &LossSpec, backward: bool) {
        if backward {
            self.grads.fill_zero();
        }
        self.loss = 0.0;
        for &i in indices {
            self.window.clear();
            self.window.extend(data.window_slice(i).iter().map(|v| T::from_f32(*v)));
            self.target.clear();
            self.target.extend(data.label(i).iter().map(|v| T::from_f32(*v)));
            if net.forward(&self.window, &mut self.tape).is_err() {
                self.loss = f64::NAN;
                return;
            }
            if backward {
                self.loss += net.backward(&mut self.tape, &self.target, spec, &mut self.grads).as_f64();
            } else {
                self.loss += crate::rnn::loss(self.tape.output(), &self.target, spec).as_f64();
            }
        }
    }
}

/// Executes the chunks of one batch. Implementations may run chunks in any
/// order or concurrently; each chunk writes only its own slot.
pub trait BatchRunner {
    fn run_chunks<T: Real>(
        &self,
        net: &Network<T>,
        data: &WindowedDataset,
        chunks: &[&[usize]],
        spec: &LossSpec,
        backward: bool,
        work: &mut [ChunkWork<T>],
    );
}

/// Runs every chunk on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchRunner for Sequential {
    fn run_chunks<T: Real>(
        &self,
        net: &Network<T>,
        data: &WindowedDataset,
        chunks: &[&[usize]],
        spec: &LossSpec,
        backward: bool,
        work: &mut [ChunkWork<T>],
    ) {
        for (c, w) in chunks.iter().zip(work.iter_mut()) {
            w.run(net, data, c, spec, backward);
        }
    }
}

/// Progress callbacks and a clock; the defaults do nothing.
pub trait TrainObserver {
    fn now_s(&self) -> f64 {
        0.0
    }
    fn on_epoch(&self, _epoch: usize, _report: &TrainReport) {}
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl TrainObserver for Silent {}

/// Splits `indices` into at most `n` contiguous chunks whose boundaries
/// depend only on the lengths.
fn split_chunks(indices: &[usize], n: usize) -> Vec<&[usize]> {
    let len = indices.len();
    let n = n.min(len).max(1);
    (0..n).map(|c| &indices[c * len / n..(c + 1) * len / n]).collect()
}

/// Pairwise sum of the chunk results into `work[0]`.
fn tree_reduce<T: Real>(work: &mut [ChunkWork<T>], used: usize, with_grads: bool) {
    let mut step = 1;
    while step < used {
        let mut i = 0;
        while i + step < used {
            let (left, right) = work.split_at_mut(i + step);
            if with_grads {
                left[i].grads.add_assign(&right[0].grads);
            }
            left[i].loss += right[0].loss;
            i += 2 * step;
        }
        step *= 2;
    }
}

/// Mean loss of `net` over every window of `data`.
pub fn evaluate_loss<T: Real, R: BatchRunner>(
    net: &Network<T>,
    data: &WindowedDataset,
    spec: &LossSpec,
    batch_size: usize,
    chunks: usize,
    runner: &R,
    work: &mut [ChunkWork<T>],
) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let order: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for batch in order.chunks(batch_size) {
        let parts = split_chunks(batch, chunks);
        runner.run_chunks(net, data, &parts, spec, false, work);
        tree_reduce(work, parts.len(), false);
        total += work[0].loss;
    }
    total / data.len() as f64
}

fn check_dataset(data: &WindowedDataset, cfg: &NetworkConfig) -> Result<()> {
    data.check()?;
    if cfg.input_size != FEATURES || cfg.output_size != LABELS {
        return Err(Error::Shape(alloc::format!(
            "network maps {} -> {}, dataset has {} features and {} labels",
            cfg.input_size,
            cfg.output_size,
            FEATURES,
            LABELS
        )));
    }
    Ok(())
}

/// Parameters returned by training: `params` are the best-validation
/// parameters when early stopping is on, otherwise the final ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome<T> {
    pub params: NetworkParams<T>,
    pub final_params: NetworkParams<T>,
    pub report: TrainReport,
}

/// Trains on the calling thread without progress output.
pub fn fit<T: Real>(
    net_cfg: &NetworkConfig,
    dataset: &WindowedDataset,
    val: &WindowedDataset,
    cfg: &TrainConfig,
    init: NetworkParams<T>,
) -> Result<(NetworkParams<T>, TrainReport)> {
    let out = fit_with(net_cfg, dataset, val, cfg, init, &Sequential, &Silent)?;
    Ok((out.params, out.report))
}

pub fn fit_with<T: Real, R: BatchRunner, O: TrainObserver>(
    net_cfg: &NetworkConfig,
    dataset: &WindowedDataset,
    val: &WindowedDataset,
    cfg: &TrainConfig,
    init: NetworkParams<T>,
    runner: &R,
    observer: &O,
) -> Result<FitOutcome<T>> {
    cfg.validate()?;
    let mut net = Network::new(*net_cfg, init)?;
    let mut report = TrainReport::default();
    if cfg.epochs == 0 {
        return Ok(FitOutcome { params: net.params.clone(), final_params: net.params, report });
    }
    check_dataset(dataset, net_cfg)?;
    if dataset.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let has_val = !val.is_empty();
    if has_val {
        check_dataset(val, net_cfg)?;
    }
    let spec = cfg.resolve_loss(dataset);
    spec.validate(net_cfg.output_size)?;

    let chunks = cfg.reduction_chunks;
    let mut work: Vec<ChunkWork<T>> = (0..chunks).map(|_| ChunkWork::new(net_cfg)).collect();
    let mut adam = AdamState::new(net_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let l2 = T::from_f64(cfg.l2);

    report.initial_train_loss = evaluate_loss(&net, dataset, &spec, cfg.batch_size, chunks, runner, &mut work);
    if has_val {
        report.initial_val_loss = Some(evaluate_loss(&net, val, &spec, cfg.batch_size, chunks, runner, &mut work));
    }

    let mut best_val = f64::INFINITY;
    let mut best_params: Option<NetworkParams<T>> = None;
    let mut since_best = 0;
    let start = observer.now_s();
    for epoch in 0..cfg.epochs {
        let lr = lr_at(&cfg.lr_schedule, epoch)?;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let parts = split_chunks(batch, chunks);
            runner.run_chunks(&net, dataset, &parts, &spec, true, &mut work);
            tree_reduce(&mut work, parts.len(), true);
            if !work[0].loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            epoch_loss += work[0].loss;
            let grads = &mut work[0].grads;
            grads.scale(T::one() / T::from_f64(batch.len() as f64));
            if cfg.l2 > 0.0 {
                for (g, p) in grads.slices_mut().into_iter().zip(net.params.slices()) {
                    for (gi, pi) in g.iter_mut().zip(p) {
                        *gi += l2 * *pi;
                    }
                }
            }
            adam_step(&mut net.params, &work[0].grads, &mut adam, lr, &cfg.adam);
            if !net.params.all_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
        }
        report.train_loss.push(epoch_loss / dataset.len() as f64);
        report.lr.push(lr);

        if has_val {
            let v = evaluate_loss(&net, val, &spec, cfg.batch_size, chunks, runner, &mut work);
            if !v.is_finite() {
                return Err(Error::Diverged { epoch, batch: 0 });
            }
            report.val_loss.push(v);
            if v < best_val {
                best_val = v;
                report.best_epoch = Some(epoch);
                since_best = 0;
                if cfg.early_stop_patience > 0 {
                    best_params = Some(net.params.clone());
                }
            } else {
                since_best += 1;
            }
        }
        report.wall_time_s.push(observer.now_s() - start);
        observer.on_epoch(epoch, &report);
        if has_val && cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience {
            report.stopped_early = true;
            break;
        }
    }

    let params = best_params.unwrap_or_else(|| net.params.clone());
    Ok(FitOutcome { params, final_params: net.params, report })
}

/// Retrains a source network on a target dataset with fresh optimizer state.
pub fn transfer_fit<T: Real, R: BatchRunner, O: TrainObserver>(
    source_cfg: &NetworkConfig,
    source: &NetworkParams<T>,
    target_train: &WindowedDataset,
    target_val: &WindowedDataset,
    cfg: &TrainConfig,
    runner: &R,
    observer: &O,
) -> Result<FitOutcome<T>> {
    source.check_shapes(source_cfg)?;
    check_dataset(target_train, source_cfg)?;
    if target_train.window == 0 {
        return Err(Error::Config("target dataset has no window length".into()));
    }
    let mut out = fit_with(source_cfg, target_train, target_val, cfg, source.clone(), runner, observer)?;
    out.report.warm_start = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::Normalization;
    use crate::rnn::init_params;
    use rand::Rng;

    fn toy_dataset(m: usize, window: usize, seed: u64) -> WindowedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = WindowedDataset::empty(window, 1);
        for _ in 0..m {
            let feats: Vec<f32> = (0..window * FEATURES).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // Labels depend on the inputs so the task is learnable.
            let s: f32 = feats.iter().step_by(FEATURES).sum::<f32>() / window as f32;
            let last = &feats[(window - 1) * FEATURES..];
            d.windows.extend_from_slice(&feats);
            d.labels.extend_from_slice(&[s, last[1], -last[2], 0.5 * last[3], last[4] * last[5], 0.1]);
            d.source_of.push(0);
        }
        d.sources.push("toy".into());
        d.normalization = Normalization::identity();
        d
    }

    fn small_cfg() -> NetworkConfig {
        NetworkConfig::small(1, 16)
    }

    #[test]
    fn schedule_lookup() {
        let s = TrainConfig::default().lr_schedule;
        assert_eq!(lr_at(&s, 10).unwrap(), 0.005);
        assert_eq!(lr_at(&s, 50).unwrap(), 0.005);
        assert_eq!(lr_at(&s, 51).unwrap(), 0.0025);
        assert_eq!(lr_at(&s, 75).unwrap(), 0.0025);
        assert_eq!(lr_at(&s, 150).unwrap(), 0.001);
        assert!(lr_at(&[], 0).is_err());
        assert!(lr_at(&[(5, 0.1)], 2).is_err());
        let bad = TrainConfig { lr_schedule: vec![(0, 0.1), (0, 0.2)], ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn chunking_covers_every_index_once() {
        let idx: Vec<usize> = (0..37).collect();
        for n in 1..12 {
            let parts = split_chunks(&idx, n);
            let flat: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
            assert_eq!(flat, idx);
        }
        assert_eq!(split_chunks(&idx[..3], 8).len(), 3);
    }

    #[test]
    fn overfits_a_tiny_set() {
        let data = toy_dataset(20, 4, 1);
        let cfg = TrainConfig {
            epochs: 500,
            batch_size: 8,
            lr_schedule: vec![(0, 0.01)],
            early_stop_patience: 0,
            loss: LossSpec::mae(),
            ..Default::default()
        };
        let init = init_params::<f32>(&small_cfg(), 3).unwrap();
        let (_, report) = fit(&small_cfg(), &data, &WindowedDataset::empty(4, 1), &cfg, init).unwrap();
        assert_eq!(report.train_loss.len(), 500);
        let last = *report.train_loss.last().unwrap();
        assert!(last < 0.1 * report.initial_train_loss, "{last} vs {}", report.initial_train_loss);
    }

    #[test]
    fn zero_epochs_return_init() {
        let init = init_params::<f32>(&small_cfg(), 3).unwrap();
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let data = toy_dataset(4, 3, 1);
        let (p, r) = fit(&small_cfg(), &data, &data, &cfg, init.clone()).unwrap();
        assert_eq!(p, init);
        assert_eq!(r, TrainReport::default());
    }

    #[test]
    fn deterministic_and_chunk_invariant() {
        let data = toy_dataset(30, 3, 2);
        let val = toy_dataset(6, 3, 3);
        let init = init_params::<f32>(&small_cfg(), 4).unwrap();
        let cfg = TrainConfig { epochs: 5, batch_size: 7, shuffle_seed: 11, ..Default::default() };
        let a = fit(&small_cfg(), &data, &val, &cfg, init.clone()).unwrap();
        let b = fit(&small_cfg(), &data, &val, &cfg, init.clone()).unwrap();
        assert_eq!(a, b);
        let other_seed = TrainConfig { shuffle_seed: 12, ..cfg.clone() };
        assert_ne!(a.0, fit(&small_cfg(), &data, &val, &other_seed, init).unwrap().0);
        assert_eq!(data, toy_dataset(30, 3, 2));
    }

    #[test]
    fn early_stopping_returns_best_params() {
        let data = toy_dataset(40, 3, 5);
        let val = toy_dataset(5, 3, 6);
        let init = init_params::<f32>(&small_cfg(), 4).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 4,
            lr_schedule: vec![(0, 0.05)],
            early_stop_patience: 3,
            ..Default::default()
        };
        let (params, report) = fit(&small_cfg(), &data, &val, &cfg, init).unwrap();
        let best = report.best_epoch.unwrap();
        let min = report.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.val_loss[best], min);
        let net = Network::new(small_cfg(), params).unwrap();
        let spec = cfg.resolve_loss(&data);
        let mut work = vec![ChunkWork::new(&small_cfg())];
        let v = evaluate_loss(&net, &val, &spec, 4, 1, &Sequential, &mut work);
        assert_eq!(v, min);
        if report.stopped_early {
            assert_eq!(report.val_loss.len(), best + 4);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let data = toy_dataset(8, 3, 7);
        let mut init = init_params::<f32>(&small_cfg(), 4).unwrap();
        init.dense_bias[0] = f32::NAN;
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        assert!(matches!(
            fit(&small_cfg(), &data, &WindowedDataset::empty(3, 1), &cfg, init),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn transfer_checks_shapes_and_tags_report() {
        let data = toy_dataset(10, 3, 8);
        let src = init_params::<f32>(&small_cfg(), 4).unwrap();
        let cfg = TrainConfig { epochs: 2, ..Default::default() };
        let out = transfer_fit(&small_cfg(), &src, &data, &data, &cfg, &Sequential, &Silent).unwrap();
        assert!(out.report.warm_start);
        let three = NetworkConfig { output_size: 3, ..small_cfg() };
        let src3 = init_params::<f32>(&three, 4).unwrap();
        assert!(transfer_fit(&three, &src3, &data, &data, &cfg, &Sequential, &Silent).is_err());
    }
}
