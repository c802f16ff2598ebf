//! Replay harness: one producer thread per sensor pushes samples into a
//! bounded drop-oldest queue, and a single consumer closes 5 Hz bins and runs
//! the network.
//!
//! With `replay_speed > 0` producers and consumer pace themselves against the
//! wall clock. With `replay_speed == 0` they run on a virtual clock: the
//! consumer hands each producer the current bin end over a one-slot tick
//! queue and waits for a one-slot acknowledgement before draining.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_queue::ArrayQueue;
use navnet_core::log::{BaroSample, FlightLog, ImuSample, MagSample};
use navnet_core::model::Model;
use navnet_core::online::{BinSchedule, OnlineEstimator};
use navnet_core::preprocess::{unify_rates, LABEL_NAMES};
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::logio::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamConfig {
    pub period_ms: u64,
    /// Bin boundaries move by up to ± this much.
    pub jitter_ms: f64,
    pub queue_capacity: usize,
    /// 1.0 replays in real time, 0 as fast as possible.
    pub replay_speed: f64,
    pub seed: u64,
    /// Expected model window; checked against the checkpoint when set.
    pub window: Option<usize>,
    /// Extra sleep after each bin, to emulate a slow consumer.
    pub consumer_delay_ms: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            period_ms: 200,
            jitter_ms: 0.0,
            queue_capacity: 1024,
            replay_speed: 0.0,
            seed: 0,
            window: None,
            consumer_delay_ms: 0,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NavError::Config(m.into()));
        if self.period_ms == 0 {
            return bad("stream period_ms must be > 0");
        }
        if self.queue_capacity == 0 {
            return bad("stream queue_capacity must be >= 1");
        }
        if !(self.jitter_ms.is_finite() && self.jitter_ms >= 0.0 && 2.0 * self.jitter_ms < self.period_ms as f64) {
            return bad("stream jitter_ms must lie in [0, period_ms / 2)");
        }
        if !(self.replay_speed.is_finite() && self.replay_speed >= 0.0) {
            return bad("stream replay_speed must be finite and >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlinePrediction {
    pub t_us: i64,
    pub increment: Vec<f32>,
    /// Bin close to prediction emit.
    pub latency_ms: f64,
    /// Samples lost to queue overflow so far, all sensors.
    pub dropped_samples: u64,
    pub imu_repeated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRun {
    pub predictions: Vec<OnlinePrediction>,
    pub dropped_samples: u64,
    pub late_samples: u64,
    pub imu_repeats: u64,
    /// Largest queue length seen by the consumer.
    pub max_queue_len: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy)]
enum Sample {
    Imu(ImuSample),
    Baro(BaroSample),
    Mag(MagSample),
}

impl Sample {
    fn t_us(&self) -> i64 {
        match self {
            Sample::Imu(s) => s.t_us,
            Sample::Baro(s) => s.t_us,
            Sample::Mag(s) => s.t_us,
        }
    }
}

/// A sample plus the producer's overflow count at push time.
#[derive(Debug, Clone, Copy)]
struct Item {
    sample: Sample,
    dropped: u64,
}

struct Channel {
    data: ArrayQueue<Item>,
    ticks: ArrayQueue<Option<i64>>,
    acks: ArrayQueue<()>,
}

fn wait_pop<T>(q: &ArrayQueue<T>) -> T {
    let mut spins = 0u32;
    loop {
        if let Some(v) = q.pop() {
            return v;
        }
        if spins < 64 {
            spins += 1;
            thread::yield_now();
        } else {
            thread::sleep(Duration::from_micros(50));
        }
    }
}

fn sleep_until(start: Instant, offset: Duration) {
    let now = start.elapsed();
    if offset > now {
        thread::sleep(offset - now);
    }
}

fn wall_offset(t_us: i64, t0_us: i64, speed: f64) -> Duration {
    Duration::from_secs_f64(((t_us - t0_us).max(0) as f64 * 1e-6) / speed)
}

fn produce(ch: &Channel, samples: &[Sample], realtime: Option<(Instant, i64, f64)>) {
    let mut dropped = 0u64;
    let mut push = |s: Sample| {
        let item = Item { sample: s, dropped };
        if ch.data.force_push(item).is_some() {
            dropped += 1;
        }
    };
    match realtime {
        Some((start, t0, speed)) => {
            for s in samples {
                sleep_until(start, wall_offset(s.t_us(), t0, speed));
                push(*s);
            }
        }
        None => {
            let mut i = 0;
            while let Some(horizon) = wait_pop(&ch.ticks) {
                while i < samples.len() && samples[i].t_us() <= horizon {
                    push(samples[i]);
                    i += 1;
                }
                // One tick in flight at a time, so this slot is always free.
                let _ = ch.acks.push(());
            }
        }
    }
}

fn feed(est: &mut OnlineEstimator, s: &Sample) -> Result<()> {
    Ok(match s {
        Sample::Imu(x) => est.push_imu(x),
        Sample::Baro(x) => est.push_baro(x),
        Sample::Mag(x) => est.push_mag(x),
    }?)
}

struct Consumer<'a, 'm> {
    est: OnlineEstimator<'m>,
    channels: &'a [Channel],
    /// First sample popped past the current bin end, per sensor.
    held: Vec<Option<Sample>>,
    dropped: Vec<u64>,
    max_queue_len: usize,
}

impl Consumer<'_, '_> {
    fn drain(&mut self, bin_end: i64) -> Result<()> {
        for (k, ch) in self.channels.iter().enumerate() {
            self.max_queue_len = self.max_queue_len.max(ch.data.len());
            if let Some(s) = self.held[k] {
                if s.t_us() > bin_end {
                    continue;
                }
                self.held[k] = None;
                feed(&mut self.est, &s)?;
            }
            while let Some(item) = ch.data.pop() {
                self.dropped[k] = self.dropped[k].max(item.dropped);
                if item.sample.t_us() > bin_end {
                    self.held[k] = Some(item.sample);
                    break;
                }
                feed(&mut self.est, &item.sample)?;
            }
        }
        Ok(())
    }
}

/// Replays `log` through the harness and collects every emitted prediction.
pub fn run_stream(model: &Model, log: &FlightLog, cfg: &StreamConfig) -> Result<StreamRun> {
    cfg.validate()?;
    if let Some(w) = cfg.window {
        if w != model.window {
            return Err(NavError::Config(format!("stream window {w} does not match the checkpoint window {}", model.window)));
        }
    }
    log.check_invariants()?;
    let (Some(first), Some(last)) = (log.ekf.first(), log.ekf.last()) else {
        return Err(NavError::Core(navnet_core::Error::Validation("log has no EKF samples".into())));
    };
    let (t0, end_us) = (first.t_us, last.t_us);
    let period_us = cfg.period_ms as i64 * 1000;
    let jitter_us = (cfg.jitter_ms * 1000.0).round() as i64;
    let schedule = BinSchedule::new(t0, period_us, jitter_us, cfg.seed)?;

    let streams: [Vec<Sample>; 3] = [
        log.imu.iter().map(|s| Sample::Imu(*s)).collect(),
        log.baro.iter().map(|s| Sample::Baro(*s)).collect(),
        log.mag.iter().map(|s| Sample::Mag(*s)).collect(),
    ];
    let channels: Vec<Channel> = (0..streams.len())
        .map(|_| Channel {
            data: ArrayQueue::new(cfg.queue_capacity),
            ticks: ArrayQueue::new(1),
            acks: ArrayQueue::new(1),
        })
        .collect();
    let realtime = cfg.replay_speed > 0.0;
    let start = Instant::now();
    let mut consumer = Consumer {
        est: OnlineEstimator::new(model, schedule),
        channels: &channels,
        held: vec![None; channels.len()],
        dropped: vec![0; channels.len()],
        max_queue_len: 0,
    };
    let mut predictions = Vec::new();

    let outcome = thread::scope(|s| {
        for (ch, samples) in channels.iter().zip(&streams) {
            let pace = realtime.then_some((start, t0, cfg.replay_speed));
            s.spawn(move || produce(ch, samples, pace));
        }
        let mut run = || -> Result<()> {
            while consumer.est.bin_end() <= end_us {
                let e = consumer.est.bin_end();
                if realtime {
                    sleep_until(start, wall_offset(e, t0, cfg.replay_speed));
                } else {
                    for ch in consumer.channels {
                        let _ = ch.ticks.push(Some(e));
                    }
                    for ch in consumer.channels {
                        wait_pop(&ch.acks);
                    }
                }
                let closed = Instant::now();
                consumer.drain(e)?;
                if let Some(step) = consumer.est.close_bin()? {
                    predictions.push(OnlinePrediction {
                        t_us: step.t_us,
                        increment: step.increment,
                        latency_ms: closed.elapsed().as_secs_f64() * 1e3,
                        dropped_samples: consumer.dropped.iter().sum(),
                        imu_repeated: step.imu_repeated,
                    });
                }
                if cfg.consumer_delay_ms > 0 {
                    thread::sleep(Duration::from_millis(cfg.consumer_delay_ms));
                }
            }
            Ok(())
        };
        let result = run();
        if !realtime {
            for ch in &channels {
                let _ = ch.ticks.force_push(None);
            }
        }
        result
    });
    outcome?;
    // Overflow after the final bin is still overflow.
    let mut dropped_total = 0;
    for (k, ch) in channels.iter().enumerate() {
        while let Some(item) = ch.data.pop() {
            consumer.dropped[k] = consumer.dropped[k].max(item.dropped);
        }
        dropped_total += consumer.dropped[k];
    }
    Ok(StreamRun {
        predictions,
        dropped_samples: dropped_total,
        late_samples: consumer.est.late_samples(),
        imu_repeats: consumer.est.imu_repeats(),
        max_queue_len: consumer.max_queue_len,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalDeviation {
    pub signal: String,
    pub max_abs: f64,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub log_id: String,
    pub online_predictions: usize,
    pub offline_predictions: usize,
    pub compared: usize,
    pub bitwise_equal: bool,
    pub max_abs_deviation: f64,
    pub per_signal: Vec<SignalDeviation>,
    pub dropped_samples: u64,
    pub late_samples: u64,
    pub imu_repeats: u64,
    pub max_queue_len: usize,
    pub max_latency_ms: f64,
}

/// Offline predictions over the whole (untrimmed) log, for comparison with
/// a replay of the same log.
pub fn offline_predictions(model: &Model, log: &FlightLog) -> Result<Vec<Vec<f32>>> {
    Ok(model.predict_series(&unify_rates(log)?)?)
}

/// Aligns online and offline predictions by index.
pub fn compare_predictions(log_id: &str, run: &StreamRun, offline: &[Vec<f32>]) -> CompareReport {
    let online = &run.predictions;
    let n = online.len().min(offline.len());
    let width = offline.first().map_or(0, Vec::len);
    let mut max_abs = vec![0.0f64; width];
    let mut sum_abs = vec![0.0f64; width];
    let mut bitwise = online.len() == offline.len();
    for (a, b) in online.iter().zip(offline) {
        bitwise &= a.increment.len() == b.len();
        for (k, (x, y)) in a.increment.iter().zip(b).enumerate() {
            bitwise &= x.to_bits() == y.to_bits();
            let d = (f64::from(*x) - f64::from(*y)).abs();
            max_abs[k] = max_abs[k].max(d);
            sum_abs[k] += d;
        }
    }
    let per_signal = (0..width)
        .map(|k| SignalDeviation {
            signal: LABEL_NAMES.get(k).map_or_else(|| format!("y{k}"), |s| (*s).to_string()),
            max_abs: max_abs[k],
            mean_abs: if n > 0 { sum_abs[k] / n as f64 } else { 0.0 },
        })
        .collect();
    CompareReport {
        log_id: log_id.to_string(),
        online_predictions: online.len(),
        offline_predictions: offline.len(),
        compared: n,
        bitwise_equal: bitwise,
        max_abs_deviation: max_abs.iter().copied().fold(0.0, f64::max),
        per_signal,
        dropped_samples: run.dropped_samples,
        late_samples: run.late_samples,
        imu_repeats: run.imu_repeats,
        max_queue_len: run.max_queue_len,
        max_latency_ms: online.iter().map(|p| p.latency_ms).fold(0.0, f64::max),
    }
}

pub fn compare_online_offline(model: &Model, log: &FlightLog, cfg: &StreamConfig) -> Result<(StreamRun, CompareReport)> {
    let run = run_stream(model, log, cfg)?;
    let offline = offline_predictions(model, log)?;
    let report = compare_predictions(&log.log_id, &run, &offline);
    Ok((run, report))
}

pub fn write_online_csv(path: &Path, predictions: &[OnlinePrediction]) -> Result<()> {
    let file = File::create(path).map_err(|e| NavError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let width = predictions.first().map_or(LABEL_NAMES.len(), |p| p.increment.len());
    let mut emit = || -> std::io::Result<()> {
        let mut cols = vec!["t_us".to_string()];
        for k in 0..width {
            cols.push(LABEL_NAMES.get(k).map_or_else(|| format!("y{k}"), |s| (*s).to_string()));
        }
        cols.extend(["latency_ms".into(), "drops".into(), "imu_repeated".into()]);
        writeln!(w, "{}", cols.join(","))?;
        for p in predictions {
            write!(w, "{}", p.t_us)?;
            for v in &p.increment {
                write!(w, ",{}", fmt_f64(f64::from(*v)))?;
            }
            writeln!(w, ",{:.3},{},{}", p.latency_ms, p.dropped_samples, u8::from(p.imu_repeated))?;
        }
        w.flush()
    };
    emit().map_err(|e| NavError::io(path, e))
}
