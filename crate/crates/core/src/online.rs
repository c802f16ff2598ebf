//! Causal counterpart of preprocessing plus inference: samples are binned as
//! they arrive, each closed bin becomes one feature row, and a prediction is
//! made whenever a full window of rows is available.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::log::{BaroSample, ImuSample, MagSample};
use crate::model::Model;
use crate::preprocess::{BinSums, FeatureAssembler, FEATURES};
use crate::rnn::Tape;

/// Bin boundaries `t0 + k·period`, each displaced by an independent uniform
/// offset in `[-jitter, jitter]` microseconds.
#[derive(Debug, Clone)]
pub struct BinSchedule {
    t0_us: i64,
    period_us: i64,
    jitter_us: i64,
    k: i64,
    rng: ChaCha8Rng,
}

impl BinSchedule {
    pub fn new(t0_us: i64, period_us: i64, jitter_us: i64, seed: u64) -> Result<BinSchedule> {
        if period_us <= 0 {
            return Err(Error::Config("bin period must be > 0".into()));
        }
        if jitter_us < 0 || 2 * jitter_us >= period_us {
            return Err(Error::Config("jitter must lie in [0, period / 2)".into()));
        }
        Ok(BinSchedule { t0_us, period_us, jitter_us, k: 0, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// End of the next bin.
    pub fn next_end(&mut self) -> i64 {
        self.k += 1;
        let offset = if self.jitter_us > 0 { self.rng.gen_range(-self.jitter_us..=self.jitter_us) } else { 0 };
        self.t0_us + self.k * self.period_us + offset
    }
}

/// One emitted increment.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineStep {
    /// End of the bin that completed the window.
    pub t_us: i64,
    pub increment: Vec<f32>,
    /// At least one bin inside the window had no IMU sample.
    pub imu_repeated: bool,
}

/// Single-owner streaming estimator.
#[derive(Debug, Clone)]
pub struct OnlineEstimator<'m> {
    model: &'m Model,
    schedule: BinSchedule,
    assembler: FeatureAssembler,
    bin: BinSums,
    bin_start: i64,
    bin_end: i64,
    rows: VecDeque<([f32; FEATURES], bool)>,
    buf: Vec<f32>,
    tape: Tape<f32>,
    late_samples: u64,
    imu_repeats: u64,
}

impl<'m> OnlineEstimator<'m> {
    /// Starts with the bin `(t0, first boundary]`.
    pub fn new(model: &'m Model, mut schedule: BinSchedule) -> OnlineEstimator<'m> {
        let bin_start = schedule.t0_us;
        let bin_end = schedule.next_end();
        OnlineEstimator {
            model,
            schedule,
            assembler: FeatureAssembler::new(),
            bin: BinSums::default(),
            bin_start,
            bin_end,
            rows: VecDeque::with_capacity(model.window + 1),
            buf: Vec::with_capacity(model.window * FEATURES),
            tape: Tape::new(),
            late_samples: 0,
            imu_repeats: 0,
        }
    }

    pub fn bin_end(&self) -> i64 {
        self.bin_end
    }

    /// Samples dropped because they belonged to an already closed bin.
    pub fn late_samples(&self) -> u64 {
        self.late_samples
    }

    pub fn imu_repeats(&self) -> u64 {
        self.imu_repeats
    }

    fn admit(&mut self, t_us: i64) -> Result<bool> {
        if t_us <= self.bin_start {
            self.late_samples += 1;
            return Ok(false);
        }
        if t_us > self.bin_end {
            return Err(Error::Validation(alloc::format!(
                "sample at {t_us} us is past the open bin ending at {} us",
                self.bin_end
            )));
        }
        Ok(true)
    }

    pub fn push_imu(&mut self, s: &ImuSample) -> Result<()> {
        if self.admit(s.t_us)? {
            self.bin.add_imu(s);
        }
        Ok(())
    }

    pub fn push_baro(&mut self, s: &BaroSample) -> Result<()> {
        if self.admit(s.t_us)? {
            self.bin.add_baro(s);
        }
        Ok(())
    }

    pub fn push_mag(&mut self, s: &MagSample) -> Result<()> {
        if self.admit(s.t_us)? {
            self.bin.add_mag(s);
        }
        Ok(())
    }

    /// Closes the open bin and predicts if the window is full.
    pub fn close_bin(&mut self) -> Result<Option<OnlineStep>> {
        let (row, flags) = self.assembler.assemble(&self.bin);
        if flags.imu_repeated {
            self.imu_repeats += 1;
        }
        self.rows.push_back((self.model.normalization.apply(&row), flags.imu_repeated));
        if self.rows.len() > self.model.window {
            self.rows.pop_front();
        }
        let t_us = self.bin_end;
        self.bin = BinSums::default();
        self.bin_start = self.bin_end;
        self.bin_end = self.schedule.next_end();

        if self.rows.len() < self.model.window {
            return Ok(None);
        }
        self.buf.clear();
        let mut imu_repeated = false;
        for (r, rep) in &self.rows {
            self.buf.extend_from_slice(r);
            imu_repeated |= *rep;
        }
        let increment = self.model.network.forward(&self.buf, &mut self.tape)?.to_vec();
        Ok(Some(OnlineStep { t_us, increment, imu_repeated }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{unify_rates, Normalization};
    use crate::rnn::{init_params, NetworkConfig};
    use crate::synth::{generate_flight, NoiseConfig, Profile, SynthConfig};

    fn model(window: usize) -> Model {
        let cfg = NetworkConfig::small(1, 8);
        let log = generate_flight(&SynthConfig::new(Profile::Circle, 30.0, 1)).unwrap();
        let norm = Normalization::fit([&unify_rates(&log).unwrap()]).unwrap();
        Model::new(cfg, init_params(&cfg, 2).unwrap(), norm, [1.0; 6], window).unwrap()
    }

    fn replay(est: &mut OnlineEstimator, log: &crate::log::FlightLog, end_us: i64) -> Vec<OnlineStep> {
        let (mut i, mut b, mut m) = (0, 0, 0);
        let mut out = Vec::new();
        while est.bin_end() <= end_us {
            let e = est.bin_end();
            while i < log.imu.len() && log.imu[i].t_us <= e {
                est.push_imu(&log.imu[i]).unwrap();
                i += 1;
            }
            while b < log.baro.len() && log.baro[b].t_us <= e {
                est.push_baro(&log.baro[b]).unwrap();
                b += 1;
            }
            while m < log.mag.len() && log.mag[m].t_us <= e {
                est.push_mag(&log.mag[m]).unwrap();
                m += 1;
            }
            out.extend(est.close_bin().unwrap());
        }
        out
    }

    #[test]
    fn matches_offline_bitwise_without_jitter() {
        let model = model(10);
        let log = generate_flight(&SynthConfig::new(Profile::WaypointPolyline, 40.0, 5)).unwrap();
        let offline = model.predict_series(&unify_rates(&log).unwrap()).unwrap();
        let t0 = log.ekf[0].t_us;
        let end = log.ekf.last().unwrap().t_us;
        let mut est = OnlineEstimator::new(&model, BinSchedule::new(t0, 200_000, 0, 0).unwrap());
        let online = replay(&mut est, &log, end);
        assert_eq!(online.len(), offline.len());
        for (a, b) in online.iter().zip(&offline) {
            assert_eq!(&a.increment, b);
        }
        assert_eq!(online[0].t_us, log.ekf[10].t_us);
        assert!(online.windows(2).all(|w| w[1].t_us - w[0].t_us == 200_000));
    }

    #[test]
    fn jitter_perturbs_but_stays_close() {
        let model = model(10);
        let cfg = SynthConfig { noise: NoiseConfig::zero(), ..SynthConfig::new(Profile::Circle, 40.0, 6) };
        let log = generate_flight(&cfg).unwrap();
        let offline = model.predict_series(&unify_rates(&log).unwrap()).unwrap();
        let (t0, end) = (log.ekf[0].t_us, log.ekf.last().unwrap().t_us);
        let mut est = OnlineEstimator::new(&model, BinSchedule::new(t0, 200_000, 1000, 3).unwrap());
        let online = replay(&mut est, &log, end - 1000);
        let mut max_dev = 0.0f32;
        for (a, b) in online.iter().zip(&offline) {
            for (x, y) in a.increment.iter().zip(b) {
                max_dev = max_dev.max((x - y).abs());
            }
        }
        assert!(max_dev > 0.0 && max_dev < 0.5, "{max_dev}");
    }

    #[test]
    fn late_and_early_samples() {
        let model = model(2);
        let mut est = OnlineEstimator::new(&model, BinSchedule::new(0, 200_000, 0, 0).unwrap());
        let s = |t| ImuSample { t_us: t, gyro: [0.0; 3], accel: [0.0, 0.0, -9.8] };
        est.push_imu(&s(0)).unwrap();
        assert_eq!(est.late_samples(), 1);
        assert!(est.push_imu(&s(200_001)).is_err());
        assert!(est.close_bin().unwrap().is_none());
        assert_eq!(est.imu_repeats(), 1);
        est.push_imu(&s(300_000)).unwrap();
        let step = est.close_bin().unwrap().unwrap();
        assert!(step.imu_repeated);
        assert_eq!(step.t_us, 400_000);
        assert!(BinSchedule::new(0, 200, 100, 0).is_err());
    }
}
