use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{FEATURES, LABELS};
use crate::error::{Error, Result};
use crate::log::{BaroSample, EkfState, FlightLog, ImuSample, MagSample};

/// Running sums of the raw samples that fall into one bin.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinSums {
    imu: [f64; 6],
    imu_n: usize,
    baro: [f64; 2],
    baro_n: usize,
    mag: [f64; 3],
    mag_n: usize,
}

impl BinSums {
    pub fn add_imu(&mut self, s: &ImuSample) {
        for k in 0..3 {
            self.imu[k] += s.gyro[k];
            self.imu[3 + k] += s.accel[k];
        }
        self.imu_n += 1;
    }

    pub fn add_baro(&mut self, s: &BaroSample) {
        self.baro[0] += s.temp_c;
        self.baro[1] += s.alt_m;
        self.baro_n += 1;
    }

    pub fn add_mag(&mut self, s: &MagSample) {
        for k in 0..3 {
            self.mag[k] += s.mag[k];
        }
        self.mag_n += 1;
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.imu_n, self.baro_n, self.mag_n)
    }
}

/// Flags raised while turning one bin into a feature row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RowFlags {
    pub imu_repeated: bool,
    pub baro_carried: bool,
    pub mag_carried: bool,
}

/// Turns consecutive bins into feature rows. Holds the previous bin means
/// needed for Δalt and for carrying empty baro/mag bins forward; shared by
/// the offline and streaming paths so both produce identical rows.
#[derive(Debug, Clone, Default)]
pub struct FeatureAssembler {
    prev_alt: Option<f64>,
    prev_temp: f64,
    prev_mag: [f64; 3],
    last_imu: [f64; 6],
}

impl FeatureAssembler {
    pub fn new() -> FeatureAssembler {
        FeatureAssembler::default()
    }

    pub fn assemble(&mut self, bin: &BinSums) -> ([f64; FEATURES], RowFlags) {
        let mut flags = RowFlags::default();
        let mut row = [0.0; FEATURES];

        if bin.imu_n > 0 {
            let n = bin.imu_n as f64;
            self.last_imu = bin.imu.map(|s| s / n);
        } else {
            flags.imu_repeated = true;
        }
        row[..6].copy_from_slice(&self.last_imu);

        if bin.baro_n > 0 {
            let n = bin.baro_n as f64;
            let temp = bin.baro[0] / n;
            let alt = bin.baro[1] / n;
            row[6] = temp;
            row[7] = self.prev_alt.map_or(0.0, |prev| alt - prev);
            self.prev_temp = temp;
            self.prev_alt = Some(alt);
        } else {
            flags.baro_carried = true;
            row[6] = self.prev_temp;
            row[7] = 0.0;
        }

        if bin.mag_n > 0 {
            let n = bin.mag_n as f64;
            self.prev_mag = bin.mag.map(|s| s / n);
        } else {
            flags.mag_carried = true;
        }
        row[8..].copy_from_slice(&self.prev_mag);
        (row, flags)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnifyReport {
    pub imu_counts: Vec<usize>,
    pub baro_counts: Vec<usize>,
    pub mag_counts: Vec<usize>,
    /// Bins whose barometer mean was carried forward from the previous bin.
    pub baro_carried: Vec<usize>,
    pub mag_carried: Vec<usize>,
}

/// The 5 Hz aligned feature/label table of one flight.
///
/// Row `k` of `features` averages the raw samples with timestamps in
/// `(t_us[k], t_us[k + 1]]`; row `k` of `labels` is `state(k + 1) - state(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedSeries {
    pub t_us: Vec<i64>,
    pub features: Vec<[f64; FEATURES]>,
    pub labels: Vec<[f64; LABELS]>,
    pub init_state: EkfState,
    pub report: UnifyReport,
}

impl UnifiedSeries {
    /// Number of feature/label rows (one fewer than EKF samples).
    pub fn rows(&self) -> usize {
        self.labels.len()
    }
}

fn state_row(s: &EkfState) -> [f64; LABELS] {
    [s.pos_ned[0], s.pos_ned[1], s.pos_ned[2], s.vel_ned[0], s.vel_ned[1], s.vel_ned[2]]
}

/// Averages every sensor's samples between consecutive EKF outputs.
pub fn unify_rates(log: &FlightLog) -> Result<UnifiedSeries> {
    let ekf = &log.ekf;
    if ekf.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: ekf.len() });
    }
    let t0 = ekf[0].t_us;
    let bins = ekf.len() - 1;

    let mut sums = alloc::vec![BinSums::default(); bins];
    let bin_of = |t: i64| -> Option<usize> {
        if t <= t0 || t > ekf[bins].t_us {
            return None;
        }
        // First EKF timestamp >= t closes the bin.
        let upper = ekf.partition_point(|e| e.t_us < t);
        Some(upper - 1)
    };
    for s in &log.imu {
        if let Some(k) = bin_of(s.t_us) {
            sums[k].add_imu(s);
        }
    }
    for s in &log.baro {
        if let Some(k) = bin_of(s.t_us) {
            sums[k].add_baro(s);
        }
    }
    for s in &log.mag {
        if let Some(k) = bin_of(s.t_us) {
            sums[k].add_mag(s);
        }
    }

    let mut report = UnifyReport::default();
    let mut assembler = FeatureAssembler::new();
    let mut features = Vec::with_capacity(bins);
    for (k, bin) in sums.iter().enumerate() {
        let (imu_n, baro_n, mag_n) = bin.counts();
        report.imu_counts.push(imu_n);
        report.baro_counts.push(baro_n);
        report.mag_counts.push(mag_n);
        if imu_n == 0 {
            return Err(Error::EmptyImuBin { bin: k });
        }
        let (row, flags) = assembler.assemble(bin);
        if flags.baro_carried {
            report.baro_carried.push(k);
        }
        if flags.mag_carried {
            report.mag_carried.push(k);
        }
        features.push(row);
    }

    let states: Vec<[f64; LABELS]> = ekf.iter().map(state_row).collect();
    let labels = super::difference_rows(&states)?;

    Ok(UnifiedSeries {
        t_us: ekf.iter().map(|e| e.t_us).collect(),
        features,
        labels,
        init_state: ekf[0],
        report,
    })
}
