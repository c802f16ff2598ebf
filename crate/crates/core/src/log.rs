//! Flight-log data model.
//!
//! A [`FlightLog`] holds one flight's raw multi-rate sensor streams (IMU,
//! barometer, magnetometer) together with the estimator's state stream that
//! serves as ground truth. Timestamps are integer microseconds from log start.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-norm quaternion invariant of [`EkfState`].
pub const QUAT_NORM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t_us: i64,
    /// Body-frame angular rate, rad/s.
    pub gyro: [f64; 3],
    /// Body-frame specific force, m/s² (includes the gravity reaction).
    pub accel: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaroSample {
    pub t_us: i64,
    pub temp_c: f64,
    pub alt_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagSample {
    pub t_us: i64,
    /// Body-frame magnetic field, gauss.
    pub mag: [f64; 3],
}

/// Estimated vehicle state in the local NED frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkfState {
    pub t_us: i64,
    /// Body-to-NED rotation, scalar first.
    pub quat: [f64; 4],
    pub vel_ned: [f64; 3],
    pub pos_ned: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleType {
    Quadrotor,
    FixedWing,
    Vtol,
    Octorotor,
    Hexarotor,
    GroundVehicle,
    Unknown,
}

impl VehicleType {
    pub const ALL: [VehicleType; 7] = [
        VehicleType::Quadrotor,
        VehicleType::FixedWing,
        VehicleType::Vtol,
        VehicleType::Octorotor,
        VehicleType::Hexarotor,
        VehicleType::GroundVehicle,
        VehicleType::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleType::Quadrotor => "quadrotor",
            VehicleType::FixedWing => "fixed_wing",
            VehicleType::Vtol => "vtol",
            VehicleType::Octorotor => "octorotor",
            VehicleType::Hexarotor => "hexarotor",
            VehicleType::GroundVehicle => "ground_vehicle",
            VehicleType::Unknown => "unknown",
        }
    }

    /// Parses a vehicle name; anything unrecognised maps to `Unknown`.
    pub fn parse(s: &str) -> VehicleType {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .unwrap_or(VehicleType::Unknown)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogSource {
    Recorded,
    Synthetic,
}

impl LogSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LogSource::Recorded => "recorded",
            LogSource::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightLog {
    pub log_id: String,
    pub vehicle_type: VehicleType,
    pub source: LogSource,
    pub home_lat_deg: Option<f64>,
    pub imu: Vec<ImuSample>,
    pub baro: Vec<BaroSample>,
    pub mag: Vec<MagSample>,
    pub ekf: Vec<EkfState>,
}

/// Which stream a defect was found in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Imu,
    Baro,
    Mag,
    Ekf,
}

impl StreamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StreamKind::Imu => "imu",
            StreamKind::Baro => "baro",
            StreamKind::Mag => "mag",
            StreamKind::Ekf => "ekf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamGap {
    pub stream: StreamKind,
    pub start_us: i64,
    pub end_us: i64,
}

impl StreamGap {
    pub fn duration_s(&self) -> f64 {
        (self.end_us - self.start_us) as f64 * 1e-6
    }
}

/// Result of [`validate_log`]; `ok` is false whenever any defect list is non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub duration_s: f64,
    pub gaps: Vec<StreamGap>,
    /// Rows carrying at least one NaN or infinite value.
    pub nan_count: usize,
    pub quat_norm_violations: usize,
    /// Samples whose timestamp does not exceed the previous one.
    pub non_monotonic: usize,
    pub empty_streams: Vec<StreamKind>,
    pub no_overlap: bool,
}

impl ValidationReport {
    pub fn defect_count(&self) -> usize {
        self.gaps.len()
            + self.nan_count
            + self.quat_norm_violations
            + self.non_monotonic
            + self.empty_streams.len()
            + usize::from(self.no_overlap)
    }
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl ImuSample {
    pub fn is_finite(&self) -> bool {
        finite(&self.gyro) && finite(&self.accel)
    }
}

impl BaroSample {
    pub fn is_finite(&self) -> bool {
        self.temp_c.is_finite() && self.alt_m.is_finite()
    }
}

impl MagSample {
    pub fn is_finite(&self) -> bool {
        finite(&self.mag)
    }
}

impl EkfState {
    pub fn is_finite(&self) -> bool {
        finite(&self.quat) && finite(&self.vel_ned) && finite(&self.pos_ned)
    }

    pub fn quat_norm(&self) -> f64 {
        libm::sqrt(self.quat.iter().map(|q| q * q).sum())
    }
}

struct StreamScan {
    first: Option<i64>,
    last: Option<i64>,
    non_monotonic: usize,
    nan: usize,
}

fn scan<I>(kind: StreamKind, samples: I, max_gap_us: i64, gaps: &mut Vec<StreamGap>) -> StreamScan
where
    I: IntoIterator<Item = (i64, bool)>,
{
    let mut out = StreamScan {
        first: None,
        last: None,
        non_monotonic: 0,
        nan: 0,
    };
    for (t, ok) in samples {
        if !ok {
            out.nan += 1;
        }
        match out.last {
            None => out.first = Some(t),
            Some(prev) if t <= prev => out.non_monotonic += 1,
            Some(prev) => {
                if t - prev > max_gap_us {
                    gaps.push(StreamGap {
                        stream: kind,
                        start_us: prev,
                        end_us: t,
                    });
                }
            }
        }
        if out.last.is_none_or(|prev| t > prev) {
            out.last = Some(t);
        }
    }
    out
}

/// Inspects a log for the defects that make it unusable for training.
pub fn validate_log(log: &FlightLog, max_gap_s: f64) -> ValidationReport {
    let max_gap_us = if max_gap_s.is_finite() {
        libm::round(max_gap_s * 1e6) as i64
    } else {
        i64::MAX
    };
    let mut gaps = Vec::new();
    let scans = [
        (
            StreamKind::Imu,
            scan(
                StreamKind::Imu,
                log.imu.iter().map(|s| (s.t_us, s.is_finite())),
                max_gap_us,
                &mut gaps,
            ),
        ),
        (
            StreamKind::Baro,
            scan(
                StreamKind::Baro,
                log.baro.iter().map(|s| (s.t_us, s.is_finite())),
                max_gap_us,
                &mut gaps,
            ),
        ),
        (
            StreamKind::Mag,
            scan(
                StreamKind::Mag,
                log.mag.iter().map(|s| (s.t_us, s.is_finite())),
                max_gap_us,
                &mut gaps,
            ),
        ),
        (
            StreamKind::Ekf,
            scan(
                StreamKind::Ekf,
                log.ekf.iter().map(|s| (s.t_us, s.is_finite())),
                max_gap_us,
                &mut gaps,
            ),
        ),
    ];

    let quat_norm_violations = log
        .ekf
        .iter()
        .filter(|s| {
            let n = s.quat_norm();
            !n.is_finite() || libm::fabs(n - 1.0) > QUAT_NORM_TOL
        })
        .count();

    let empty_streams: Vec<StreamKind> = scans
        .iter()
        .filter(|(_, s)| s.first.is_none())
        .map(|(k, _)| *k)
        .collect();

    let overlap_start = scans.iter().filter_map(|(_, s)| s.first).max();
    let overlap_end = scans.iter().filter_map(|(_, s)| s.last).min();
    let no_overlap = empty_streams.is_empty()
        && matches!((overlap_start, overlap_end), (Some(a), Some(b)) if a >= b);

    let start = scans.iter().filter_map(|(_, s)| s.first).min();
    let end = scans.iter().filter_map(|(_, s)| s.last).max();
    let duration_s = match (start, end) {
        (Some(a), Some(b)) => (b - a) as f64 * 1e-6,
        _ => 0.0,
    };

    let mut report = ValidationReport {
        ok: true,
        duration_s,
        gaps,
        nan_count: scans.iter().map(|(_, s)| s.nan).sum(),
        quat_norm_violations,
        non_monotonic: scans.iter().map(|(_, s)| s.non_monotonic).sum(),
        empty_streams,
        no_overlap,
    };
    report.ok = report.defect_count() == 0;
    report
}

impl FlightLog {
    /// Checks the hard type invariants: non-empty streams, strictly increasing
    /// timestamps, finite values and unit quaternions. Gaps are not checked.
    pub fn check_invariants(&self) -> Result<()> {
        let report = validate_log(self, f64::INFINITY);
        if report.ok {
            return Ok(());
        }
        let mut why = String::new();
        if !report.empty_streams.is_empty() {
            why.push_str(&format!("empty streams {:?}; ", report.empty_streams));
        }
        if report.non_monotonic > 0 {
            why.push_str(&format!("{} non-monotonic timestamps; ", report.non_monotonic));
        }
        if report.nan_count > 0 {
            why.push_str(&format!("{} non-finite rows; ", report.nan_count));
        }
        if report.quat_norm_violations > 0 {
            why.push_str(&format!(
                "{} non-unit quaternions; ",
                report.quat_norm_violations
            ));
        }
        if report.no_overlap {
            why.push_str("streams do not overlap in time; ");
        }
        Err(Error::Validation(String::from(why.trim_end_matches("; "))))
    }

    /// Duration spanned by the EKF stream, seconds.
    pub fn ekf_duration_s(&self) -> f64 {
        match (self.ekf.first(), self.ekf.last()) {
            (Some(a), Some(b)) => (b.t_us - a.t_us) as f64 * 1e-6,
            _ => 0.0,
        }
    }

    /// Restricts every stream to `start_us <= t <= end_us`.
    pub fn crop(&self, start_us: i64, end_us: i64) -> FlightLog {
        let keep = |t: i64| t >= start_us && t <= end_us;
        FlightLog {
            log_id: self.log_id.clone(),
            vehicle_type: self.vehicle_type,
            source: self.source,
            home_lat_deg: self.home_lat_deg,
            imu: self.imu.iter().copied().filter(|s| keep(s.t_us)).collect(),
            baro: self.baro.iter().copied().filter(|s| keep(s.t_us)).collect(),
            mag: self.mag.iter().copied().filter(|s| keep(s.t_us)).collect(),
            ekf: self.ekf.iter().copied().filter(|s| keep(s.t_us)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny_log() -> FlightLog {
        let imu = (0..100)
            .map(|k| ImuSample {
                t_us: k * 12_000,
                gyro: [0.0; 3],
                accel: [0.0, 0.0, -9.80665],
            })
            .collect();
        let baro = (0..80)
            .map(|k| BaroSample {
                t_us: k * 15_000,
                temp_c: 25.0,
                alt_m: 0.0,
            })
            .collect();
        let mag = (0..54)
            .map(|k| MagSample {
                t_us: k * 22_000,
                mag: [0.22, 0.0, 0.42],
            })
            .collect();
        let ekf = (0..6)
            .map(|k| EkfState {
                t_us: k * 200_000,
                quat: [1.0, 0.0, 0.0, 0.0],
                vel_ned: [0.0; 3],
                pos_ned: [0.0; 3],
            })
            .collect();
        FlightLog {
            log_id: "tiny".into(),
            vehicle_type: VehicleType::Quadrotor,
            source: LogSource::Synthetic,
            home_lat_deg: None,
            imu,
            baro,
            mag,
            ekf,
        }
    }

    #[test]
    fn clean_log_has_no_defects() {
        let report = validate_log(&tiny_log(), 1.0);
        assert!(report.ok, "{report:?}");
        assert_eq!(report.defect_count(), 0);
        assert!(tiny_log().check_invariants().is_ok());
    }

    #[test]
    fn gap_is_reported() {
        let mut log = tiny_log();
        for s in log.imu.iter_mut().skip(50) {
            s.t_us += 5_000_000;
        }
        let report = validate_log(&log, 1.0);
        assert!(!report.ok);
        assert_eq!(report.gaps.len(), 1);
        let gap = report.gaps[0];
        assert_eq!(gap.stream, StreamKind::Imu);
        assert_eq!(gap.start_us, 49 * 12_000);
        assert!((gap.duration_s() - 5.012).abs() < 1e-9);
    }

    #[test]
    fn nan_row_counted_once() {
        let mut log = tiny_log();
        log.imu[10].accel = [f64::NAN, f64::NAN, 0.0];
        let report = validate_log(&log, 1.0);
        assert!(!report.ok);
        assert_eq!(report.nan_count, 1);
    }

    #[test]
    fn bad_quaternion_and_order_detected() {
        let mut log = tiny_log();
        log.ekf[2].quat = [0.5, 0.0, 0.0, 0.0];
        log.baro.swap(3, 4);
        let report = validate_log(&log, 1.0);
        assert_eq!(report.quat_norm_violations, 1);
        assert_eq!(report.non_monotonic, 1);
        assert!(matches!(log.check_invariants(), Err(Error::Validation(_))));
    }

    #[test]
    fn empty_stream_invalid() {
        let mut log = tiny_log();
        log.mag = vec![];
        let report = validate_log(&log, 1.0);
        assert_eq!(report.empty_streams, vec![StreamKind::Mag]);
        assert!(!report.ok);
    }

    #[test]
    fn unknown_vehicle_name_preserved_as_unknown() {
        assert_eq!(VehicleType::parse("blimp"), VehicleType::Unknown);
        for v in VehicleType::ALL {
            assert_eq!(VehicleType::parse(v.as_str()), v);
        }
    }

    #[test]
    fn validation_is_pure() {
        let log = tiny_log();
        assert_eq!(validate_log(&log, 0.5), validate_log(&log, 0.5));
    }
}
