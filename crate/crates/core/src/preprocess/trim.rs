use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::{validate_log, FlightLog, ValidationReport};

fn speed(v: &[f64; 3]) -> f64 {
    libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

/// Index ranges of EKF samples above the speed threshold whose span lasts at least `hold_s`.
fn sustained_runs(log: &FlightLog, vel_thresh_mps: f64, hold_s: f64) -> Vec<(usize, usize)> {
    let hold_us = libm::round(hold_s * 1e6) as i64;
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    let ekf = &log.ekf;
    for (i, s) in ekf.iter().enumerate() {
        let moving = speed(&s.vel_ned) > vel_thresh_mps;
        match (moving, start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                if ekf[i - 1].t_us - ekf[a].t_us >= hold_us {
                    runs.push((a, i - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        let b = ekf.len() - 1;
        if ekf[b].t_us - ekf[a].t_us >= hold_us {
            runs.push((a, b));
        }
    }
    runs
}

/// Crops all streams to `[takeoff, landing]`, where takeoff is the start of
/// the first run of EKF speed above `vel_thresh_mps` lasting `hold_s`, and
/// landing the end of the last such run.
pub fn trim_ground_time(log: &FlightLog, vel_thresh_mps: f64, hold_s: f64) -> Result<FlightLog> {
    if log.ekf.is_empty() {
        return Err(Error::Validation("EKF stream is empty".into()));
    }
    let runs = sustained_runs(log, vel_thresh_mps, hold_s);
    let (first, last) = match (runs.first(), runs.last()) {
        (Some(f), Some(l)) => (f.0, l.1),
        _ => return Err(Error::NoTakeoff),
    };
    if first == 0 && last == log.ekf.len() - 1 {
        return Ok(log.clone());
    }
    Ok(log.crop(log.ekf[first].t_us, log.ekf[last].t_us))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanupConfig {
    pub vel_thresh_mps: f64,
    pub hold_s: f64,
    pub min_duration_s: f64,
    pub max_gap_s: f64,
}

impl Default for CleanupConfig {
    fn default() -> Self {
        CleanupConfig {
            vel_thresh_mps: 0.5,
            hold_s: 1.0,
            min_duration_s: 60.0,
            max_gap_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoTakeoff,
    ValidationDefects,
    TooShort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanupVerdict {
    pub log_id: alloc::string::String,
    pub accepted: bool,
    pub reasons: Vec<RejectReason>,
    pub validation: ValidationReport,
    /// EKF span kept after trimming, seconds (0 when no takeoff).
    pub retained_s: f64,
    #[serde(skip)]
    pub trimmed: Option<FlightLog>,
}

pub fn detect_corrupted(log: &FlightLog) -> CleanupVerdict {
    detect_corrupted_with(log, &CleanupConfig::default())
}

/// Decides whether a log is usable; accepted verdicts carry the trimmed log.
pub fn detect_corrupted_with(log: &FlightLog, cfg: &CleanupConfig) -> CleanupVerdict {
    let validation = validate_log(log, cfg.max_gap_s);
    let mut reasons = Vec::new();
    if !validation.ok {
        reasons.push(RejectReason::ValidationDefects);
    }
    let trimmed = if log.ekf.is_empty() {
        None
    } else {
        trim_ground_time(log, cfg.vel_thresh_mps, cfg.hold_s).ok()
    };
    let retained_s = trimmed.as_ref().map_or(0.0, |t| t.ekf_duration_s());
    match &trimmed {
        None => reasons.push(RejectReason::NoTakeoff),
        Some(_) if retained_s < cfg.min_duration_s => reasons.push(RejectReason::TooShort),
        Some(_) => {}
    }
    let accepted = reasons.is_empty();
    CleanupVerdict {
        log_id: log.log_id.clone(),
        accepted,
        reasons,
        validation,
        retained_s,
        trimmed: if accepted { trimmed } else { None },
    }
}
