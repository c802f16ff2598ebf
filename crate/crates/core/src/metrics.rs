//! Path reconstruction from increments and the per-flight drift metrics.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::deadreckon::{dead_reckon, DeadReckonConfig};
use crate::error::{Error, Result};
use crate::log::FlightLog;
use crate::preprocess::{UnifiedSeries, LABELS};

pub type Vec3 = [f64; 3];

fn dist(a: &Vec3, b: &Vec3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
}

/// Cumulative sum of `[ΔP, ΔV]` increments from an initial position and
/// velocity; returns `k + 1` positions and velocities.
pub fn reconstruct_path(increments: &[[f64; LABELS]], init_pos: Vec3, init_vel: Vec3) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut pos = Vec::with_capacity(increments.len() + 1);
    let mut vel = Vec::with_capacity(increments.len() + 1);
    let (mut p, mut v) = (init_pos, init_vel);
    pos.push(p);
    vel.push(v);
    for d in increments {
        for k in 0..3 {
            p[k] += d[k];
            v[k] += d[3 + k];
        }
        pos.push(p);
        vel.push(v);
    }
    (pos, vel)
}

fn max_distance(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| dist(x, y)).fold(0.0, f64::max))
}

/// Maximum 3D position error.
pub fn compute_mpe(pred_pos: &[Vec3], true_pos: &[Vec3]) -> Result<f64> {
    max_distance(pred_pos, true_pos)
}

/// Maximum 3D velocity error.
pub fn compute_mve(pred_vel: &[Vec3], true_vel: &[Vec3]) -> Result<f64> {
    max_distance(pred_vel, true_vel)
}

/// MPE per minute of flight.
pub fn compute_tn_mpe(mpe_m: f64, duration_min: f64) -> Result<f64> {
    if !(duration_min > 0.0) {
        return Err(Error::Config("flight duration must be > 0".into()));
    }
    Ok(mpe_m / duration_min)
}

pub fn velocity_from_position_diffs(pos_increments: &[Vec3], dt: f64) -> Result<Vec<Vec3>> {
    if !(dt > 0.0) {
        return Err(Error::Config("dt must be > 0".into()));
    }
    Ok(pos_increments.iter().map(|d| d.map(|x| x / dt)).collect())
}

/// Same metrics for a competing estimate over the same span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub mpe_m: f64,
    pub tn_mpe_m_per_min: f64,
    pub mve_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightMetrics {
    pub log_id: String,
    pub mpe_m: f64,
    pub tn_mpe_m_per_min: f64,
    pub mve_mps: f64,
    pub duration_min: f64,
    pub distance_m: f64,
    /// Position error at every compared step.
    pub pos_error_m: Vec<f64>,
    pub first_prediction_t_us: i64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline: Option<BaselineMetrics>,
}

/// True and estimated states over the compared span.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub t_us: Vec<i64>,
    pub true_pos: Vec<Vec3>,
    pub pred_pos: Vec<Vec3>,
    pub true_vel: Vec<Vec3>,
    pub pred_vel: Vec<Vec3>,
}

/// Scores increments predicted for label rows `window - 1 ..` of `series`.
///
/// The path is rebuilt from the true state at EKF index `window - 1` and
/// compared with the EKF states up to the end of the flight. `duration_min`
/// is the flight length used for the time normalisation.
pub fn evaluate_predictions(
    log_id: &str,
    series: &UnifiedSeries,
    predictions: &[[f64; LABELS]],
    window: usize,
    duration_min: f64,
) -> Result<(FlightMetrics, PathRecord)> {
    let rows = series.rows();
    if window == 0 || rows < window {
        return Err(Error::TooShort { needed: window.max(1), got: rows });
    }
    let expected = rows - window + 1;
    if predictions.len() != expected {
        return Err(Error::LengthMismatch { left: predictions.len(), right: expected });
    }
    let start = window - 1;
    let truth = true_states(series);
    let (true_pos, true_vel): (Vec<Vec3>, Vec<Vec3>) = truth[start..].iter().cloned().unzip();
    let (pred_pos, pred_vel) = reconstruct_path(predictions, true_pos[0], true_vel[0]);
    let pos_error_m: Vec<f64> = pred_pos.iter().zip(&true_pos).map(|(a, b)| dist(a, b)).collect();
    let mpe = pos_error_m.iter().cloned().fold(0.0, f64::max);
    let mve = compute_mve(&pred_vel, &true_vel)?;
    let distance_m = truth.windows(2).map(|w| dist(&w[0].0, &w[1].0)).sum();
    let metrics = FlightMetrics {
        log_id: log_id.into(),
        mpe_m: mpe,
        tn_mpe_m_per_min: compute_tn_mpe(mpe, duration_min)?,
        mve_mps: mve,
        duration_min,
        distance_m,
        pos_error_m,
        first_prediction_t_us: series.t_us[start],
        baseline: None,
    };
    let record = PathRecord { t_us: series.t_us[start..].to_vec(), true_pos, pred_pos, true_vel, pred_vel };
    Ok((metrics, record))
}

/// Absolute EKF position and velocity at every EKF timestamp, rebuilt from
/// the initial state and the label increments.
pub fn true_states(series: &UnifiedSeries) -> Vec<(Vec3, Vec3)> {
    let (p, v) = reconstruct_path(&series.labels, series.init_state.pos_ned, series.init_state.vel_ned);
    p.into_iter().zip(v).collect()
}

/// Strapdown dead reckoning started from the EKF state at `start_us`, scored
/// against the EKF over the rest of the flight.
pub fn dead_reckon_baseline(
    log: &FlightLog,
    start_us: i64,
    cfg: &DeadReckonConfig,
    duration_min: f64,
) -> Result<(BaselineMetrics, Vec<Vec3>, Vec<Vec3>)> {
    let end_us = log.ekf.last().map(|e| e.t_us).ok_or(Error::TooShort { needed: 1, got: 0 })?;
    let cropped = log.crop(start_us, end_us);
    let states = dead_reckon(&cropped, cfg)?.at_ekf;
    let pred_pos: Vec<Vec3> = states.iter().map(|s| s.pos_ned).collect();
    let pred_vel: Vec<Vec3> = states.iter().map(|s| s.vel_ned).collect();
    let true_pos: Vec<Vec3> = cropped.ekf.iter().map(|e| e.pos_ned).collect();
    let true_vel: Vec<Vec3> = cropped.ekf.iter().map(|e| e.vel_ned).collect();
    let mpe = compute_mpe(&pred_pos, &true_pos)?;
    let metrics = BaselineMetrics {
        mpe_m: mpe,
        tn_mpe_m_per_min: compute_tn_mpe(mpe, duration_min)?,
        mve_mps: compute_mve(&pred_vel, &true_vel)?,
    };
    Ok((metrics, pred_pos, pred_vel))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Lower middle element for even counts.
    pub median: f64,
    pub best: f64,
    pub worst: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Stats> {
        if values.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Stats {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: sorted[(sorted.len() - 1) / 2],
            best: sorted[0],
            worst: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub flights: usize,
    pub mpe_m: Stats,
    pub tn_mpe_m_per_min: Stats,
    pub mve_mps: Stats,
    pub duration_min: Stats,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline_mpe_m: Option<Stats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline_tn_mpe_m_per_min: Option<Stats>,
}

pub fn aggregate_metrics(flights: &[FlightMetrics]) -> Result<MetricsSummary> {
    let col = |f: fn(&FlightMetrics) -> f64| -> Vec<f64> { flights.iter().map(f).collect() };
    let baseline = |f: fn(&BaselineMetrics) -> f64| -> Option<Stats> {
        let v: Option<Vec<f64>> = flights.iter().map(|m| m.baseline.as_ref().map(f)).collect();
        v.and_then(|v| Stats::of(&v).ok())
    };
    Ok(MetricsSummary {
        flights: flights.len(),
        mpe_m: Stats::of(&col(|m| m.mpe_m))?,
        tn_mpe_m_per_min: Stats::of(&col(|m| m.tn_mpe_m_per_min))?,
        mve_mps: Stats::of(&col(|m| m.mve_mps))?,
        duration_min: Stats::of(&col(|m| m.duration_min))?,
        baseline_mpe_m: baseline(|b| b.mpe_m),
        baseline_tn_mpe_m_per_min: baseline(|b| b.tn_mpe_m_per_min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{difference_rows, unify_rates};
    use crate::synth::{generate_flight, NoiseConfig, Profile, SynthConfig};
    use alloc::vec;

    #[test]
    fn reconstruction_oracles() {
        let (p, v) = reconstruct_path(&[[0.0; 6]; 4], [1.0, 2.0, 3.0], [0.5, 0.0, 0.0]);
        assert!(p.iter().all(|x| *x == [1.0, 2.0, 3.0]));
        assert!(v.iter().all(|x| *x == [0.5, 0.0, 0.0]));
        let unit = vec![[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]; 7];
        let (p, _) = reconstruct_path(&unit, [2.0, 0.0, 0.0], [0.0; 3]);
        assert_eq!(p.len(), 8);
        assert_eq!(p[7][0], 9.0);
    }

    #[test]
    fn single_corrupted_increment_is_a_constant_offset() {
        let incs: Vec<[f64; 6]> = (0..50).map(|i| [0.25 * i as f64, -0.5, 0.125, 0.0, 0.0, 0.0]).collect();
        let mut bad = incs.clone();
        bad[20][1] += 5.0;
        let (a, _) = reconstruct_path(&incs, [0.0; 3], [0.0; 3]);
        let (b, _) = reconstruct_path(&bad, [0.0; 3], [0.0; 3]);
        for i in 0..a.len() {
            let e = b[i][1] - a[i][1];
            assert_eq!(e, if i > 20 { 5.0 } else { 0.0 });
        }
    }

    #[test]
    fn difference_then_reconstruct_is_identity() {
        let states: Vec<[f64; 6]> = (0..20).map(|i| [i as f64, 2.0 * i as f64, -1.0, 0.5, 0.25, 0.0]).collect();
        let d = difference_rows(&states).unwrap();
        let p0 = [states[0][0], states[0][1], states[0][2]];
        let v0 = [states[0][3], states[0][4], states[0][5]];
        let (p, v) = reconstruct_path(&d, p0, v0);
        for i in 0..states.len() {
            assert_eq!(p[i], [states[i][0], states[i][1], states[i][2]]);
            assert_eq!(v[i], [states[i][3], states[i][4], states[i][5]]);
        }
    }

    #[test]
    fn metric_oracles() {
        let a = vec![[0.0; 3]; 5];
        let b = vec![[3.0, 4.0, 0.0]; 5];
        assert_eq!(compute_mpe(&a, &a).unwrap(), 0.0);
        assert_eq!(compute_mpe(&a, &b).unwrap(), 5.0);
        assert_eq!(compute_mve(&a, &[[0.6, 0.8, 0.0]; 5]).unwrap(), 1.0);
        assert!(compute_mpe(&a, &b[..4]).is_err());
        assert!((compute_tn_mpe(103.72, 0.73).unwrap() - 142.08).abs() < 0.01);
        assert_eq!(compute_tn_mpe(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(compute_tn_mpe(60.0, 5.0).unwrap(), 12.0);
        assert!(compute_tn_mpe(1.0, 0.0).is_err());
        let v = velocity_from_position_diffs(&[[1.0, 0.0, 0.0], [0.0; 3], [0.2, -0.4, 0.1]], 0.2).unwrap();
        assert_eq!(v[0], [5.0, 0.0, 0.0]);
        assert_eq!(v[1], [0.0; 3]);
        for (x, y) in v[2].iter().zip([1.0, -2.0, 0.5]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mpe_is_invariant_under_shared_rigid_motion() {
        let a: Vec<Vec3> = (0..30).map(|i| [i as f64, (i * i) as f64 * 0.1, 1.0]).collect();
        let b: Vec<Vec3> = (0..30).map(|i| [i as f64 + 0.3, (i * i) as f64 * 0.1 - 0.2, 1.5]).collect();
        let base = compute_mpe(&a, &b).unwrap();
        let (s, c) = (0.6f64, 0.8f64);
        let move_pt = |p: &Vec3| [c * p[0] - s * p[1] + 10.0, s * p[0] + c * p[1] - 4.0, p[2] + 2.0];
        let a2: Vec<Vec3> = a.iter().map(move_pt).collect();
        let b2: Vec<Vec3> = b.iter().map(move_pt).collect();
        assert!((compute_mpe(&a2, &b2).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn aggregate_uses_lower_median() {
        let mk = |mpe: f64| FlightMetrics {
            log_id: "x".into(),
            mpe_m: mpe,
            tn_mpe_m_per_min: mpe,
            mve_mps: 1.0,
            duration_min: 1.0,
            distance_m: 0.0,
            pos_error_m: vec![],
            first_prediction_t_us: 0,
            baseline: None,
        };
        let s = aggregate_metrics(&[mk(1.0), mk(2.0), mk(3.0), mk(100.0)]).unwrap();
        assert_eq!(s.mpe_m.median, 2.0);
        assert_eq!(s.mpe_m.mean, 26.5);
        assert_eq!((s.mpe_m.best, s.mpe_m.worst), (1.0, 100.0));
        let one = aggregate_metrics(&[mk(7.0)]).unwrap();
        assert_eq!(one.mpe_m, Stats { mean: 7.0, median: 7.0, best: 7.0, worst: 7.0 });
        assert!(aggregate_metrics(&[]).is_err());
    }

    #[test]
    fn ground_truth_predictions_score_zero() {
        let log = generate_flight(&SynthConfig { noise: NoiseConfig::zero(), ..SynthConfig::new(Profile::Circle, 40.0, 3) }).unwrap();
        let series = unify_rates(&log).unwrap();
        let w = 10;
        let preds: Vec<[f64; 6]> = series.labels[w - 1..].to_vec();
        let (m, rec) = evaluate_predictions("c", &series, &preds, w, 1.0).unwrap();
        assert!(m.mpe_m < 1e-9 && m.mve_mps < 1e-9, "{} {}", m.mpe_m, m.mve_mps);
        assert_eq!(rec.t_us.len(), preds.len() + 1);
        assert_eq!(rec.t_us[0], series.t_us[w - 1]);
        assert!(evaluate_predictions("c", &series, &preds[1..], w, 1.0).is_err());
        let (b, _, _) = dead_reckon_baseline(&log, series.t_us[w - 1], &DeadReckonConfig::default(), 1.0).unwrap();
        assert!(b.mpe_m < 0.1, "{}", b.mpe_m);
    }
}
