//! Per-flight evaluation of a trained model and its CSV/JSON outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use navnet_core::deadreckon::DeadReckonConfig;
use navnet_core::log::FlightLog;
use navnet_core::metrics::{dead_reckon_baseline, evaluate_predictions, FlightMetrics, MetricsSummary, PathRecord, Stats, Vec3};
use navnet_core::model::Model;
use navnet_core::preprocess::{detect_corrupted_with, unify_rates, CleanupConfig, LABELS};
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::logio::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub cleanup: CleanupConfig,
    /// Also score strapdown dead reckoning over the same span.
    pub baseline: bool,
    pub dead_reckon: DeadReckonConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightEvaluation {
    pub metrics: FlightMetrics,
    pub path: PathRecord,
    pub baseline_path: Option<(Vec<Vec3>, Vec<Vec3>)>,
}

fn to_f64_rows(preds: &[Vec<f32>]) -> Result<Vec<[f64; LABELS]>> {
    preds
        .iter()
        .map(|p| {
            if p.len() != LABELS {
                return Err(NavError::Config(format!("model predicts {} signals, evaluation needs {LABELS}", p.len())));
            }
            Ok(std::array::from_fn(|k| p[k] as f64))
        })
        .collect()
}

/// Trims and checks the flight, predicts every increment from the first
/// full window on, and scores the rebuilt path against the EKF.
pub fn evaluate_flight(model: &Model, log: &FlightLog, opts: &EvalOptions) -> Result<FlightEvaluation> {
    let verdict = detect_corrupted_with(log, &opts.cleanup);
    let trimmed = match verdict.trimmed {
        Some(t) if verdict.accepted => t,
        _ => {
            return Err(NavError::Core(navnet_core::Error::Validation(format!(
                "log {} rejected by cleanup: {:?}",
                log.log_id, verdict.reasons
            ))))
        }
    };
    let series = unify_rates(&trimmed)?;
    let preds = to_f64_rows(&model.predict_series(&series)?)?;
    let duration_min = trimmed.ekf_duration_s() / 60.0;
    let (mut metrics, path) = evaluate_predictions(&log.log_id, &series, &preds, model.window, duration_min)?;
    let mut baseline_path = None;
    if opts.baseline {
        let (b, pos, vel) = dead_reckon_baseline(&trimmed, metrics.first_prediction_t_us, &opts.dead_reckon, duration_min)?;
        metrics.baseline = Some(b);
        baseline_path = Some((pos, vel));
    }
    Ok(FlightEvaluation { metrics, path, baseline_path })
}

pub fn write_path_compare(path: &Path, eval: &FlightEvaluation) -> Result<()> {
    let file = File::create(path).map_err(|e| NavError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let rec = &eval.path;
    let mut emit = || -> std::io::Result<()> {
        write!(w, "t_us,true_pn,true_pe,true_pd,pred_pn,pred_pe,pred_pd,true_vn,true_ve,true_vd,pred_vn,pred_ve,pred_vd")?;
        if eval.baseline_path.is_some() {
            write!(w, ",dr_pn,dr_pe,dr_pd")?;
        }
        writeln!(w)?;
        for i in 0..rec.t_us.len() {
            write!(w, "{}", rec.t_us[i])?;
            for v in [&rec.true_pos[i], &rec.pred_pos[i], &rec.true_vel[i], &rec.pred_vel[i]] {
                for x in v {
                    write!(w, ",{}", fmt_f64(*x))?;
                }
            }
            if let Some((pos, _)) = &eval.baseline_path {
                for x in &pos[i] {
                    write!(w, ",{}", fmt_f64(*x))?;
                }
            }
            writeln!(w)?;
        }
        w.flush()
    };
    emit().map_err(|e| NavError::io(path, e))
}

/// One row per flight, then mean/median/best/worst rows.
pub fn write_summary_csv(path: &Path, flights: &[FlightMetrics], summary: &MetricsSummary) -> Result<()> {
    let baseline = summary.baseline_mpe_m.is_some();
    let mut out = String::from("row,duration_min,distance_m,nn_mpe_m,nn_tn_mpe_m_per_min,nn_mve_mps");
    if baseline {
        out.push_str(",dr_mpe_m,dr_tn_mpe_m_per_min");
    }
    out.push('\n');
    for f in flights {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            f.log_id,
            fmt_f64(f.duration_min),
            fmt_f64(f.distance_m),
            fmt_f64(f.mpe_m),
            fmt_f64(f.tn_mpe_m_per_min),
            fmt_f64(f.mve_mps)
        ));
        if let Some(b) = &f.baseline {
            out.push_str(&format!(",{},{}", fmt_f64(b.mpe_m), fmt_f64(b.tn_mpe_m_per_min)));
        }
        out.push('\n');
    }
    let pick: [(&str, fn(&Stats) -> f64); 4] =
        [("mean", |s| s.mean), ("median", |s| s.median), ("best", |s| s.best), ("worst", |s| s.worst)];
    for (name, f) in pick {
        out.push_str(&format!(
            "{name},{},,{},{},{}",
            fmt_f64(f(&summary.duration_min)),
            fmt_f64(f(&summary.mpe_m)),
            fmt_f64(f(&summary.tn_mpe_m_per_min)),
            fmt_f64(f(&summary.mve_mps))
        ));
        if let (Some(m), Some(t)) = (&summary.baseline_mpe_m, &summary.baseline_tn_mpe_m_per_min) {
            out.push_str(&format!(",{},{}", fmt_f64(f(m)), fmt_f64(f(t))));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| NavError::io(path, e))
}
