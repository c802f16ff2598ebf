//! The pipeline stages behind each subcommand. Every stage reads its inputs
//! from and writes its artifacts under the run's output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use navnet_core::log::FlightLog;
use navnet_core::metrics::{aggregate_metrics, FlightMetrics, MetricsSummary};
use navnet_core::model::Model;
use navnet_core::preprocess::{
    compute_signal_weights, detect_corrupted_with, make_windows, split_dataset, unify_rates, CleanupVerdict,
    DatasetManifest, ManifestEntry, Normalization, UnifiedSeries, WindowedDataset, FEATURES, LABELS,
};
use navnet_core::rnn::{init_params, NetworkParams, Real};
use navnet_core::train::{fit_with, transfer_fit, FitOutcome, Precision, TrainObserver, TrainReport};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::{EvalSet, Run};
use crate::dataset::{make_dataset, read_manifest, read_windows, write_windows};
use crate::error::{NavError, Result};
use crate::eval::{evaluate_flight, write_path_compare, write_summary_csv, EvalOptions};
use crate::logio::read_flight_log;
use crate::parallel::{parallel_map, Threads};
use crate::stream::{compare_online_offline, write_online_csv};
use crate::{read_json, write_json};

/// Flights assigned to each half of the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub train: Vec<String>,
    pub val: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanupReport {
    pub accepted: usize,
    pub rejected: usize,
    pub flights: Vec<CleanupVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub checkpoint: String,
    pub flights: Vec<FlightMetrics>,
    pub summary: MetricsSummary,
}

pub fn cmd_synth(run: &Run) -> Result<DatasetManifest> {
    let cfgs = run.cfg.synth.flight_configs(run.cfg.seed)?;
    if cfgs.is_empty() {
        return Err(NavError::Config("synth plan describes no flights".into()));
    }
    let dir = run.dataset_dir();
    log::info!("generating {} flights into {}", cfgs.len(), dir.display());
    make_dataset(&cfgs, &dir, run.jobs)
}

fn load_manifest(run: &Run) -> Result<(PathBuf, DatasetManifest)> {
    let dir = run.dataset_dir();
    let manifest = read_manifest(&dir.join("dataset.json"))?;
    Ok((dir, manifest))
}

fn find_entry<'a>(manifest: &'a DatasetManifest, id: &str) -> Result<&'a ManifestEntry> {
    manifest
        .logs
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| NavError::Config(format!("flight `{id}` is not in the dataset manifest")))
}

fn windows_for(series: &[(String, UnifiedSeries)], window: usize, stride: usize, norm: &Normalization) -> Result<WindowedDataset> {
    let mut data = WindowedDataset::empty(window, stride);
    data.normalization = *norm;
    for (id, s) in series {
        if s.rows() < window {
            log::warn!("flight {id}: {} rows is shorter than one window, skipped", s.rows());
            continue;
        }
        data.extend(&make_windows(s, id, window, stride, norm)?)?;
    }
    Ok(data)
}

/// Cleans every flight, splits whole flights into train and validation,
/// fits normalization and loss weights on the training flights and writes
/// both windowed datasets.
pub fn cmd_preprocess(run: &Run) -> Result<(WindowedDataset, WindowedDataset)> {
    let p = &run.cfg.preprocess;
    let (dir, manifest) = load_manifest(run)?;
    let cleaned = parallel_map(run.jobs, &manifest.logs, |entry| -> Result<(CleanupVerdict, Option<UnifiedSeries>)> {
        let log = read_flight_log(&dir.join(&entry.path))?;
        let mut verdict = detect_corrupted_with(&log, &p.cleanup);
        let series = match verdict.trimmed.take() {
            Some(t) if verdict.accepted => Some(unify_rates(&t)?),
            _ => None,
        };
        Ok((verdict, series))
    });
    let mut verdicts = Vec::new();
    let mut accepted = DatasetManifest::default();
    let mut series = Vec::new();
    for (entry, r) in manifest.logs.iter().zip(cleaned) {
        let (verdict, s) = r?;
        if let Some(s) = s {
            accepted.logs.push(entry.clone());
            series.push((entry.id.clone(), s));
        } else {
            log::warn!("flight {} rejected: {:?}", entry.id, verdict.reasons);
        }
        verdicts.push(verdict);
    }
    let report = CleanupReport { accepted: series.len(), rejected: verdicts.len() - series.len(), flights: verdicts };
    let out = run.stage_dir("preprocess");
    write_json(&out.join("cleanup_report.json"), &report)?;

    let (train_ids, val_ids) = split_dataset(&accepted, p.val_fraction, run.cfg.seed)?;
    let pick = |ids: &[ManifestEntry]| -> Vec<(String, UnifiedSeries)> {
        series.iter().filter(|(id, _)| ids.iter().any(|e| &e.id == id)).cloned().collect()
    };
    let (train_series, val_series) = (pick(&train_ids), pick(&val_ids));

    let (norm, weights) = match &p.stats_from {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            let norm = ckpt.meta.normalization.ok_or_else(|| NavError::Config("stats checkpoint has no normalization".into()))?;
            (norm, ckpt.meta.weights.map(f64::from))
        }
        None => {
            let norm = Normalization::fit(train_series.iter().map(|(_, s)| s))?;
            let labels: Vec<[f64; LABELS]> = train_series.iter().flat_map(|(_, s)| s.labels.iter().copied()).collect();
            (norm, compute_signal_weights(&labels, p.weight_eps)?)
        }
    };
    let train = windows_for(&train_series, p.window, p.stride, &norm)?.with_weights(weights);
    let val = windows_for(&val_series, p.window, p.val_stride, &norm)?.with_weights(weights);
    if train.is_empty() || val.is_empty() {
        return Err(NavError::Core(navnet_core::Error::TooShort { needed: 1, got: 0 }));
    }
    write_windows(&train, &out.join("train").join("windows.bin"), Some(p.cleanup))?;
    write_windows(&val, &out.join("val").join("windows.bin"), Some(p.cleanup))?;
    let split = SplitRecord {
        train: train_ids.iter().map(|e| e.id.clone()).collect(),
        val: val_ids.iter().map(|e| e.id.clone()).collect(),
    };
    write_json(&out.join("split.json"), &split)?;
    log::info!("{} train windows from {} flights, {} val windows from {} flights", train.len(), split.train.len(), val.len(), split.val.len());
    Ok((train, val))
}

struct LogProgress {
    start: Instant,
}

impl TrainObserver for LogProgress {
    fn now_s(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn on_epoch(&self, epoch: usize, report: &TrainReport) {
        log::info!(
            "epoch {epoch}: train {:.6} val {:.6} lr {} ({:.1} s)",
            report.train_loss.last().copied().unwrap_or(f64::NAN),
            report.val_loss.last().copied().unwrap_or(f64::NAN),
            report.lr.last().copied().unwrap_or(f64::NAN),
            self.now_s()
        );
    }
}

fn train_as<T: Real>(run: &Run, train: &WindowedDataset, val: &WindowedDataset, source: Option<&Checkpoint>) -> Result<FitOutcome<f32>> {
    let cfg = &run.cfg;
    let runner = Threads::new(run.jobs);
    let observer = LogProgress { start: Instant::now() };
    let out = match source {
        Some(src) => {
            let params: NetworkParams<T> = src.params.cast();
            transfer_fit(&src.config, &params, train, val, &cfg.train, &runner, &observer)?
        }
        None => {
            let init = init_params::<T>(&cfg.network, cfg.seed)?;
            fit_with(&cfg.network, train, val, &cfg.train, init, &runner, &observer)?
        }
    };
    Ok(FitOutcome { params: out.params.cast(), final_params: out.final_params.cast(), report: out.report })
}

/// Trains from scratch, or warm-starts from `transfer_from`, and writes the
/// best and final checkpoints with the training history.
pub fn cmd_train(run: &Run, transfer_from: Option<&Path>) -> Result<TrainReport> {
    let cfg = &run.cfg;
    let pre = run.stage_dir("preprocess");
    let train = read_windows(&pre.join("train").join("windows.bin"))?;
    let val = read_windows(&pre.join("val").join("windows.bin"))?;
    if cfg.network.input_size != FEATURES || cfg.network.output_size != LABELS {
        return Err(NavError::Config(format!("network must map {FEATURES} features to {LABELS} labels")));
    }
    let source = match transfer_from.map(Path::to_path_buf).or_else(|| cfg.transfer_from.clone()) {
        Some(path) => {
            let ckpt = load_checkpoint(&path)?;
            if ckpt.config != cfg.network {
                return Err(NavError::Config(format!("transfer source {} has a different network shape", path.display())));
            }
            Some(ckpt)
        }
        None => None,
    };
    let out = match cfg.train.precision {
        Precision::F32 => train_as::<f32>(run, &train, &val, source.as_ref())?,
        Precision::F64 => train_as::<f64>(run, &train, &val, source.as_ref())?,
    };
    let dir = run.stage_dir("train");
    std::fs::create_dir_all(&dir).map_err(|e| NavError::io(&dir, e))?;
    for (name, params) in [("model_best.navc", &out.params), ("model_final.navc", &out.final_params)] {
        let model = Model::new(cfg.network, params.clone(), train.normalization, train.weights, train.window)?;
        save_checkpoint(&Checkpoint::from_model(&model, Some(out.report.clone()), train.stride), &dir.join(name))?;
    }
    write_json(&dir.join("train_report.json"), &out.report)?;
    Ok(out.report)
}

fn load_model(run: &Run, checkpoint: Option<&Path>) -> Result<Model> {
    let path = checkpoint.map_or_else(|| run.stage_dir("train").join("model_best.navc"), Path::to_path_buf);
    load_checkpoint(&path)?.into_model()
}

fn eval_ids(run: &Run) -> Result<Vec<String>> {
    let split: SplitRecord = read_json(&run.stage_dir("preprocess").join("split.json"))?;
    Ok(match run.cfg.eval_set {
        EvalSet::Train => split.train,
        EvalSet::Val => split.val,
        EvalSet::All => split.train.into_iter().chain(split.val).collect(),
    })
}

/// Scores the checkpoint on every flight of the configured split.
pub fn cmd_eval(run: &Run, checkpoint: Option<&Path>, baseline: bool) -> Result<MetricsFile> {
    let model = load_model(run, checkpoint)?;
    let (dir, manifest) = load_manifest(run)?;
    let ids = eval_ids(run)?;
    let opts = EvalOptions { baseline: baseline || run.cfg.eval.baseline, ..run.cfg.eval };
    let out = run.stage_dir("eval");
    let results = parallel_map(run.jobs, &ids, |id| -> Result<FlightMetrics> {
        let entry = find_entry(&manifest, id)?;
        let log: FlightLog = read_flight_log(&dir.join(&entry.path))?;
        let eval = evaluate_flight(&model, &log, &opts)?;
        let fdir = out.join("flights").join(id);
        write_json(&fdir.join("metrics.json"), &eval.metrics)?;
        write_path_compare(&fdir.join("path_compare.csv"), &eval)?;
        Ok(eval.metrics)
    });
    let flights = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = aggregate_metrics(&flights)?;
    write_summary_csv(&out.join("summary.csv"), &flights, &summary)?;
    let file = MetricsFile {
        checkpoint: checkpoint.map_or_else(|| "train/model_best.navc".into(), |p| p.display().to_string()),
        flights,
        summary,
    };
    write_json(&out.join("metrics.json"), &file)?;
    log::info!("median MPE {:.3} m over {} flights", file.summary.mpe_m.median, file.flights.len());
    Ok(file)
}

/// Replays one flight through the streaming harness and compares it with
/// offline inference.
pub fn cmd_stream(run: &Run, checkpoint: Option<&Path>, log_id: Option<&str>) -> Result<crate::stream::CompareReport> {
    let model = load_model(run, checkpoint)?;
    let (dir, manifest) = load_manifest(run)?;
    let id = match log_id.map(str::to_string).or_else(|| run.cfg.stream_log.clone()) {
        Some(id) => id,
        None => eval_ids(run)?
            .into_iter()
            .next()
            .ok_or_else(|| NavError::Config("no flight to stream".into()))?,
    };
    let log = read_flight_log(&dir.join(&find_entry(&manifest, &id)?.path))?;
    let (stream_run, report) = compare_online_offline(&model, &log, &run.cfg.stream)?;
    let out = run.stage_dir("stream");
    std::fs::create_dir_all(&out).map_err(|e| NavError::io(&out, e))?;
    write_online_csv(&out.join("online_predictions.csv"), &stream_run.predictions)?;
    write_json(&out.join("compare_report.json"), &report)?;
    log::info!(
        "{}: {} online predictions, max deviation {:e}, {} dropped",
        id,
        report.online_predictions,
        report.max_abs_deviation,
        report.dropped_samples
    );
    Ok(report)
}
