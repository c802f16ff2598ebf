//! Synthetic dataset generation and the binary windowed-dataset format.

use std::fs;
use std::path::Path;

use navnet_core::preprocess::{DatasetManifest, ManifestEntry, Normalization, WindowedDataset, FEATURES, LABELS};
use navnet_core::synth::{generate_flight, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::logio::write_flight_log;
use crate::parallel::parallel_map;

/// Generates one log directory per config under `out_dir/logs` and writes
/// `out_dir/dataset.json`.
pub fn make_dataset(cfgs: &[SynthConfig], out_dir: &Path, jobs: usize) -> Result<DatasetManifest> {
    fs::create_dir_all(out_dir).map_err(|e| NavError::io(out_dir, e))?;
    let entries = parallel_map(jobs, cfgs, |cfg| -> Result<ManifestEntry> {
        let log = generate_flight(cfg)?;
        let rel = format!("logs/{}", log.log_id);
        write_flight_log(&log, &out_dir.join(&rel))?;
        Ok(ManifestEntry {
            id: log.log_id.clone(),
            path: rel,
            duration_s: cfg.total_duration_s(),
            profile: cfg.profile.as_str().into(),
        })
    });
    let manifest = DatasetManifest { logs: entries.into_iter().collect::<Result<_>>()? };
    crate::write_json(&out_dir.join("dataset.json"), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    crate::read_json(path)
}

const WINDOWS_MAGIC: &[u8; 4] = b"NAVW";
const WINDOWS_VERSION: u32 = 1;

/// Provenance written next to `windows.bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowsSidecar {
    pub count: usize,
    pub window: usize,
    pub stride: usize,
    pub sources: Vec<String>,
    pub source_of: Vec<u32>,
    #[serde(default)]
    pub trim: Option<navnet_core::preprocess::CleanupConfig>,
}

fn push_f32s(buf: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Writes `<stem>.bin` and `<stem>.json` (e.g. `windows.bin`/`windows.json`).
pub fn write_windows(
    data: &WindowedDataset,
    bin_path: &Path,
    trim: Option<navnet_core::preprocess::CleanupConfig>,
) -> Result<()> {
    data.check()?;
    if let Some(dir) = bin_path.parent() {
        fs::create_dir_all(dir).map_err(|e| NavError::io(dir, e))?;
    }
    let m = data.len();
    let mut buf = Vec::with_capacity(24 + 4 * (data.windows.len() + data.labels.len() + LABELS + 2 * FEATURES));
    buf.extend_from_slice(WINDOWS_MAGIC);
    for v in [WINDOWS_VERSION, m as u32, data.window as u32, FEATURES as u32, LABELS as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    push_f32s(&mut buf, &data.windows);
    push_f32s(&mut buf, &data.labels);
    push_f32s(&mut buf, &data.weights);
    push_f32s(&mut buf, &data.normalization.mean);
    push_f32s(&mut buf, &data.normalization.std);
    fs::write(bin_path, buf).map_err(|e| NavError::io(bin_path, e))?;
    let sidecar = WindowsSidecar {
        count: m,
        window: data.window,
        stride: data.stride,
        sources: data.sources.clone(),
        source_of: data.source_of.clone(),
        trim,
    };
    crate::write_json(&bin_path.with_extension("json"), &sidecar)
}

pub(crate) struct LeReader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl LeReader<'_> {
    pub fn take(&mut self, n: usize) -> Option<&[u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f32s(&mut self, n: usize) -> Option<Vec<f32>> {
        let raw = self.take(n.checked_mul(4)?)?;
        Some(raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
    }
}

pub fn read_windows(bin_path: &Path) -> Result<WindowedDataset> {
    let bytes = fs::read(bin_path).map_err(|e| NavError::io(bin_path, e))?;
    let bad = |msg: &str| NavError::format(bin_path, msg.to_string());
    let mut r = LeReader { bytes: &bytes, pos: 0 };
    if r.take(4) != Some(WINDOWS_MAGIC) {
        return Err(bad("not a windows file (bad magic)"));
    }
    let version = r.u32().ok_or_else(|| bad("truncated header"))?;
    if version != WINDOWS_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let mut head = [0usize; 4];
    for h in &mut head {
        *h = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
    }
    let [m, w, feat, lab] = head;
    if feat != FEATURES || lab != LABELS {
        return Err(bad(&format!("expected {FEATURES} features and {LABELS} labels, found {feat} and {lab}")));
    }
    let truncated = || bad("truncated data");
    let windows = r.f32s(m * w * FEATURES).ok_or_else(truncated)?;
    let labels = r.f32s(m * LABELS).ok_or_else(truncated)?;
    let weights = r.f32s(LABELS).ok_or_else(truncated)?;
    let mean = r.f32s(FEATURES).ok_or_else(truncated)?;
    let std = r.f32s(FEATURES).ok_or_else(truncated)?;
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes after data"));
    }
    let sidecar: WindowsSidecar = crate::read_json(&bin_path.with_extension("json"))?;
    if sidecar.count != m || sidecar.window != w || sidecar.source_of.len() != m {
        return Err(NavError::format(bin_path.with_extension("json"), "sidecar disagrees with binary header"));
    }
    let data = WindowedDataset {
        windows,
        labels,
        weights: weights.try_into().map_err(|_| truncated())?,
        window: w,
        stride: sidecar.stride,
        normalization: Normalization {
            mean: mean.try_into().map_err(|_| truncated())?,
            std: std.try_into().map_err(|_| truncated())?,
        },
        source_of: sidecar.source_of,
        sources: sidecar.sources,
    };
    data.check()?;
    Ok(data)
}
