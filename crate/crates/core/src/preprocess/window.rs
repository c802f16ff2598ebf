use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{UnifiedSeries, FEATURES, LABELS};
use crate::error::{Error, Result};

/// Per-feature z-score statistics, frozen from the training corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f32; FEATURES],
    pub std: [f32; FEATURES],
}

impl Normalization {
    pub fn identity() -> Normalization {
        Normalization {
            mean: [0.0; FEATURES],
            std: [1.0; FEATURES],
        }
    }

    /// Population mean and standard deviation of every feature over all rows
    /// of the given series. Constant features get unit scale.
    pub fn fit<'a, I>(series: I) -> Result<Normalization>
    where
        I: IntoIterator<Item = &'a UnifiedSeries>,
    {
        let mut n = 0usize;
        let mut sum = [0.0f64; FEATURES];
        let mut sq = [0.0f64; FEATURES];
        let all: Vec<&UnifiedSeries> = series.into_iter().collect();
        for s in &all {
            for row in &s.features {
                for k in 0..FEATURES {
                    sum[k] += row[k];
                }
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let mean = sum.map(|s| s / n as f64);
        for s in &all {
            for row in &s.features {
                for k in 0..FEATURES {
                    let d = row[k] - mean[k];
                    sq[k] += d * d;
                }
            }
        }
        let std: [f64; FEATURES] = core::array::from_fn(|k| {
            let v = libm::sqrt(sq[k] / n as f64);
            if v > 1e-9 {
                v
            } else {
                1.0
            }
        });
        Ok(Normalization {
            mean: mean.map(|m| m as f32),
            std: std.map(|s| s as f32),
        })
    }

    pub fn is_valid(&self) -> bool {
        self.mean.iter().all(|m| m.is_finite()) && self.std.iter().all(|s| s.is_finite() && *s > 0.0)
    }

    /// Normalises one raw feature row; the single code path used by training,
    /// offline evaluation and streaming inference.
    pub fn apply(&self, row: &[f64; FEATURES]) -> [f32; FEATURES] {
        core::array::from_fn(|k| ((row[k] - self.mean[k] as f64) / self.std[k] as f64) as f32)
    }
}

/// Fixed-length feature windows with per-window increment labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// `[count × window × FEATURES]`, row-major, already normalised by `normalization`.
    pub windows: Vec<f32>,
    /// `[count × LABELS]`.
    pub labels: Vec<f32>,
    pub weights: [f32; LABELS],
    pub window: usize,
    pub stride: usize,
    pub normalization: Normalization,
    /// Index into `sources` of the flight each window came from.
    pub source_of: Vec<u32>,
    pub sources: Vec<String>,
}

impl WindowedDataset {
    pub fn empty(window: usize, stride: usize) -> WindowedDataset {
        WindowedDataset {
            windows: Vec::new(),
            labels: Vec::new(),
            weights: [1.0; LABELS],
            window,
            stride,
            normalization: Normalization::identity(),
            source_of: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len() / LABELS
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window_slice(&self, i: usize) -> &[f32] {
        let size = self.window * FEATURES;
        &self.windows[i * size..(i + 1) * size]
    }

    pub fn label(&self, i: usize) -> &[f32] {
        &self.labels[i * LABELS..(i + 1) * LABELS]
    }

    /// Checks the internal size relations.
    pub fn check(&self) -> Result<()> {
        let m = self.len();
        if self.labels.len() != m * LABELS || self.windows.len() != m * self.window * FEATURES {
            return Err(Error::Shape("window/label buffer sizes disagree".into()));
        }
        if self.source_of.len() != m {
            return Err(Error::Shape("source index length disagrees with window count".into()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Validation("loss weights must be > 0".into()));
        }
        Ok(())
    }

    /// Appends another dataset built with the same window length and stride.
    pub fn extend(&mut self, other: &WindowedDataset) -> Result<()> {
        if other.window != self.window || other.stride != self.stride {
            return Err(Error::Shape("cannot concatenate datasets with different window/stride".into()));
        }
        let offset = self.sources.len() as u32;
        self.windows.extend_from_slice(&other.windows);
        self.labels.extend_from_slice(&other.labels);
        self.source_of.extend(other.source_of.iter().map(|s| s + offset));
        self.sources.extend(other.sources.iter().cloned());
        Ok(())
    }

    pub fn with_weights(mut self, weights: [f64; LABELS]) -> WindowedDataset {
        self.weights = weights.map(|w| w as f32);
        self
    }
}

/// Number of windows produced from `rows` unified rows.
pub fn window_count(rows: usize, window: usize, stride: usize) -> usize {
    if window == 0 || stride == 0 || rows < window {
        0
    } else {
        (rows - window) / stride + 1
    }
}

/// Slides a `window`-row window over the series every `stride` rows. Window
/// `j` covers feature rows `[j·stride, j·stride + window)` and is labelled
/// with the increment of its final row.
pub fn make_windows(
    series: &UnifiedSeries,
    source: &str,
    window: usize,
    stride: usize,
    norm: &Normalization,
) -> Result<WindowedDataset> {
    if window == 0 || stride == 0 {
        return Err(Error::Config("window and stride must be >= 1".into()));
    }
    let rows = series.rows();
    if rows < window {
        return Err(Error::TooShort { needed: window, got: rows });
    }
    let m = window_count(rows, window, stride);
    let normalized: Vec<[f32; FEATURES]> = series.features.iter().map(|r| norm.apply(r)).collect();
    let mut windows = Vec::with_capacity(m * window * FEATURES);
    let mut labels = Vec::with_capacity(m * LABELS);
    for j in 0..m {
        let start = j * stride;
        for row in &normalized[start..start + window] {
            windows.extend_from_slice(row);
        }
        labels.extend(series.labels[start + window - 1].iter().map(|v| *v as f32));
    }
    let sources = alloc::vec![String::from(source)];
    Ok(WindowedDataset {
        windows,
        labels,
        weights: [1.0; LABELS],
        window,
        stride,
        normalization: *norm,
        source_of: alloc::vec![0; m],
        sources,
    })
}
