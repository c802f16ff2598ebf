//! Preprocessing from raw flight logs to training windows.

mod split;
mod trim;
mod unify;
mod window;

use alloc::vec::Vec;
use core::ops::Sub;

use crate::error::{Error, Result};

pub use split::{split_dataset, DatasetManifest, ManifestEntry};
pub use trim::{detect_corrupted, detect_corrupted_with, trim_ground_time, CleanupConfig, CleanupVerdict, RejectReason};
pub use unify::{unify_rates, BinSums, FeatureAssembler, UnifiedSeries, UnifyReport};
pub use window::{make_windows, Normalization, WindowedDataset};

/// Feature columns: gx, gy, gz, ax, ay, az, temp_c, Δalt_m, mx, my, mz.
pub const FEATURES: usize = 11;
/// Label columns: ΔP_N, ΔP_E, ΔP_D, ΔV_N, ΔV_E, ΔV_D.
pub const LABELS: usize = 6;

pub const FEATURE_NAMES: [&str; FEATURES] =
    ["gx", "gy", "gz", "ax", "ay", "az", "temp_c", "dalt_m", "mx", "my", "mz"];
pub const LABEL_NAMES: [&str; LABELS] = ["dpn", "dpe", "dpd", "dvn", "dve", "dvd"];

/// `out[i] = x[i + 1] - x[i]`.
pub fn difference<T>(series: &[T]) -> Result<Vec<T>>
where
    T: Copy + Sub<Output = T>,
{
    if series.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: series.len() });
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Row-wise differencing of fixed-width vectors.
pub fn difference_rows<const K: usize>(series: &[[f64; K]]) -> Result<Vec<[f64; K]>> {
    if series.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: series.len() });
    }
    Ok(series
        .windows(2)
        .map(|w| core::array::from_fn(|k| w[1][k] - w[0][k]))
        .collect())
}

/// Per-signal loss weights: `1 / max(mean |label_i|, eps)` over the given
/// (training) label rows.
pub fn compute_signal_weights(labels: &[[f64; LABELS]], eps: f64) -> Result<[f64; LABELS]> {
    if labels.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let mut sums = [0.0; LABELS];
    for row in labels {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += libm::fabs(*v);
        }
    }
    let n = labels.len() as f64;
    Ok(sums.map(|s| 1.0 / (s / n).max(eps)))
}
