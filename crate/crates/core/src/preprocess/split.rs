use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub duration_s: f64,
    pub profile: String,
}

/// Listing of the flight logs that make up a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub logs: Vec<ManifestEntry>,
}

/// Whole-flight train/validation split; `round(n · val_fraction)` flights
/// (at least one, at most `n - 1`) go to validation. Both halves keep the
/// manifest order.
pub fn split_dataset(
    manifest: &DatasetManifest,
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config("val_fraction must lie in (0, 1)".into()));
    }
    let n = manifest.logs.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let n_val = (libm::round(n as f64 * val_fraction) as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = alloc::vec![false; n];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (entry, v) in manifest.logs.iter().zip(is_val) {
        if v {
            val.push(entry.clone());
        } else {
            train.push(entry.clone());
        }
    }
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn manifest(n: usize) -> DatasetManifest {
        DatasetManifest {
            logs: (0..n)
                .map(|i| ManifestEntry {
                    id: format!("log{i}"),
                    path: format!("logs/log{i}"),
                    duration_s: 60.0,
                    profile: "circle".into(),
                })
                .collect(),
        }
    }

    #[test]
    fn reference_corpus_split_sizes() {
        let (train, val) = split_dataset(&manifest(548), 0.151, 1).unwrap();
        assert_eq!((train.len(), val.len()), (465, 83));
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let m = manifest(40);
        let a = split_dataset(&m, 0.25, 9).unwrap();
        assert_eq!(a, split_dataset(&m, 0.25, 9).unwrap());
        let mut ids: Vec<&str> = a.0.iter().chain(&a.1).map(|e| e.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 40);
        assert!(a.0.iter().all(|t| !a.1.contains(t)));
        assert_ne!(a.1, split_dataset(&m, 0.25, 10).unwrap().1);
    }

    #[test]
    fn bad_arguments() {
        assert!(split_dataset(&manifest(10), 0.0, 1).is_err());
        assert!(split_dataset(&manifest(10), 1.0, 1).is_err());
        assert!(split_dataset(&manifest(1), 0.5, 1).is_err());
        let (t, v) = split_dataset(&manifest(2), 0.01, 1).unwrap();
        assert_eq!((t.len(), v.len()), (1, 1));
    }
}
