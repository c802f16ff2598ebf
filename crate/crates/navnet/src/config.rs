//! Experiment configuration: one JSON file describes every stage.

use std::path::{Path, PathBuf};

use navnet_core::preprocess::CleanupConfig;
use navnet_core::rnn::NetworkConfig;
use navnet_core::synth::{NoiseConfig, Profile, SynthConfig};
use navnet_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::eval::EvalOptions;
use crate::stream::StreamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Zero,
    LowCost,
    /// Low-cost white noise with biases redrawn per flight.
    LowCostRandomBias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightGroup {
    pub profile: Profile,
    pub count: usize,
    pub duration_s: f64,
    pub ground_time_s: f64,
    pub ground_ekf_drift_mps: f64,
    pub noise: NoiseKind,
    /// Multiplies every noise and bias term.
    pub noise_scale: f64,
    pub rotor_drag: Option<f64>,
}

impl Default for FlightGroup {
    fn default() -> Self {
        FlightGroup {
            profile: Profile::Circle,
            count: 1,
            duration_s: 180.0,
            ground_time_s: 10.0,
            ground_ekf_drift_mps: 0.0,
            noise: NoiseKind::LowCostRandomBias,
            noise_scale: 1.0,
            rotor_drag: None,
        }
    }
}

fn scaled(n: NoiseConfig, k: f64) -> NoiseConfig {
    NoiseConfig {
        gyro_std: n.gyro_std * k,
        accel_std: n.accel_std * k,
        gyro_bias: n.gyro_bias.map(|b| b * k),
        accel_bias: n.accel_bias.map(|b| b * k),
        baro_std: n.baro_std * k,
        mag_std: n.mag_std * k,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthPlan {
    pub groups: Vec<FlightGroup>,
}

impl SynthPlan {
    /// One config per flight. Flight `i` overall gets seed `seed · 1_000_003 + i`
    /// and id `f<i>_<profile>`.
    pub fn flight_configs(&self, seed: u64) -> Result<Vec<SynthConfig>> {
        let mut out = Vec::new();
        for g in &self.groups {
            if !(g.noise_scale >= 0.0 && g.noise_scale.is_finite()) {
                return Err(NavError::Config("noise_scale must be finite and >= 0".into()));
            }
            for _ in 0..g.count {
                let i = out.len() as u64;
                let flight_seed = seed.wrapping_mul(1_000_003).wrapping_add(i);
                let noise = match g.noise {
                    NoiseKind::Zero => NoiseConfig::zero(),
                    NoiseKind::LowCost => NoiseConfig::low_cost(),
                    NoiseKind::LowCostRandomBias => NoiseConfig::low_cost().with_random_bias(flight_seed),
                };
                let mut cfg = SynthConfig::new(g.profile, g.duration_s, flight_seed);
                cfg.noise = scaled(noise, g.noise_scale);
                cfg.ground_time_s = g.ground_time_s;
                cfg.ground_ekf_drift_mps = g.ground_ekf_drift_mps;
                if let Some(d) = g.rotor_drag {
                    cfg.rotor_drag = d;
                }
                cfg.log_id = Some(format!("f{i:03}_{}", g.profile.as_str()));
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub window: usize,
    pub stride: usize,
    pub val_stride: usize,
    pub val_fraction: f64,
    pub cleanup: CleanupConfig,
    /// Floor on the mean label magnitude when deriving loss weights.
    pub weight_eps: f64,
    /// Reuse the normalization and loss weights stored in this checkpoint
    /// instead of fitting them on the training flights.
    pub stats_from: Option<PathBuf>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            window: 50,
            stride: 10,
            val_stride: 10,
            val_fraction: 0.15,
            cleanup: CleanupConfig::default(),
            weight_eps: 1e-3,
            stats_from: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSet {
    Train,
    #[default]
    Val,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed: synthesis, split, initialization, shuffling and jitter.
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Dataset directory holding `dataset.json`; defaults to `<out>/data`.
    pub dataset: Option<PathBuf>,
    pub synth: SynthPlan,
    pub preprocess: PreprocessConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    /// Warm-start training from this checkpoint.
    pub transfer_from: Option<PathBuf>,
    pub eval: EvalOptions,
    pub eval_set: EvalSet,
    pub stream: StreamConfig,
    /// Flight replayed by `stream`; defaults to the first validation flight.
    pub stream_log: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: None,
            dataset: None,
            synth: SynthPlan::default(),
            preprocess: PreprocessConfig::default(),
            network: NetworkConfig::small(2, 64),
            train: TrainConfig::default(),
            transfer_from: None,
            eval: EvalOptions::default(),
            eval_set: EvalSet::default(),
            stream: StreamConfig::default(),
            stream_log: None,
        }
    }
}

/// Command-line overrides of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Fully resolved run: config plus output directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Run {
    pub fn new(mut cfg: RunConfig, ov: &Overrides, jobs: usize) -> Result<Run> {
        if let Some(seed) = ov.seed {
            cfg.seed = seed;
        }
        cfg.train.shuffle_seed = cfg.seed;
        cfg.stream.seed = cfg.seed;
        let out = ov
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .ok_or_else(|| NavError::Config("no output directory: pass --out or set `out`".into()))?;
        cfg.network.validate()?;
        cfg.train.validate()?;
        cfg.stream.validate()?;
        let p = &cfg.preprocess;
        if p.window == 0 || p.stride == 0 || p.val_stride == 0 {
            return Err(NavError::Config("window, stride and val_stride must be >= 1".into()));
        }
        Ok(Run { cfg, out, jobs: jobs.max(1) })
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.cfg.dataset.clone().unwrap_or_else(|| self.out.join("data"))
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.out.join(stage)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| NavError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| NavError::Config(format!("{}: {e}", path.display())))
}
