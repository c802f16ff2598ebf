//! A trained estimator: network weights plus everything needed to feed it.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::preprocess::{Normalization, UnifiedSeries, FEATURES, LABELS};
use crate::rnn::{Network, NetworkConfig, NetworkParams, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network<f32>,
    pub normalization: Normalization,
    pub weights: [f32; LABELS],
    pub window: usize,
}

impl Model {
    pub fn new(
        config: NetworkConfig,
        params: NetworkParams<f32>,
        normalization: Normalization,
        weights: [f32; LABELS],
        window: usize,
    ) -> Result<Model> {
        if config.input_size != FEATURES {
            return Err(Error::Shape(alloc::format!(
                "network expects {} inputs, features have {}",
                config.input_size,
                FEATURES
            )));
        }
        if window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if !normalization.is_valid() {
            return Err(Error::Validation("normalization statistics are not finite/positive".into()));
        }
        Ok(Model { network: Network::new(config, params)?, normalization, weights, window })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.network.config
    }

    /// Predicts the increment at the last row of an already normalised window.
    pub fn predict_window(&self, window: &[f32], tape: &mut Tape<f32>) -> Result<Vec<f32>> {
        if window.len() != self.window * FEATURES {
            return Err(Error::Shape(alloc::format!(
                "window has {} values, model expects {}",
                window.len(),
                self.window * FEATURES
            )));
        }
        Ok(self.network.forward(window, tape)?.to_vec())
    }

    /// Predictions for label rows `window - 1 ..= rows - 1` of a unified
    /// series, one per stride-1 window.
    pub fn predict_series(&self, series: &UnifiedSeries) -> Result<Vec<Vec<f32>>> {
        let rows = series.rows();
        if rows < self.window {
            return Err(Error::TooShort { needed: self.window, got: rows });
        }
        let normalized: Vec<[f32; FEATURES]> = series.features.iter().map(|r| self.normalization.apply(r)).collect();
        let mut tape = Tape::new();
        let mut buf = Vec::with_capacity(self.window * FEATURES);
        let mut out = Vec::with_capacity(rows - self.window + 1);
        for start in 0..=rows - self.window {
            buf.clear();
            for row in &normalized[start..start + self.window] {
                buf.extend_from_slice(row);
            }
            out.push(self.network.forward(&buf, &mut tape)?.to_vec());
        }
        Ok(out)
    }
}
