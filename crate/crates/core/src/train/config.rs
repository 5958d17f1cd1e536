use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::AdamConfig;

/// Optimisation hyperparameters. Defaults follow the reference recipe:
/// Adam at 1e-3, batches of two, at most 900 epochs, patience 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without a loss improvement.
    pub patience: usize,
    /// An epoch improves only if it beats the best loss by more than this.
    pub min_delta: f64,
    pub seed: u64,
    /// Reshuffle the training order every epoch.
    pub shuffle: bool,
    /// Evaluate relative MSE every this many epochs (0 = final epoch only).
    pub eval_every: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 2,
            max_epochs: 900,
            patience: 100,
            min_delta: 0.0,
            seed: 0,
            shuffle: true,
            eval_every: 10,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return Err(Error::config("min_delta must be finite and non-negative"));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.epsilon <= 0.0 {
            return Err(Error::config(format!("invalid adam parameters {a:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_recipe() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.batch_size, 2);
        assert_eq!(c.max_epochs, 900);
        assert_eq!(c.patience, 100);
        assert_eq!(c.min_delta, 0.0);
        assert_eq!(c.adam, AdamConfig { beta1: 0.9, beta2: 0.999, epsilon: 1e-7 });
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { min_delta: f64::NAN, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
            TrainConfig { max_epochs: 0, patience: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn patience_beyond_epochs_is_allowed() {
        TrainConfig { max_epochs: 1, ..Default::default() }.validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"max_epochs": 50, "seed": 3}"#).unwrap();
        assert_eq!(c.max_epochs, 50);
        assert_eq!(c.seed, 3);
        assert_eq!(c.batch_size, 2);
    }
}
