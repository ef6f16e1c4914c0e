use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::MAX_SPEAKERS;

/// How the speaker count of each batch is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// In proportion to the number of examples of each count.
    Proportional,
    /// Every available count equally often.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub stage: u8,
    pub peak_lr: f64,
    pub warmup_steps: usize,
    /// Learning-rate factor applied every two epochs after warm-up.
    pub decay: f64,
    pub epochs: usize,
    /// Stops early after this many optimizer steps.
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    pub segment_seconds: f64,
    pub seed: u64,
    pub manifests: Vec<PathBuf>,
    pub n_max: usize,
    pub sampling: Sampling,
    /// Weight of the counting loss relative to the separation loss.
    pub eda_weight: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage: 1,
            peak_lr: 4e-4,
            warmup_steps: 20_000,
            decay: 0.98,
            epochs: 175,
            max_steps: None,
            batch_size: 4,
            segment_seconds: 4.0,
            seed: 0,
            manifests: Vec::new(),
            n_max: MAX_SPEAKERS,
            sampling: Sampling::Proportional,
            eda_weight: 1.0,
            clip_norm: Some(5.0),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Extraction-module training from scratch on a frozen separator.
    pub fn stage2() -> Self {
        Self {
            stage: 2,
            peak_lr: 1e-4,
            warmup_steps: 10_000,
            epochs: 50,
            ..Self::default()
        }
    }

    /// Small settings for CPU runs.
    pub fn desk(stage: u8) -> Self {
        Self {
            stage,
            peak_lr: 1e-3,
            warmup_steps: 50,
            epochs: 1_000,
            batch_size: 1,
            segment_seconds: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.stage) {
            return Err(Error::Config(format!("stage must be 1 or 2, got {}", self.stage)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if !(self.peak_lr > 0.0) || !(self.segment_seconds > 0.0) || !(self.decay > 0.0) {
            return Err(Error::Config("peak_lr, decay and segment_seconds must be positive".into()));
        }
        if self.n_max == 0 || self.n_max > MAX_SPEAKERS {
            return Err(Error::Config(format!("n_max must be in 1..={MAX_SPEAKERS}")));
        }
        Ok(())
    }
}

/// Linear warm-up to the peak, then a step decay every two epochs.
pub fn lr_at(step: usize, epoch: usize, cfg: &TrainConfig) -> f64 {
    if step < cfg.warmup_steps {
        cfg.peak_lr * step as f64 / cfg.warmup_steps as f64
    } else {
        cfg.peak_lr * cfg.decay.powi((epoch / 2) as i32)
    }
}
