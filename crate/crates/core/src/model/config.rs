use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SAMPLE_RATE;
use crate::sim::MAX_SPEAKERS;

/// Architecture hyper-parameters. Defaults are the full-size model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub sample_rate: u32,
    /// Number of encoder filters `H`.
    pub hidden: usize,
    /// Chunk length `K` in frames.
    pub chunk: usize,
    pub kernel_ms: f64,
    pub stride_ms: f64,
    pub n_feature_blocks: usize,
    pub n_sep_blocks: usize,
    pub n_mask_blocks: usize,
    pub n_refine_blocks: usize,
    pub n_aux_blocks: usize,
    /// Hidden width `H'` of the speaker-selection networks.
    pub selection_hidden: usize,
    pub n_max: usize,
    pub heads: usize,
    /// Width of the recurrent feed-forward sublayer; `None` means `4·H`.
    pub ffn: Option<usize>,
    /// Shuffle aggregated chunks before the attractor encoder at inference.
    pub shuffle_at_inference: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            hidden: 64,
            chunk: 100,
            kernel_ms: 2.0,
            stride_ms: 1.0,
            n_feature_blocks: 4,
            n_sep_blocks: 1,
            n_mask_blocks: 1,
            n_refine_blocks: 2,
            n_aux_blocks: 2,
            selection_hidden: 512,
            n_max: MAX_SPEAKERS,
            heads: 4,
            ffn: None,
            shuffle_at_inference: true,
        }
    }
}

impl ModelConfig {
    /// The small model used for quick experiments on a CPU.
    pub fn desk() -> Self {
        Self {
            hidden: 32,
            chunk: 50,
            n_feature_blocks: 2,
            selection_hidden: 64,
            ffn: Some(32),
            ..Self::default()
        }
    }

    /// A minimal configuration for gradient checks and unit tests.
    pub fn tiny() -> Self {
        Self {
            hidden: 8,
            chunk: 4,
            kernel_ms: 1.0,
            stride_ms: 0.5,
            n_feature_blocks: 1,
            n_refine_blocks: 1,
            n_aux_blocks: 1,
            selection_hidden: 8,
            heads: 2,
            ffn: Some(8),
            ..Self::default()
        }
    }

    pub fn kernel(&self) -> usize {
        (self.kernel_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn stride(&self) -> usize {
        (self.stride_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn ffn_width(&self) -> usize {
        self.ffn.unwrap_or(4 * self.hidden)
    }

    pub fn frames(&self, samples: usize) -> Result<usize> {
        let (k, s) = (self.kernel(), self.stride());
        if samples < k {
            return Err(Error::InvalidWaveform(format!(
                "{samples} samples is shorter than the {k}-sample encoder kernel"
            )));
        }
        Ok((samples - k) / s + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("chunk", self.chunk),
            ("kernel", self.kernel()),
            ("stride", self.stride()),
            ("n_max", self.n_max),
            ("heads", self.heads),
            ("selection_hidden", self.selection_hidden),
            ("ffn", self.ffn_width()),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("model {name} must be positive")));
            }
        }
        if self.kernel() < self.stride() {
            return Err(Error::Config("encoder kernel shorter than its stride".into()));
        }
        if self.chunk < 2 {
            return Err(Error::InvalidChunkLength(self.chunk));
        }
        if self.hidden % self.heads != 0 {
            return Err(Error::Config(format!(
                "hidden {} does not split into {} heads",
                self.hidden, self.heads
            )));
        }
        if self.n_max > MAX_SPEAKERS {
            return Err(Error::Config(format!("n_max above {MAX_SPEAKERS}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_sixteen_sample_kernels() {
        let c = ModelConfig::default();
        assert_eq!((c.kernel(), c.stride()), (16, 8));
        assert_eq!(c.frames(8000).unwrap(), 999);
        assert_eq!(c.ffn_width(), 256);
        c.validate().unwrap();
        ModelConfig::desk().validate().unwrap();
        ModelConfig::tiny().validate().unwrap();
        assert!(c.frames(15).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ModelConfig>("hidden = 8\nwidth = 3").is_err());
        let c: ModelConfig = toml::from_str("hidden = 8").unwrap();
        assert_eq!(c.hidden, 8);
    }
}
