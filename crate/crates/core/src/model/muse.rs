use muse_autodiff::{Real, Tensor, Var};
use ndarray::IxDyn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::eda::{apply_attractors, AttractorSet, CountMode, Eda};
use super::frontend::{dims, Decoder, Encoder, FeatureExtractor, MaskEstimator};
use super::tse::{SelectionOutput, Tse};
use crate::error::{Error, Result};
use crate::nn::dpt::{dpt_stack, run_stack};
use crate::nn::{Builder, DptBlock, ParamStore, Session};
use crate::signal::{SegmentPlan, Waveform};

/// Prefix shared by every parameter of the extraction module.
pub const TSE_PREFIX: &str = "tse.";

/// Seed of the chunk shuffle applied at inference time.
pub const INFERENCE_SHUFFLE_SEED: u64 = 0x5eed;

/// Layer layout of the full model; parameter values live in a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Muse {
    pub cfg: ModelConfig,
    pub encoder: Encoder,
    pub features: FeatureExtractor,
    pub eda: Eda,
    pub separation: Vec<DptBlock>,
    pub mask: MaskEstimator,
    pub decoder: Decoder,
    pub tse: Tse,
}

/// Encoder output and chunked features of one mixture.
pub struct Front {
    pub enc: Var,
    pub chunks: Var,
    pub plan: SegmentPlan,
    pub len: usize,
}

pub struct Separation {
    pub attractors: AttractorSet,
    /// `(n, C, K, H)` speaker features after the shared separation block.
    pub speakers: Option<Var>,
    /// `(n, L)` waveforms; `None` when no speaker was detected.
    pub estimates: Option<Var>,
}

pub struct Extraction {
    pub attractors: AttractorSet,
    pub selection: SelectionOutput,
    /// `(1, L)`
    pub estimate: Var,
}

pub fn is_tse_param(name: &str) -> bool {
    name.starts_with(TSE_PREFIX)
}

impl Muse {
    /// Lays out the model and draws initial parameters from `seed`.
    pub fn build<F: Real>(cfg: &ModelConfig, seed: u64) -> Result<(Self, ParamStore<F>)> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder::new(&mut store, &mut rng);
        let model = Self {
            cfg: cfg.clone(),
            encoder: Encoder::new(&mut b.sub("encoder"), cfg),
            features: FeatureExtractor::new(&mut b.sub("features"), cfg, cfg.n_feature_blocks),
            eda: Eda::new(&mut b.sub("eda"), cfg),
            separation: dpt_stack(&mut b.sub("separation"), cfg.n_sep_blocks, dims(cfg)),
            mask: MaskEstimator::new(&mut b.sub("mask"), cfg),
            decoder: Decoder::new(&mut b.sub("decoder"), cfg),
            tse: Tse::new(&mut b.sub("tse"), cfg),
        };
        for blk in &model.tse.refine {
            blk.set_identity(&mut store);
        }
        Ok((model, store))
    }

    /// Redraws every extraction parameter from `seed`, leaving the rest intact.
    pub fn reinit_tse<F: Real>(&self, store: &mut ParamStore<F>, seed: u64) -> Result<()> {
        let (_, fresh) = Self::build::<F>(&self.cfg, seed)?;
        for (id, name, value) in fresh.iter() {
            if is_tse_param(name) {
                let dst = store.id(name).unwrap_or(id);
                store.set(dst, value.clone())?;
            }
        }
        Ok(())
    }

    /// Shuffle seed used outside training.
    pub fn inference_shuffle(&self) -> Option<u64> {
        self.cfg.shuffle_at_inference.then_some(INFERENCE_SHUFFLE_SEED)
    }

    pub fn waveform_input<F: Real>(&self, s: &mut Session<'_, F>, w: &Waveform) -> Result<Var> {
        if w.sample_rate() != self.cfg.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: self.cfg.sample_rate,
                found: w.sample_rate(),
            });
        }
        let data: Vec<F> = w.samples().iter().map(|&v| F::from_f64_lossy(v)).collect();
        Ok(s.input(Tensor::from_shape_vec(IxDyn(&[data.len()]), data).unwrap()))
    }

    pub fn front<F: Real>(&self, s: &mut Session<'_, F>, mixture: Var) -> Result<Front> {
        let len = s.g.shape(mixture)[0];
        let enc = self.encoder.forward(s, mixture)?;
        let (chunks, plan) = self.features.forward(s, enc)?;
        Ok(Front {
            enc,
            chunks,
            plan,
            len,
        })
    }

    /// Per-speaker features for the first `n` attractors.
    pub fn speaker_features<F: Real>(&self, s: &mut Session<'_, F>, front: &Front, set: &AttractorSet, n: usize) -> Result<Var> {
        let z = apply_attractors(s, front.chunks, &set.attractors[..n])?;
        Ok(run_stack(&self.separation, s, z))
    }

    /// Masks and decodes `(n, C, K, H)` features into `(n, L)` waveforms.
    pub fn reconstruct<F: Real>(&self, s: &mut Session<'_, F>, front: &Front, z: Var) -> Result<Var> {
        let mask = self.mask.forward(s, z, &front.plan);
        self.decoder.forward(s, mask, front.enc, front.len)
    }

    pub fn separate<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        mixture: Var,
        mode: CountMode,
        shuffle_seed: Option<u64>,
    ) -> Result<Separation> {
        let front = self.front(s, mixture)?;
        let attractors = self
            .eda
            .forward(s, front.chunks, mode, self.cfg.n_max, shuffle_seed)?;
        if attractors.n_est == 0 {
            return Ok(Separation {
                attractors,
                speakers: None,
                estimates: None,
            });
        }
        let z = self.speaker_features(s, &front, &attractors, attractors.n_est)?;
        let estimates = self.reconstruct(s, &front, z)?;
        Ok(Separation {
            attractors,
            speakers: Some(z),
            estimates: Some(estimates),
        })
    }

    /// Target speaker extraction. With no speaker detected the first
    /// attractor is used, so one estimate is always returned.
    pub fn extract<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        mixture: Var,
        enrollment: Var,
        mode: CountMode,
        shuffle_seed: Option<u64>,
    ) -> Result<Extraction> {
        let front = self.front(s, mixture)?;
        let attractors = self
            .eda
            .forward(s, front.chunks, mode, self.cfg.n_max, shuffle_seed)?;
        let z = self.speaker_features(s, &front, &attractors, attractors.n_est.max(1))?;
        let enc_u = self.encoder.forward(s, enrollment)?;
        let u = self.tse.embed(s, enc_u)?;
        let out = self.tse.forward(s, z, u)?;
        let estimate = self.reconstruct(s, &front, out.refined)?;
        Ok(Extraction {
            attractors,
            selection: out.selection,
            estimate,
        })
    }
}

/// A model layout bundled with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MuseModel<F> {
    pub muse: Muse,
    pub params: ParamStore<F>,
}

/// Waveforms and counting output of one separation call.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparateResult {
    pub estimates: Vec<Waveform>,
    pub probs: Vec<f64>,
    pub n_est: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractResult {
    pub estimate: Waveform,
    pub probs: Vec<f64>,
    pub n_est: usize,
    /// Mean attention weight of each separated speaker.
    pub attention: Vec<f64>,
}

pub fn to_waveforms<F: Real>(t: &Tensor<F>, sample_rate: u32) -> Result<Vec<Waveform>> {
    t.outer_iter()
        .map(|row| Waveform::new(row.iter().map(|v| v.to_f64_lossy()).collect(), sample_rate))
        .collect()
}

impl<F: Real> MuseModel<F> {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        let (muse, params) = Muse::build(cfg, seed)?;
        Ok(Self { muse, params })
    }

    pub fn cfg(&self) -> &ModelConfig {
        &self.muse.cfg
    }

    /// Separates `mixture`; `oracle_n` forces the number of outputs.
    pub fn separate(&self, mixture: &Waveform, oracle_n: Option<usize>) -> Result<SeparateResult> {
        let mut s = Session::inference(&self.params);
        let x = self.muse.waveform_input(&mut s, mixture)?;
        let mode = oracle_n.map_or(CountMode::Inference, CountMode::Oracle);
        let out = self.muse.separate(&mut s, x, mode, self.muse.inference_shuffle())?;
        let estimates = match out.estimates {
            Some(e) => to_waveforms(s.g.value(e), mixture.sample_rate())?,
            None => Vec::new(),
        };
        Ok(SeparateResult {
            estimates,
            probs: out.attractors.probs,
            n_est: out.attractors.n_est,
        })
    }

    pub fn extract(&self, mixture: &Waveform, enrollment: &Waveform, oracle_n: Option<usize>) -> Result<ExtractResult> {
        let mut s = Session::inference(&self.params);
        let x = self.muse.waveform_input(&mut s, mixture)?;
        let u = self.muse.waveform_input(&mut s, enrollment)?;
        let mode = oracle_n.map_or(CountMode::Inference, CountMode::Oracle);
        let out = self.muse.extract(&mut s, x, u, mode, self.muse.inference_shuffle())?;
        let estimate = to_waveforms(s.g.value(out.estimate), mixture.sample_rate())?.remove(0);
        let w = s.g.value(out.selection.weights);
        let attention = w
            .outer_iter()
            .map(|a| a.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / a.len() as f64)
            .collect();
        Ok(ExtractResult {
            estimate,
            probs: out.attractors.probs,
            n_est: out.attractors.n_est,
            attention,
        })
    }
}
