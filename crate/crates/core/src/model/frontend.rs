use muse_autodiff::{Real, Tensor, Var};
use ndarray::IxDyn;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::dpt::{dpt_stack, run_stack, DptDims};
use crate::nn::{Builder, DptBlock, GlobalLayerNorm, Linear, PRelu, Session};
use crate::signal::SegmentPlan;

pub fn dims(cfg: &ModelConfig) -> DptDims {
    DptDims {
        hidden: cfg.hidden,
        heads: cfg.heads,
        ffn: cfg.ffn_width(),
    }
}

/// `(L)` waveform to `(T, kernel)` frames.
pub fn frame_signal<F: Real>(s: &mut Session<'_, F>, w: Var, kernel: usize, stride: usize) -> Var {
    let len = s.g.shape(w)[0];
    let frames = (len - kernel) / stride + 1;
    let idx: Vec<Option<usize>> = (0..frames)
        .flat_map(|t| (0..kernel).map(move |k| Some(t * stride + k)))
        .collect();
    let flat = s.g.gather(w, 0, &idx);
    s.g.reshape(flat, &[frames, kernel])
}

/// `(n, T, kernel)` frames summed back at `stride` into `(n, len)`.
pub fn overlap_add_frames<F: Real>(s: &mut Session<'_, F>, x: Var, stride: usize, len: usize) -> Var {
    let shape = s.g.shape(x).to_vec();
    let (n, frames, kernel) = (shape[0], shape[1], shape[2]);
    let idx: Vec<Option<usize>> = (0..frames)
        .flat_map(|t| {
            (0..kernel).map(move |k| {
                let i = t * stride + k;
                (i < len).then_some(i)
            })
        })
        .collect();
    let flat = s.g.reshape(x, &[n, frames * kernel]);
    s.g.scatter_add(flat, 1, &idx, len)
}

/// `(n, T, H)` to `(n, C, K, H)` chunks with zero padding at the end.
pub fn segment<F: Real>(s: &mut Session<'_, F>, x: Var, plan: &SegmentPlan) -> Var {
    let shape = s.g.shape(x).to_vec();
    let (n, h) = (shape[0], shape[2]);
    let idx: Vec<Option<usize>> = (0..plan.chunks)
        .flat_map(|c| (0..plan.chunk).map(move |k| plan.source_frame(c, k)))
        .collect();
    let g = s.g.gather(x, 1, &idx);
    s.g.reshape(g, &[n, plan.chunks, plan.chunk, h])
}

/// Inverse of [`segment`]: overlap-add normalized by per-frame counts.
pub fn chunk_overlap_add<F: Real>(s: &mut Session<'_, F>, x: Var, plan: &SegmentPlan) -> Var {
    let shape = s.g.shape(x).to_vec();
    let (n, h) = (shape[0], shape[3]);
    let idx: Vec<Option<usize>> = (0..plan.chunks)
        .flat_map(|c| (0..plan.chunk).map(move |k| plan.source_frame(c, k)))
        .collect();
    let flat = s.g.reshape(x, &[n, plan.chunks * plan.chunk, h]);
    let summed = s.g.scatter_add(flat, 1, &idx, plan.frames);
    let inv: Vec<F> = plan
        .overlap_counts()
        .into_iter()
        .map(|c| F::one() / F::from_usize(c).unwrap())
        .collect();
    let inv = s.input(Tensor::from_shape_vec(IxDyn(&[plan.frames, 1]), inv).unwrap());
    s.g.mul(summed, inv)
}

/// Framing, a learned filterbank and a ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub basis: Linear,
    pub kernel: usize,
    pub stride: usize,
}

impl Encoder {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, cfg: &ModelConfig) -> Self {
        Self {
            basis: Linear::new(b, cfg.kernel(), cfg.hidden, true),
            kernel: cfg.kernel(),
            stride: cfg.stride(),
        }
    }

    /// `(L)` waveform to `(T, H)` nonnegative features.
    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, w: Var) -> Result<Var> {
        let len = s.g.shape(w)[0];
        if len < self.kernel {
            return Err(Error::InvalidWaveform(format!(
                "{len} samples is shorter than the {}-sample encoder kernel",
                self.kernel
            )));
        }
        let frames = frame_signal(s, w, self.kernel, self.stride);
        let y = self.basis.forward(s, frames);
        Ok(s.g.relu(y))
    }
}

/// gLN, segmentation and a stack of dual-path blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureExtractor {
    pub norm: GlobalLayerNorm,
    pub blocks: Vec<DptBlock>,
    pub chunk: usize,
}

impl FeatureExtractor {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, cfg: &ModelConfig, n_blocks: usize) -> Self {
        Self {
            norm: GlobalLayerNorm::new(&mut b.sub("gln"), cfg.hidden),
            blocks: dpt_stack(b, n_blocks, dims(cfg)),
            chunk: cfg.chunk,
        }
    }

    /// `(T, H)` to `(1, C, K, H)` together with the segmentation plan.
    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, enc: Var) -> Result<(Var, SegmentPlan)> {
        let shape = s.g.shape(enc).to_vec();
        if shape[0] * shape[1] < 2 {
            return Err(Error::ShapeMismatch("gLN needs more than one value".into()));
        }
        let plan = SegmentPlan::new(shape[0], self.chunk)?;
        let x = self.norm.forward(s, enc);
        let x = s.g.reshape(x, &[1, shape[0], shape[1]]);
        let x = segment(s, x, &plan);
        Ok((run_stack(&self.blocks, s, x), plan))
    }
}

/// Dual-path block(s), PReLU, a point-wise linear map, overlap-add and a
/// ReLU, producing one nonnegative mask per speaker.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskEstimator {
    pub blocks: Vec<DptBlock>,
    pub prelu: PRelu,
    pub proj: Linear,
}

impl MaskEstimator {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, cfg: &ModelConfig) -> Self {
        Self {
            blocks: dpt_stack(b, cfg.n_mask_blocks, dims(cfg)),
            prelu: PRelu::new(&mut b.sub("prelu")),
            proj: Linear::new(&mut b.sub("proj"), cfg.hidden, cfg.hidden, true),
        }
    }

    /// `(n, C, K, H)` to `(n, T, H)` masks.
    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, z: Var, plan: &SegmentPlan) -> Var {
        let x = run_stack(&self.blocks, s, z);
        let x = self.prelu.forward(s, x);
        let x = self.proj.forward(s, x);
        let x = chunk_overlap_add(s, x, plan);
        s.g.relu(x)
    }
}

/// Masking followed by a transposed-convolution synthesis filterbank.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    pub basis: Linear,
    pub stride: usize,
}

impl Decoder {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, cfg: &ModelConfig) -> Self {
        Self {
            basis: Linear::new(b, cfg.hidden, cfg.kernel(), false),
            stride: cfg.stride(),
        }
    }

    /// `mask (n, T, H)` times `enc (T, H)`, decoded to `(n, len)`.
    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, mask: Var, enc: Var, len: usize) -> Result<Var> {
        let (ms, es) = (s.g.shape(mask).to_vec(), s.g.shape(enc).to_vec());
        if ms.len() != 3 || ms[1..] != es[..] {
            return Err(Error::ShapeMismatch(format!(
                "mask {ms:?} does not match encoder output {es:?}"
            )));
        }
        let masked = s.g.mul(mask, enc);
        let frames = self.basis.forward(s, masked);
        Ok(overlap_add_frames(s, frames, self.stride, len))
    }
}
