//! Waveform and feature-array primitives: power and SNR helpers, 50%-overlap
//! chunk segmentation and its overlap-add inverse.

use muse_autodiff::Real;
use ndarray::{s, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample rate of the reference configuration.
pub const SAMPLE_RATE: u32 = 8000;

/// A mono signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidWaveform("waveform has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidWaveform("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidWaveform(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len.max(1)],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Keeps the first `len` samples (no-op when already shorter).
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.clamp(1, self.samples.len());
        Self {
            samples: self.samples[..len].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Elementwise sum of two equally long signals.
    pub fn plus(&self, other: &Waveform) -> Result<Self> {
        if other.sample_rate != self.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: self.sample_rate,
                found: other.sample_rate,
            });
        }
        if other.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot add waveforms of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            sample_rate: self.sample_rate,
        })
    }
}

/// Root-mean-square amplitude. An all-zero signal has power 0.
pub fn rms_power(w: &Waveform) -> f64 {
    rms(w.samples())
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Amplitude ratio in dB, `20·log10(signal / noise)`.
pub fn snr_db(signal_power: f64, noise_power: f64) -> f64 {
    20.0 * (signal_power / noise_power).log10()
}

/// Gain `g` for the noise such that `20·log10(signal / (g·noise))` equals
/// `target_snr_db`. Powers are RMS amplitudes.
pub fn snr_gain(signal_power: f64, noise_power: f64, target_snr_db: f64) -> Result<f64> {
    if !(noise_power > 0.0) || !noise_power.is_finite() {
        return Err(Error::DegenerateNoise);
    }
    if !(signal_power > 0.0) || !signal_power.is_finite() {
        return Err(Error::InvalidArgument(
            "signal power must be positive".into(),
        ));
    }
    Ok(signal_power / noise_power * 10f64.powf(-target_snr_db / 20.0))
}

/// Frame-level features, `frames × hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeature<F = f64> {
    pub data: Array2<F>,
}

/// Chunked features, `chunks × chunk_len × hidden`, plus the number of zero
/// frames appended before segmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkFeature<F = f64> {
    pub data: Array3<F>,
    pub pad_frames: usize,
}

/// Index bookkeeping shared by segmentation and overlap-add.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentPlan {
    pub frames: usize,
    pub chunk: usize,
    pub hop: usize,
    pub chunks: usize,
    pub pad_frames: usize,
}

impl SegmentPlan {
    pub fn new(frames: usize, chunk: usize) -> Result<Self> {
        if chunk < 2 || chunk % 2 != 0 {
            return Err(Error::InvalidChunkLength(chunk));
        }
        if frames == 0 {
            return Err(Error::ShapeMismatch("cannot segment zero frames".into()));
        }
        let hop = chunk / 2;
        let chunks = frames.saturating_sub(chunk).div_ceil(hop) + 1;
        let padded = (chunks - 1) * hop + chunk;
        Ok(Self {
            frames,
            chunk,
            hop,
            chunks,
            pad_frames: padded - frames,
        })
    }

    /// Input frame feeding chunk `c`, position `k`; `None` inside the padding.
    pub fn source_frame(&self, c: usize, k: usize) -> Option<usize> {
        let t = c * self.hop + k;
        (t < self.frames).then_some(t)
    }

    /// Number of chunk positions covering each real frame.
    pub fn overlap_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.frames];
        for c in 0..self.chunks {
            for k in 0..self.chunk {
                if let Some(t) = self.source_frame(c, k) {
                    counts[t] += 1;
                }
            }
        }
        counts
    }
}

/// Splits `T` frames into 50%-overlapping chunks of `chunk_len` frames,
/// zero-padding at the end so every frame is covered.
pub fn segment<F: Real>(f: &FrameFeature<F>, chunk_len: usize) -> Result<ChunkFeature<F>> {
    let (frames, hidden) = f.data.dim();
    let plan = SegmentPlan::new(frames, chunk_len)?;
    let mut data = Array3::<F>::zeros((plan.chunks, plan.chunk, hidden));
    for c in 0..plan.chunks {
        let start = c * plan.hop;
        let end = (start + plan.chunk).min(frames);
        data.slice_mut(s![c, ..end - start, ..])
            .assign(&f.data.slice(s![start..end, ..]));
    }
    Ok(ChunkFeature {
        data,
        pad_frames: plan.pad_frames,
    })
}

/// Inverse of [`segment`]: sums chunks at hop `chunk_len / 2`, divides every
/// frame by its overlap count and drops the padding.
pub fn overlap_add<F: Real>(
    c: &ChunkFeature<F>,
    chunk_len: usize,
    frames: usize,
) -> Result<FrameFeature<F>> {
    let plan = SegmentPlan::new(frames, chunk_len)?;
    let (chunks, k, hidden) = c.data.dim();
    if chunks != plan.chunks || k != plan.chunk || c.pad_frames != plan.pad_frames {
        return Err(Error::ShapeMismatch(format!(
            "chunk feature {chunks}×{k} (pad {}) does not match {} frames at chunk length {chunk_len}",
            c.pad_frames, frames
        )));
    }
    let mut data = Array2::<F>::zeros((frames, hidden));
    for ci in 0..chunks {
        let start = ci * plan.hop;
        let end = (start + plan.chunk).min(frames);
        let mut dst = data.slice_mut(s![start..end, ..]);
        dst += &c.data.slice(s![ci, ..end - start, ..]);
    }
    for (mut row, n) in data.rows_mut().into_iter().zip(plan.overlap_counts()) {
        let inv = F::one() / F::from_usize(n).unwrap();
        row.mapv_inplace(|v| v * inv);
    }
    Ok(FrameFeature { data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn wf(v: &[f64]) -> Waveform {
        Waveform::new(v.to_vec(), SAMPLE_RATE).unwrap()
    }

    #[test]
    fn rms_values() {
        assert_eq!(rms_power(&wf(&[0.0, 0.0, 0.0])), 0.0);
        assert_eq!(rms_power(&wf(&[1.0, -1.0, 1.0, -1.0])), 1.0);
        assert!((rms_power(&wf(&[3.0, 4.0])) - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn snr_gain_values() {
        assert!((snr_gain(1.0, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((snr_gain(1.0, 1.0, 20.0).unwrap() - 0.1).abs() < 1e-12);
        let g = snr_gain(2.0, 1.0, 20.0 * 2f64.log10()).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        assert!((snr_gain(2.0, 1.0, 6.0206).unwrap() - 1.0).abs() < 1e-5);
        assert!(matches!(snr_gain(1.0, 0.0, 5.0), Err(Error::DegenerateNoise)));
    }

    #[test]
    fn waveform_rejects_bad_input() {
        assert!(Waveform::new(vec![], 8000).is_err());
        assert!(Waveform::new(vec![f64::NAN], 8000).is_err());
        assert!(Waveform::new(vec![0.0], 0).is_err());
    }

    #[test]
    fn chunk_counts() {
        let cases = [(10, 4, 4, 0), (4, 4, 1, 0), (11, 4, 5, 1), (3, 4, 1, 1)];
        for (t, k, c, pad) in cases {
            let f = FrameFeature {
                data: Array2::<f64>::ones((t, 3)),
            };
            let ch = segment(&f, k).unwrap();
            assert_eq!(ch.data.dim().0, c, "T={t} K={k}");
            assert_eq!(ch.pad_frames, pad, "T={t} K={k}");
            assert!(ch.pad_frames < k);
        }
    }

    #[test]
    fn odd_chunk_rejected() {
        let f = FrameFeature {
            data: Array2::<f64>::ones((10, 2)),
        };
        assert!(matches!(segment(&f, 3), Err(Error::InvalidChunkLength(3))));
    }

    #[test]
    fn single_chunk_is_identity() {
        let f = FrameFeature {
            data: Array2::from_shape_fn((4, 2), |(t, h)| (t * 2 + h) as f64),
        };
        let c = segment(&f, 4).unwrap();
        let back = overlap_add(&c, 4, 4).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn overlap_add_rejects_mismatch() {
        let f = FrameFeature {
            data: Array2::<f64>::ones((10, 2)),
        };
        let c = segment(&f, 4).unwrap();
        assert!(overlap_add(&c, 4, 11).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(t in 1usize..40, half in 1usize..6, h in 1usize..5, seed in 0u64..1000) {
            let k = 2 * half;
            let data = Array2::from_shape_fn((t, h), |(i, j)| ((i * 31 + j * 7) as f64 + seed as f64).sin());
            let f = FrameFeature { data };
            let c = segment(&f, k).unwrap();
            // chunk c, position k is frame c·K/2 + k or zero padding
            for ci in 0..c.data.dim().0 {
                for ki in 0..k {
                    let src = ci * half + ki;
                    for j in 0..h {
                        let expect = if src < t { f.data[[src, j]] } else { 0.0 };
                        prop_assert_eq!(c.data[[ci, ki, j]], expect);
                    }
                }
            }
            let back = overlap_add(&c, k, t).unwrap();
            for (a, b) in back.data.iter().zip(f.data.iter()) {
                prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
            }
        }

        #[test]
        fn snr_gain_remeasures(sig in 1e-3f64..10.0, noise in 1e-3f64..10.0, target in -10f64..30.0) {
            let g = snr_gain(sig, noise, target).unwrap();
            prop_assert!((snr_db(sig, g * noise) - target).abs() < 1e-9);
        }
    }
}
