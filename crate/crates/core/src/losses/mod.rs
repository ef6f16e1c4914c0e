//! SI-SNR, permutation-invariant and counting losses.

pub mod assignment;
pub mod sisnr;

use muse_autodiff::{Graph, Real, Tensor, Var};
use ndarray::{Array2, IxDyn};
use serde::{Deserialize, Serialize};

pub use assignment::{max_score_assignment, min_cost_assignment};
pub use sisnr::{si_snr, si_snr_graph, si_snr_slices, SI_SNR_EPS};

use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Probability clamp for the counting loss.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub pit: f64,
    pub eda: f64,
    /// `permutation[i]` is the estimate matched to reference `i`.
    pub permutation: Vec<usize>,
    pub tse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PitResult {
    pub loss: f64,
    pub permutation: Vec<usize>,
}

/// `matrix[i][j]` is the negative SI-SNR of estimate `j` against reference `i`.
pub fn pairwise_loss(refs: &[Waveform], ests: &[Waveform]) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((refs.len(), ests.len()));
    for (i, r) in refs.iter().enumerate() {
        for (j, e) in ests.iter().enumerate() {
            m[[i, j]] = -si_snr(r, e)?;
        }
    }
    Ok(m)
}

/// Mean loss under the best matching of a square pairwise loss matrix.
pub fn pit_from_matrix(m: &Array2<f64>) -> PitResult {
    let permutation = min_cost_assignment(m);
    let n = permutation.len();
    let loss = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| m[[i, j]])
        .sum::<f64>()
        / n as f64;
    PitResult { loss, permutation }
}

pub fn pit_loss(refs: &[Waveform], ests: &[Waveform]) -> Result<PitResult> {
    if refs.len() != ests.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} references but {} estimates",
            refs.len(),
            ests.len()
        )));
    }
    if refs.is_empty() {
        return Err(Error::NoOutputs);
    }
    Ok(pit_from_matrix(&pairwise_loss(refs, ests)?))
}

/// Mean binary cross-entropy of `probs` against `N` ones followed by a zero.
pub fn eda_bce_loss(probs: &[f64], n: usize) -> Result<f64> {
    if probs.len() != n + 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities for {n} speakers (expected {})",
            probs.len(),
            n + 1
        )));
    }
    let total: f64 = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            if i < n {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

pub fn stage1_loss(
    refs: &[Waveform],
    ests: &[Waveform],
    probs: &[f64],
    n: usize,
    eda_weight: f64,
) -> Result<LossBreakdown> {
    let pit = pit_loss(refs, ests)?;
    let eda = eda_bce_loss(probs, n)?;
    Ok(LossBreakdown {
        total: pit.loss + eda_weight * eda,
        pit: pit.loss,
        eda,
        permutation: pit.permutation,
        tse: None,
    })
}

pub fn stage2_loss(target: &Waveform, est: &Waveform) -> Result<f64> {
    Ok(-si_snr(target, est)?)
}

/// Differentiable permutation-invariant loss of `(n, L)` estimates against
/// `(n, L)` references; returns the scalar loss and the chosen matching.
pub fn pit_graph<F: Real>(g: &mut Graph<F>, refs: &Tensor<F>, ests: Var) -> Result<(Var, Vec<usize>)> {
    let n = refs.shape()[0];
    if g.shape(ests)[0] != n {
        return Err(Error::ShapeMismatch(format!(
            "{} references but {} estimates",
            n,
            g.shape(ests)[0]
        )));
    }
    let to_rows = |t: &Tensor<F>| -> Vec<Vec<f64>> {
        t.outer_iter()
            .map(|r| r.iter().map(|v| v.to_f64_lossy()).collect())
            .collect()
    };
    let (r, e) = (to_rows(refs), to_rows(g.value(ests)));
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] = -si_snr_slices(&r[i], &e[j])?;
        }
    }
    let perm = min_cost_assignment(&m);
    let matched = g.index_select(ests, 0, &perm);
    let s = si_snr_graph(g, refs, matched)?;
    let mean = g.mean_all(s);
    Ok((g.neg(mean), perm))
}

/// Mean BCE-with-logits of `(m)` logits against `n` ones and `m − n` zeros.
pub fn bce_logits_graph<F: Real>(g: &mut Graph<F>, logits: Var, n: usize) -> Var {
    let m = g.shape(logits)[0];
    let labels = Tensor::from_shape_fn(IxDyn(&[m]), |i| if i[0] < n { F::one() } else { F::zero() });
    let sp = g.softplus(logits);
    let y = g.constant(labels);
    let yz = g.mul(y, logits);
    let per = g.sub(sp, yz);
    g.mean_all(per)
}
