use muse_autodiff::{Real, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::{Builder, Linear, Lstm, Session};

/// How many attractors to generate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountMode {
    /// Exactly `N` attractors are used; `N + 1` probabilities are emitted.
    Oracle(usize),
    /// Generate until the existence probability drops below one half.
    Inference,
}

pub const EXISTENCE_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct AttractorSet {
    /// Every generated attractor, each `(1, H)`, in generation order.
    pub attractors: Vec<Var>,
    /// Classifier logits `(m)`, one per generated attractor.
    pub logits: Var,
    pub probs: Vec<f64>,
    /// Number of attractors used downstream.
    pub n_est: usize,
}

/// A uniformly random permutation of `0..n` under `seed`.
pub fn shuffle_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

/// Attractor generation: chunk aggregation, an LSTM encoder over the
/// chunk sequence, a zero-input LSTM decoder and an existence classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Eda {
    pub aggregate: Linear,
    pub encoder: Lstm,
    pub decoder: Lstm,
    pub classifier: Linear,
    pub hidden: usize,
}

impl Eda {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, cfg: &ModelConfig) -> Self {
        let h = cfg.hidden;
        Self {
            aggregate: Linear::new(&mut b.sub("aggregate"), h, 1, true),
            encoder: Lstm::new(&mut b.sub("encoder"), h, h),
            decoder: Lstm::new(&mut b.sub("decoder"), h, h),
            classifier: Linear::new(&mut b.sub("classifier"), h, 1, true),
            hidden: h,
        }
    }

    /// `(1, C, K, H)` to `(C, H)` by softmax-weighted averaging over `K`.
    pub fn aggregate<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let shape = s.g.shape(x).to_vec();
        let (c, k, h) = (shape[1], shape[2], shape[3]);
        let x = s.g.reshape(x, &[c, k, h]);
        let scores = self.aggregate.forward(s, x);
        let w = s.g.softmax(scores, 1);
        let weighted = s.g.mul(x, w);
        s.g.sum_axes(weighted, &[1], false)
    }

    /// Final `(h, c)` states, each `(1, H)`, after running over the `C` rows.
    pub fn encode<F: Real>(&self, s: &mut Session<'_, F>, rows: Var) -> (Var, Var) {
        let shape = s.g.shape(rows).to_vec();
        let (c, h) = (shape[0], shape[1]);
        let x = s.g.reshape(rows, &[1, c, h]);
        let h0 = s.zeros(&[1, self.hidden]);
        let c0 = s.zeros(&[1, self.hidden]);
        let out = self.encoder.forward_from(s, x, h0, c0);
        let last = s.g.slice(out, 1, c - 1, c);
        let last = s.g.reshape(last, &[1, 2 * self.hidden]);
        (
            s.g.slice(last, 1, 0, self.hidden),
            s.g.slice(last, 1, self.hidden, 2 * self.hidden),
        )
    }

    /// Decodes attractors one step at a time from the encoder's states.
    pub fn generate<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        state: (Var, Var),
        mode: CountMode,
        n_max: usize,
    ) -> Result<AttractorSet> {
        if let CountMode::Oracle(n) = mode {
            if n == 0 || n > n_max {
                return Err(Error::InvalidArgument(format!(
                    "oracle speaker count {n} outside 1..={n_max}"
                )));
            }
        }
        let hd = self.hidden;
        let (mut h, mut c) = state;
        let zero = s.zeros(&[1, 1, hd]);
        let mut attractors = Vec::new();
        let mut logits = Vec::new();
        let mut probs = Vec::new();
        let n_est = loop {
            let out = self.decoder.forward_from(s, zero, h, c);
            let out = s.g.reshape(out, &[1, 2 * hd]);
            h = s.g.slice(out, 1, 0, hd);
            c = s.g.slice(out, 1, hd, 2 * hd);
            let logit = self.classifier.forward(s, h);
            let z = s.g.value(logit).iter().next().unwrap().to_f64_lossy();
            attractors.push(h);
            logits.push(s.g.reshape(logit, &[1]));
            probs.push(1.0 / (1.0 + (-z).exp()));
            let m = attractors.len();
            match mode {
                CountMode::Oracle(n) if m == n + 1 => break n,
                CountMode::Oracle(_) => {}
                CountMode::Inference => {
                    if probs[m - 1] < EXISTENCE_THRESHOLD {
                        break m - 1;
                    }
                    if m == n_max {
                        break n_max;
                    }
                }
            }
        };
        let logits = s.g.concat(&logits, 0);
        Ok(AttractorSet {
            attractors,
            logits,
            probs,
            n_est,
        })
    }

    /// Aggregation, optional shuffling, encoding and generation.
    pub fn forward<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        x: Var,
        mode: CountMode,
        n_max: usize,
        shuffle_seed: Option<u64>,
    ) -> Result<AttractorSet> {
        let mut rows = self.aggregate(s, x);
        if let Some(seed) = shuffle_seed {
            let perm = shuffle_permutation(s.g.shape(rows)[0], seed);
            rows = s.g.index_select(rows, 0, &perm);
        }
        let state = self.encode(s, rows);
        self.generate(s, state, mode, n_max)
    }
}

/// `Z_n = X ⊙ a_n` for the given attractors: `(1, C, K, H)` to `(n, C, K, H)`.
pub fn apply_attractors<F: Real>(s: &mut Session<'_, F>, x: Var, attractors: &[Var]) -> Result<Var> {
    if attractors.is_empty() {
        return Err(Error::NoOutputs);
    }
    let h = *s.g.shape(x).last().unwrap();
    for &a in attractors {
        if s.g.shape(a) != [1, h] {
            return Err(Error::ShapeMismatch(format!(
                "attractor {:?} does not match hidden size {h}",
                s.g.shape(a)
            )));
        }
    }
    let a = s.g.concat(attractors, 0);
    let a = s.g.reshape(a, &[attractors.len(), 1, 1, h]);
    Ok(s.g.mul(x, a))
}
