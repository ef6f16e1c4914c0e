use std::f64::consts::SQRT_2;

use muse_autodiff::{Real, Var};

use super::config::ModelConfig;
use super::frontend::{dims, FeatureExtractor};
use crate::error::{Error, Result};
use crate::nn::dpt::DptBlock;
use crate::nn::{Builder, Linear, PRelu, ParamStore, Session};

/// `linear → ReLU → linear → ReLU → linear`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: [Linear; 3],
}

impl Mlp {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, n_in: usize, hidden: usize) -> Self {
        Self {
            layers: [
                Linear::with_gain(&mut b.sub("l0"), n_in, hidden, true, SQRT_2),
                Linear::with_gain(&mut b.sub("l1"), hidden, hidden, true, SQRT_2),
                Linear::with_gain(&mut b.sub("l2"), hidden, hidden, true, SQRT_2),
            ],
        }
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let x = self.layers[0].forward(s, x);
        let x = s.g.relu(x);
        let x = self.layers[1].forward(s, x);
        let x = s.g.relu(x);
        self.layers[2].forward(s, x)
    }
}

/// Attention over the separated speakers, driven by an enrollment embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub mlp_tv: Mlp,
    pub mlp_ti: Mlp,
    pub mlp_aux: Mlp,
    pub w_tv: Linear,
    pub w_ti: Linear,
    /// Carries the shared bias `b`.
    pub w_aux: Linear,
    pub w: Linear,
}

pub struct SelectionOutput {
    /// `(1, C, K, H)`
    pub target: Var,
    /// `(N, C, K, 1)`, summing to one over speakers.
    pub weights: Var,
}

impl Selection {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, cfg: &ModelConfig) -> Self {
        let (h, hs) = (cfg.hidden, cfg.selection_hidden);
        Self {
            mlp_tv: Mlp::new(&mut b.sub("mlp_tv"), h, hs),
            mlp_ti: Mlp::new(&mut b.sub("mlp_ti"), h, hs),
            mlp_aux: Mlp::new(&mut b.sub("mlp_aux"), h, hs),
            w_tv: Linear::with_gain(&mut b.sub("w_tv"), hs, hs, false, 1.0),
            w_ti: Linear::with_gain(&mut b.sub("w_ti"), hs, hs, false, 1.0),
            w_aux: Linear::with_gain(&mut b.sub("w_aux"), hs, hs, true, 1.0),
            w: Linear::with_gain(&mut b.sub("w"), hs, 1, false, 1.0),
        }
    }

    /// `z (N, C, K, H)` and `u (1, C', K, H)`.
    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, z: Var, u: Var) -> Result<SelectionOutput> {
        let n = s.g.shape(z)[0];
        if n == 0 {
            return Err(Error::NoOutputs);
        }
        let s_tv = self.mlp_tv.forward(s, z);
        let ti = self.mlp_ti.forward(s, z);
        let s_ti = s.g.mean_axes(ti, &[1, 2], true);
        let aux = self.mlp_aux.forward(s, u);
        let e_aux = s.g.mean_axes(aux, &[1, 2], true);
        let a = self.w_tv.forward(s, s_tv);
        let b = self.w_ti.forward(s, s_ti);
        let c = self.w_aux.forward(s, e_aux);
        let pre = s.g.add(a, b);
        let pre = s.g.add(pre, c);
        let act = s.g.tanh(pre);
        let d = self.w.forward(s, act);
        let weights = s.g.softmax(d, 0);
        let mixed = s.g.mul(weights, z);
        let target = s.g.sum_axes(mixed, &[0], true);
        Ok(SelectionOutput { target, weights })
    }
}

/// `linear → PReLU → γ(u')·x + β(u') → linear`, then a dual-path block.
#[derive(Clone, Debug, PartialEq)]
pub struct FilmBlock {
    pub pre: Linear,
    pub prelu: PRelu,
    pub gamma: Linear,
    pub beta: Linear,
    pub post: Linear,
    pub dpt: DptBlock,
}

impl FilmBlock {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, cfg: &ModelConfig) -> Self {
        let h = cfg.hidden;
        Self {
            pre: Linear::new(&mut b.sub("pre"), h, h, true),
            prelu: PRelu::new(&mut b.sub("prelu")),
            gamma: Linear::new(&mut b.sub("gamma"), h, h, true),
            beta: Linear::new(&mut b.sub("beta"), h, h, true),
            post: Linear::new(&mut b.sub("post"), h, h, true),
            dpt: DptBlock::new(&mut b.sub("dpt"), dims(cfg)),
        }
    }

    /// `x (1, C, K, H)` conditioned on `u_mean (1, H)`.
    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var, u_mean: Var) -> Var {
        let y = self.pre.forward(s, x);
        let y = self.prelu.forward(s, y);
        let g = self.gamma.forward(s, u_mean);
        let b = self.beta.forward(s, u_mean);
        let y = s.g.mul(y, g);
        let y = s.g.add(y, b);
        let y = self.post.forward(s, y);
        self.dpt.forward(s, y)
    }

    /// Identity FiLM: unit scale, zero shift and identity linear maps.
    pub fn set_identity<F: Real>(&self, store: &mut ParamStore<F>) {
        self.pre.set_identity(store);
        self.post.set_identity(store);
        store.get_mut(self.gamma.w).fill(F::zero());
        store.get_mut(self.gamma.b.unwrap()).fill(F::one());
        self.beta.set_zero(store);
        store.get_mut(self.prelu.alpha).fill(F::one());
        self.dpt.set_identity(store);
    }
}

/// Enrollment network, speaker selection and conditional refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct Tse {
    pub aux: FeatureExtractor,
    pub selection: Selection,
    pub refine: Vec<FilmBlock>,
}

pub struct TseOutput {
    pub refined: Var,
    pub selection: SelectionOutput,
}

impl Tse {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, cfg: &ModelConfig) -> Self {
        Self {
            aux: FeatureExtractor::new(&mut b.sub("aux"), cfg, cfg.n_aux_blocks),
            selection: Selection::new(&mut b.sub("selection"), cfg),
            refine: (0..cfg.n_refine_blocks)
                .map(|i| FilmBlock::new(&mut b.sub(&format!("refine{i}")), cfg))
                .collect(),
        }
    }

    /// Enrollment embedding `(1, C', K, H)` from the shared encoder's output.
    pub fn embed<F: Real>(&self, s: &mut Session<'_, F>, enc_u: Var) -> Result<Var> {
        Ok(self.aux.forward(s, enc_u)?.0)
    }

    pub fn refine<F: Real>(&self, s: &mut Session<'_, F>, z_tgt: Var, u: Var) -> Var {
        let h = *s.g.shape(u).last().unwrap();
        let u_mean = s.g.mean_axes(u, &[0, 1, 2], false);
        let u_mean = s.g.reshape(u_mean, &[1, h]);
        let mut x = z_tgt;
        for blk in &self.refine {
            x = blk.forward(s, x, u_mean);
        }
        x
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, z: Var, u: Var) -> Result<TseOutput> {
        let selection = self.selection.forward(s, z, u)?;
        let refined = self.refine(s, selection.target, u);
        Ok(TseOutput { refined, selection })
    }
}
