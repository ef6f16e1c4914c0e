use muse_autodiff::{Real, Var};

use super::layers::{Builder, LayerNorm, Linear, Lstm};
use super::params::{ParamStore, Session};

/// Width settings shared by every dual-path block of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DptDims {
    pub hidden: usize,
    pub heads: usize,
    pub ffn: usize,
}

/// Sequence layer: self-attention sublayer then a recurrent feed-forward
/// sublayer, each pre-normalized and residual.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceLayer {
    pub norm_att: LayerNorm,
    pub qkv: Linear,
    pub out: Linear,
    pub norm_ff: LayerNorm,
    pub lstm: Lstm,
    pub ff_out: Linear,
    pub heads: usize,
    pub hidden: usize,
}

impl SequenceLayer {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, d: DptDims) -> Self {
        Self {
            norm_att: LayerNorm::new(&mut b.sub("norm_att"), d.hidden),
            qkv: Linear::new(&mut b.sub("qkv"), d.hidden, 3 * d.hidden, true),
            out: Linear::new(&mut b.sub("out"), d.hidden, d.hidden, true),
            norm_ff: LayerNorm::new(&mut b.sub("norm_ff"), d.hidden),
            lstm: Lstm::new(&mut b.sub("lstm"), d.hidden, d.ffn),
            ff_out: Linear::new(&mut b.sub("ff_out"), d.ffn, d.hidden, true),
            heads: d.heads,
            hidden: d.hidden,
        }
    }

    /// `x`: `(batch, steps, hidden)`, sequences along `steps`.
    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let h = self.hidden;
        let n = self.norm_att.forward(s, x);
        let qkv = self.qkv.forward(s, n);
        let q = s.g.slice(qkv, 2, 0, h);
        let k = s.g.slice(qkv, 2, h, 2 * h);
        let v = s.g.slice(qkv, 2, 2 * h, 3 * h);
        let att = s.g.attention(q, k, v, self.heads);
        let att = self.out.forward(s, att);
        let y = s.g.add(x, att);
        let n = self.norm_ff.forward(s, y);
        let r = self.lstm.forward(s, n);
        let r = s.g.relu(r);
        let r = self.ff_out.forward(s, r);
        s.g.add(y, r)
    }

    /// Zeroes both residual branches so the layer is the identity.
    pub fn set_identity<F: Real>(&self, store: &mut ParamStore<F>) {
        self.out.set_zero(store);
        self.ff_out.set_zero(store);
    }
}

/// Dual-path block over speaker-stacked chunk features `(N, C, K, H)`:
/// an intra-chunk layer along `K` then an inter-chunk layer along `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct DptBlock {
    pub intra: SequenceLayer,
    pub inter: SequenceLayer,
}

impl DptBlock {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, d: DptDims) -> Self {
        Self {
            intra: SequenceLayer::new(&mut b.sub("intra"), d),
            inter: SequenceLayer::new(&mut b.sub("inter"), d),
        }
    }

    pub fn intra_forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let shape = s.g.shape(x).to_vec();
        let (n, c, k, h) = (shape[0], shape[1], shape[2], shape[3]);
        let r = s.g.reshape(x, &[n * c, k, h]);
        let r = self.intra.forward(s, r);
        s.g.reshape(r, &[n, c, k, h])
    }

    pub fn inter_forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let shape = s.g.shape(x).to_vec();
        let (n, c, k, h) = (shape[0], shape[1], shape[2], shape[3]);
        let t = s.g.permute(x, &[0, 2, 1, 3]);
        let t = s.g.reshape(t, &[n * k, c, h]);
        let t = self.inter.forward(s, t);
        let t = s.g.reshape(t, &[n, k, c, h]);
        s.g.permute(t, &[0, 2, 1, 3])
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let y = self.intra_forward(s, x);
        self.inter_forward(s, y)
    }

    pub fn set_identity<F: Real>(&self, store: &mut ParamStore<F>) {
        self.intra.set_identity(store);
        self.inter.set_identity(store);
    }
}

pub fn dpt_stack<F: Real>(b: &mut Builder<'_, F>, n: usize, d: DptDims) -> Vec<DptBlock> {
    (0..n)
        .map(|i| DptBlock::new(&mut b.sub(&format!("block{i}")), d))
        .collect()
}

pub fn run_stack<F: Real>(blocks: &[DptBlock], s: &mut Session<'_, F>, mut x: Var) -> Var {
    for blk in blocks {
        x = blk.forward(s, x);
    }
    x
}
