use muse_autodiff::{LstmWeights, Real, Tensor, Var};
use ndarray::IxDyn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamStore, Session};

/// Registers parameters under a dotted name prefix.
pub struct Builder<'a, F> {
    pub store: &'a mut ParamStore<F>,
    pub rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a, F: Real> Builder<'a, F> {
    pub fn new(store: &'a mut ParamStore<F>, rng: &'a mut ChaCha8Rng) -> Self {
        Self {
            store,
            rng,
            prefix: String::new(),
        }
    }

    pub fn sub(&mut self, name: &str) -> Builder<'_, F> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        Builder {
            store: &mut *self.store,
            rng: &mut *self.rng,
            prefix,
        }
    }

    fn full(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> ParamId {
        let t = Tensor::from_shape_fn(IxDyn(shape), |_| {
            F::from_f64_lossy(self.rng.random_range(-bound..=bound))
        });
        let full = self.full(name);
        self.store.add(full, t)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], v: f64) -> ParamId {
        let full = self.full(name);
        self.store
            .add(full, Tensor::from_elem(IxDyn(shape), F::from_f64_lossy(v)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, n_in: usize, n_out: usize, bias: bool) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        Self {
            w: b.uniform("w", &[n_in, n_out], bound),
            b: bias.then(|| b.uniform("b", &[n_out], bound)),
            n_in,
            n_out,
        }
    }

    /// Weights drawn with variance `gain² / n_in` and a zero bias.
    pub fn with_gain<F: Real>(b: &mut Builder<'_, F>, n_in: usize, n_out: usize, bias: bool, gain: f64) -> Self {
        let bound = gain * (3.0 / n_in as f64).sqrt();
        Self {
            w: b.uniform("w", &[n_in, n_out], bound),
            b: bias.then(|| b.constant("b", &[n_out], 0.0)),
            n_in,
            n_out,
        }
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let w = s.param(self.w);
        let b = self.b.map(|b| s.param(b));
        s.g.linear(x, w, b)
    }

    /// Overwrites the weights with an identity map (square layers only).
    pub fn set_identity<F: Real>(&self, store: &mut ParamStore<F>) {
        assert_eq!(self.n_in, self.n_out);
        let mut w = Tensor::zeros(IxDyn(&[self.n_in, self.n_out]));
        for i in 0..self.n_in {
            w[[i, i]] = F::one();
        }
        *store.get_mut(self.w) = w;
        if let Some(b) = self.b {
            store.get_mut(b).fill(F::zero());
        }
    }

    pub fn set_zero<F: Real>(&self, store: &mut ParamStore<F>) {
        store.get_mut(self.w).fill(F::zero());
        if let Some(b) = self.b {
            store.get_mut(b).fill(F::zero());
        }
    }
}

/// Layer normalization over the last axis.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new<F: Real>(b: &mut Builder<'_, F>, dim: usize) -> Self {
        Self {
            gamma: b.constant("gamma", &[dim], 1.0),
            beta: b.constant("beta", &[dim], 0.0),
        }
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let g = s.param(self.gamma);
        let b = s.param(self.beta);
        s.g.layer_norm(x, g, b, F::from_f64_lossy(Self::EPS))
    }
}

/// Normalization over every (frame, channel) position of a `T × H` feature,
/// followed by a per-channel affine map.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalLayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl GlobalLayerNorm {
    pub const EPS: f64 = 1e-8;

    pub fn new<F: Real>(b: &mut Builder<'_, F>, dim: usize) -> Self {
        Self {
            gamma: b.constant("gamma", &[dim], 1.0),
            beta: b.constant("beta", &[dim], 0.0),
        }
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let shape = s.g.shape(x).to_vec();
        let n: usize = shape.iter().product();
        let flat = s.g.reshape(x, &[1, n]);
        let ones = s.g.constant(Tensor::ones(IxDyn(&[n])));
        let zeros = s.zeros(&[n]);
        let normed = s.g.layer_norm(flat, ones, zeros, F::from_f64_lossy(Self::EPS));
        let normed = s.g.reshape(normed, &shape);
        let g = s.param(self.gamma);
        let b = s.param(self.beta);
        let scaled = s.g.mul(normed, g);
        s.g.add(scaled, b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, n_in: usize, hidden: usize) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            w_ih: b.uniform("w_ih", &[n_in, 4 * hidden], bound),
            w_hh: b.uniform("w_hh", &[hidden, 4 * hidden], bound),
            bias: b.uniform("bias", &[4 * hidden], bound),
            hidden,
        }
    }

    fn weights<F: Real>(&self, s: &mut Session<'_, F>) -> LstmWeights {
        LstmWeights {
            w_ih: s.param(self.w_ih),
            w_hh: s.param(self.w_hh),
            bias: s.param(self.bias),
        }
    }

    /// Runs over `(batch, steps, input)` from the given states and returns
    /// `(batch, steps, 2·hidden)` holding hidden then cell states.
    pub fn forward_from<F: Real>(&self, s: &mut Session<'_, F>, x: Var, h0: Var, c0: Var) -> Var {
        let w = self.weights(s);
        s.g.lstm(x, h0, c0, w)
    }

    /// Hidden-state sequence starting from zero states.
    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let batch = s.g.shape(x)[0];
        let h0 = s.zeros(&[batch, self.hidden]);
        let c0 = s.zeros(&[batch, self.hidden]);
        let out = self.forward_from(s, x, h0, c0);
        s.g.slice(out, 2, 0, self.hidden)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PRelu {
    pub alpha: ParamId,
}

impl PRelu {
    pub fn new<F: Real>(b: &mut Builder<'_, F>) -> Self {
        Self {
            alpha: b.constant("alpha", &[1], 0.25),
        }
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Var {
        let a = s.param(self.alpha);
        s.g.prelu(x, a)
    }
}
