use ndarray::{IxDyn, Zip};

use super::sum_to_shape;
use crate::{Graph, Real, Tensor, Var};

impl<F: Real> Graph<F> {
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        self.record(&[a, b], value, move |ctx| {
            vec![
                ctx.needs[0].then(|| sum_to_shape(ctx.grad, &sa)),
                ctx.needs[1].then(|| sum_to_shape(ctx.grad, &sb)),
            ]
        })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        self.record(&[a, b], value, move |ctx| {
            vec![
                ctx.needs[0].then(|| sum_to_shape(ctx.grad, &sa)),
                ctx.needs[1].then(|| sum_to_shape(&ctx.grad.mapv(|g| -g), &sb)),
            ]
        })
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        self.record(&[a, b], value, move |ctx| {
            let (va, vb) = (ctx.inputs[0], ctx.inputs[1]);
            vec![
                ctx.needs[0].then(|| sum_to_shape(&(ctx.grad * vb), &sa)),
                ctx.needs[1].then(|| sum_to_shape(&(ctx.grad * va), &sb)),
            ]
        })
    }

    pub fn scale(&mut self, a: Var, c: F) -> Var {
        let value = self.value(a) * c;
        self.record(&[a], value, move |ctx| vec![Some(ctx.grad * c)])
    }

    pub fn add_scalar(&mut self, a: Var, c: F) -> Var {
        let value = self.value(a) + c;
        self.record(&[a], value, |ctx| vec![Some(ctx.grad.clone())])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -F::one())
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| if x > F::zero() { x } else { F::zero() });
        self.record(&[a], value, |ctx| {
            let mut g = ctx.grad.clone();
            Zip::from(&mut g).and(ctx.inputs[0]).for_each(|g, &x| {
                if x <= F::zero() {
                    *g = F::zero();
                }
            });
            vec![Some(g)]
        })
    }

    /// Parametric ReLU with a single learned negative slope (`alpha` has one element).
    pub fn prelu(&mut self, x: Var, alpha: Var) -> Var {
        assert_eq!(self.value(alpha).len(), 1, "prelu slope must be a single value");
        let a = *self.value(alpha).iter().next().unwrap();
        let value = self.value(x).mapv(|v| if v > F::zero() { v } else { a * v });
        let alpha_shape = self.shape(alpha).to_vec();
        self.record(&[x, alpha], value, move |ctx| {
            let a = *ctx.inputs[1].iter().next().unwrap();
            let gx = ctx.needs[0].then(|| {
                let mut g = ctx.grad.clone();
                Zip::from(&mut g).and(ctx.inputs[0]).for_each(|g, &v| {
                    if v <= F::zero() {
                        *g *= a;
                    }
                });
                g
            });
            let ga = ctx.needs[1].then(|| {
                let mut s = F::zero();
                Zip::from(ctx.grad).and(ctx.inputs[0]).for_each(|&g, &v| {
                    if v <= F::zero() {
                        s += g * v;
                    }
                });
                Tensor::from_elem(IxDyn(&alpha_shape), s)
            });
            vec![gx, ga]
        })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.record(&[a], value, |ctx| {
            let mut g = ctx.grad.clone();
            Zip::from(&mut g)
                .and(ctx.output)
                .for_each(|g, &y| *g *= y * (F::one() - y));
            vec![Some(g)]
        })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.tanh());
        self.record(&[a], value, |ctx| {
            let mut g = ctx.grad.clone();
            Zip::from(&mut g)
                .and(ctx.output)
                .for_each(|g, &y| *g *= F::one() - y * y);
            vec![Some(g)]
        })
    }

    /// `ln(1 + e^x)`, computed without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(softplus);
        self.record(&[a], value, |ctx| {
            let mut g = ctx.grad.clone();
            Zip::from(&mut g)
                .and(ctx.inputs[0])
                .for_each(|g, &x| *g *= sigmoid(x));
            vec![Some(g)]
        })
    }
}

pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub(crate) fn softplus<F: Real>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
