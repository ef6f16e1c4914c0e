use ndarray::{Axis, IxDyn};

use super::standard;
use crate::{Graph, Real, Tensor, Var};

impl<F: Real> Graph<F> {
    /// Sum over every element; the result is a 0-d tensor.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let value = Tensor::from_elem(IxDyn(&[]), s);
        let shape = self.shape(a).to_vec();
        self.record(&[a], value, move |ctx| {
            let g = *ctx.grad.iter().next().unwrap();
            vec![Some(Tensor::from_elem(IxDyn(&shape), g))]
        })
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1);
        let s = self.sum_all(a);
        self.scale(s, F::one() / F::from_usize(n).unwrap())
    }

    /// Sums over `axes`, optionally keeping them as length-1 axes.
    pub fn sum_axes(&mut self, a: Var, axes: &[usize], keepdims: bool) -> Var {
        let in_shape = self.shape(a).to_vec();
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut value = self.value(a).clone();
        for &ax in sorted.iter().rev() {
            value = value.sum_axis(Axis(ax));
            if keepdims {
                value = value.insert_axis(Axis(ax));
            }
        }
        let kept_shape: Vec<usize> = in_shape
            .iter()
            .enumerate()
            .map(|(i, &d)| if sorted.contains(&i) { 1 } else { d })
            .collect();
        self.record(&[a], standard(value), move |ctx| {
            let g = ctx
                .grad
                .view()
                .into_shape_with_order(IxDyn(&kept_shape))
                .expect("reduced gradient reshapes to kept dims");
            let full = g
                .broadcast(IxDyn(&in_shape))
                .expect("broadcast back to input")
                .to_owned();
            vec![Some(full)]
        })
    }

    pub fn mean_axes(&mut self, a: Var, axes: &[usize], keepdims: bool) -> Var {
        let shape = self.shape(a);
        let count: usize = axes.iter().map(|&ax| shape[ax]).product();
        let s = self.sum_axes(a, axes, keepdims);
        self.scale(s, F::one() / F::from_usize(count.max(1)).unwrap())
    }
}
