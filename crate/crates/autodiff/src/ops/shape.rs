use ndarray::{Axis, IxDyn, Slice};

use super::{standard, with_shape};
use crate::{Graph, Real, Tensor, Var};

impl<F: Real> Graph<F> {
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let in_shape = self.shape(a).to_vec();
        assert_eq!(
            in_shape.iter().product::<usize>(),
            shape.iter().product::<usize>(),
            "reshape must preserve the element count"
        );
        let value = with_shape(self.value(a).clone(), shape);
        self.record(&[a], value, move |ctx| {
            vec![Some(with_shape(ctx.grad.clone(), &in_shape))]
        })
    }

    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Var {
        let value = standard(self.value(a).clone().permuted_axes(IxDyn(axes)));
        let mut inverse = vec![0; axes.len()];
        for (i, &ax) in axes.iter().enumerate() {
            inverse[ax] = i;
        }
        self.record(&[a], value, move |ctx| {
            vec![Some(standard(ctx.grad.clone().permuted_axes(IxDyn(&inverse))))]
        })
    }

    /// `a[.., start..end, ..]` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Var {
        let value = standard(
            self.value(a)
                .slice_axis(Axis(axis), Slice::from(start..end))
                .to_owned(),
        );
        let in_shape = self.shape(a).to_vec();
        self.record(&[a], value, move |ctx| {
            let mut g = Tensor::zeros(IxDyn(&in_shape));
            g.slice_axis_mut(Axis(axis), Slice::from(start..end))
                .assign(ctx.grad);
            vec![Some(g)]
        })
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Var {
        let views: Vec<_> = xs.iter().map(|&v| self.value(v).view()).collect();
        let value = ndarray::concatenate(Axis(axis), &views).expect("concat shapes agree");
        let sizes: Vec<usize> = xs.iter().map(|&v| self.shape(v)[axis]).collect();
        self.record(xs, standard(value), move |ctx| {
            let mut start = 0;
            sizes
                .iter()
                .zip(ctx.needs)
                .map(|(&n, &need)| {
                    let s = start;
                    start += n;
                    need.then(|| {
                        standard(
                            ctx.grad
                                .slice_axis(Axis(axis), Slice::from(s..s + n))
                                .to_owned(),
                        )
                    })
                })
                .collect()
        })
    }

    /// Stacks equally shaped tensors along a new axis.
    pub fn stack(&mut self, xs: &[Var], axis: usize) -> Var {
        let views: Vec<_> = xs.iter().map(|&v| self.value(v).view()).collect();
        let value = ndarray::stack(Axis(axis), &views).expect("stack shapes agree");
        self.record(xs, standard(value), move |ctx| {
            ctx.needs
                .iter()
                .enumerate()
                .map(|(i, &need)| {
                    need.then(|| standard(ctx.grad.index_axis(Axis(axis), i).to_owned()))
                })
                .collect()
        })
    }

    /// Gathers lanes `indices` along `axis` (indices may repeat).
    pub fn index_select(&mut self, a: Var, axis: usize, indices: &[usize]) -> Var {
        let value = standard(self.value(a).select(Axis(axis), indices));
        let in_shape = self.shape(a).to_vec();
        let indices = indices.to_vec();
        self.record(&[a], value, move |ctx| {
            let mut g = Tensor::zeros(IxDyn(&in_shape));
            for (j, &i) in indices.iter().enumerate() {
                let src = ctx.grad.index_axis(Axis(axis), j);
                let mut dst = g.index_axis_mut(Axis(axis), i);
                dst += &src;
            }
            vec![Some(g)]
        })
    }

    /// Builds an output whose lane `j` along `axis` is input lane `idx[j]`,
    /// or zeros for `None`.
    pub fn gather(&mut self, a: Var, axis: usize, idx: &[Option<usize>]) -> Var {
        let in_shape = self.shape(a).to_vec();
        let mut out_shape = in_shape.clone();
        out_shape[axis] = idx.len();
        let mut value = Tensor::zeros(IxDyn(&out_shape));
        {
            let src = self.value(a);
            for (j, i) in idx.iter().enumerate() {
                if let Some(i) = *i {
                    value
                        .index_axis_mut(Axis(axis), j)
                        .assign(&src.index_axis(Axis(axis), i));
                }
            }
        }
        let idx = idx.to_vec();
        self.record(&[a], value, move |ctx| {
            vec![Some(scatter_lanes(ctx.grad, axis, &idx, in_shape[axis]))]
        })
    }

    /// Adjoint of [`Graph::gather`]: input lane `j` is added into output
    /// lane `idx[j]` of an `out_len`-long axis; `None` lanes are dropped.
    pub fn scatter_add(&mut self, a: Var, axis: usize, idx: &[Option<usize>], out_len: usize) -> Var {
        assert_eq!(self.shape(a)[axis], idx.len(), "scatter index length");
        let value = scatter_lanes(self.value(a), axis, idx, out_len);
        let idx = idx.to_vec();
        self.record(&[a], value, move |ctx| {
            let mut out_shape = ctx.grad.shape().to_vec();
            out_shape[axis] = idx.len();
            let mut g = Tensor::zeros(IxDyn(&out_shape));
            for (j, i) in idx.iter().enumerate() {
                if let Some(i) = *i {
                    g.index_axis_mut(Axis(axis), j)
                        .assign(&ctx.grad.index_axis(Axis(axis), i));
                }
            }
            vec![Some(g)]
        })
    }
}

fn scatter_lanes<F: Real>(src: &Tensor<F>, axis: usize, idx: &[Option<usize>], out_len: usize) -> Tensor<F> {
    let mut shape = src.shape().to_vec();
    shape[axis] = out_len;
    let mut out = Tensor::zeros(IxDyn(&shape));
    for (j, i) in idx.iter().enumerate() {
        if let Some(i) = *i {
            let mut dst = out.index_axis_mut(Axis(axis), i);
            dst += &src.index_axis(Axis(axis), j);
        }
    }
    out
}
