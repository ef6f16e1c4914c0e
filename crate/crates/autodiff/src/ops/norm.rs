use ndarray::{Array1, Axis, Zip};

use super::{as_rows, with_shape};
use crate::{Graph, Real, Tensor, Var};

impl<F: Real> Graph<F> {
    /// Softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Var {
        let mut value = self.value(a).clone();
        for mut lane in value.lanes_mut(Axis(axis)) {
            let m = lane.iter().fold(F::neg_infinity(), |m, &x| m.max(x));
            lane.mapv_inplace(|x| (x - m).exp());
            let s: F = lane.sum();
            lane.mapv_inplace(|x| x / s);
        }
        self.record(&[a], value, move |ctx| {
            let mut g = ctx.grad.clone();
            Zip::from(g.lanes_mut(Axis(axis)))
                .and(ctx.output.lanes(Axis(axis)))
                .for_each(|mut g, y| {
                    let dot: F = g.iter().zip(y.iter()).map(|(&a, &b)| a * b).sum();
                    g.iter_mut().zip(y.iter()).for_each(|(g, &y)| *g = y * (*g - dot));
                });
            vec![Some(g)]
        })
    }

    /// Layer normalization over the last axis with per-feature affine.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: F) -> Var {
        let shape = self.shape(x).to_vec();
        let xr = as_rows(self.value(x));
        let (n, d) = xr.dim();
        let df = F::from_usize(d).unwrap();
        let mut xhat = xr.to_owned();
        let mut inv = Array1::<F>::zeros(n);
        for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv.iter_mut()) {
            let mean = row.sum() / df;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / df;
            *inv = F::one() / (var + eps).sqrt();
            let s = *inv;
            row.mapv_inplace(|v| (v - mean) * s);
        }
        let g_val = flat(self.value(gamma), d);
        let b_val = flat(self.value(beta), d);
        let mut y = xhat.clone();
        for mut row in y.rows_mut() {
            Zip::from(&mut row)
                .and(&g_val)
                .and(&b_val)
                .for_each(|v, &g, &b| *v = *v * g + b);
        }
        let value = with_shape(y.into_dyn(), &shape);
        let param_shape = self.shape(gamma).to_vec();
        self.record(&[x, gamma, beta], value, move |ctx| {
            let g = as_rows(ctx.grad);
            let gamma = flat(ctx.inputs[1], d);
            let gx = ctx.needs[0].then(|| {
                let mut gx = g.to_owned();
                for ((mut gx_row, xh_row), &s) in
                    gx.rows_mut().into_iter().zip(xhat.rows()).zip(inv.iter())
                {
                    Zip::from(&mut gx_row).and(&gamma).for_each(|v, &gm| *v *= gm);
                    let sum_g: F = gx_row.sum();
                    let sum_gx: F = gx_row.iter().zip(xh_row.iter()).map(|(&a, &b)| a * b).sum();
                    Zip::from(&mut gx_row).and(&xh_row).for_each(|v, &xh| {
                        *v = s * (*v - sum_g / df - xh * sum_gx / df);
                    });
                }
                with_shape(gx.into_dyn(), &shape)
            });
            let ggamma = ctx.needs[1].then(|| {
                let prod = &g * &xhat;
                with_shape(prod.sum_axis(Axis(0)).into_dyn(), &param_shape)
            });
            let gbeta = ctx.needs[2].then(|| with_shape(g.sum_axis(Axis(0)).into_dyn(), &param_shape));
            vec![gx, ggamma, gbeta]
        })
    }
}


fn flat<F: Real>(t: &Tensor<F>, d: usize) -> ndarray::ArrayView1<'_, F> {
    t.view()
        .into_shape_with_order(d)
        .expect("normalization parameters have one entry per feature")
}
