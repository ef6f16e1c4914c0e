use ndarray::Axis;

use super::{as_matrix, as_rows, with_shape};
use crate::{Graph, Real, Var};

impl<F: Real> Graph<F> {
    /// Plain 2-D matrix product.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = as_matrix(self.value(a)).dot(&as_matrix(self.value(b))).into_dyn();
        self.record(&[a, b], value, |ctx| {
            let g = as_matrix(ctx.grad);
            let (va, vb) = (as_matrix(ctx.inputs[0]), as_matrix(ctx.inputs[1]));
            vec![
                ctx.needs[0].then(|| g.dot(&vb.t()).into_dyn()),
                ctx.needs[1].then(|| va.t().dot(&g).into_dyn()),
            ]
        })
    }

    /// Affine map over the last axis: `x[..., in] · w[in, out] + b[out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let x_shape = self.shape(x).to_vec();
        let w_val = as_matrix(self.value(w));
        assert_eq!(
            x_shape.last().copied(),
            Some(w_val.nrows()),
            "linear: input width does not match weight rows"
        );
        let mut y = as_rows(self.value(x)).dot(&w_val);
        if let Some(b) = b {
            let bias = self.value(b);
            assert_eq!(bias.len(), y.ncols(), "linear: bias width mismatch");
            for mut row in y.rows_mut() {
                row.iter_mut().zip(bias.iter()).for_each(|(v, &bb)| *v += bb);
            }
        }
        let mut out_shape = x_shape.clone();
        *out_shape.last_mut().unwrap() = y.ncols();
        let value = with_shape(y.into_dyn(), &out_shape);

        let mut inputs = vec![x, w];
        inputs.extend(b);
        let bias_shape = b.map(|b| self.shape(b).to_vec());
        self.record(&inputs, value, move |ctx| {
            let g = as_rows(ctx.grad);
            let xr = as_rows(ctx.inputs[0]);
            let w = as_matrix(ctx.inputs[1]);
            let mut out = vec![
                ctx.needs[0].then(|| with_shape(g.dot(&w.t()).into_dyn(), &x_shape)),
                ctx.needs[1].then(|| xr.t().dot(&g).into_dyn()),
            ];
            if let Some(bs) = &bias_shape {
                out.push(ctx.needs[2].then(|| with_shape(g.sum_axis(Axis(0)).into_dyn(), bs)));
            }
            out
        })
    }
}
