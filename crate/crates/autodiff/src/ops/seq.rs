use ndarray::{s, Array2, Array3, Array4, Axis, Ix3};

use super::elementwise::sigmoid;
use super::{as_matrix, standard, with_shape};
use crate::{Graph, Real, Tensor, Var};

/// Weights of one unidirectional LSTM layer, gate order `i, f, g, o`.
#[derive(Clone, Copy, Debug)]
pub struct LstmWeights {
    /// `(input, 4·hidden)`
    pub w_ih: Var,
    /// `(hidden, 4·hidden)`
    pub w_hh: Var,
    /// `(4·hidden)`
    pub bias: Var,
}

impl<F: Real> Graph<F> {
    /// Runs an LSTM over `x` of shape `(batch, steps, input)` starting from
    /// `h0`, `c0` of shape `(batch, hidden)`.
    ///
    /// Returns `(batch, steps, 2·hidden)`: the hidden state in the first half
    /// of the last axis and the cell state in the second half.
    pub fn lstm(&mut self, x: Var, h0: Var, c0: Var, w: LstmWeights) -> Var {
        let x3 = self
            .value(x)
            .view()
            .into_dimensionality::<Ix3>()
            .expect("lstm input is (batch, steps, input)");
        let (batch, steps, n_in) = x3.dim();
        let w_ih = as_matrix(self.value(w.w_ih));
        let w_hh = as_matrix(self.value(w.w_hh));
        let hidden = w_hh.nrows();
        assert_eq!(w_ih.dim(), (n_in, 4 * hidden), "lstm w_ih shape");
        assert_eq!(w_hh.ncols(), 4 * hidden, "lstm w_hh shape");
        assert_eq!(self.shape(h0), &[batch, hidden], "lstm h0 shape");
        assert_eq!(self.shape(c0), &[batch, hidden], "lstm c0 shape");
        let bias = self.value(w.bias).as_standard_layout().into_owned();
        let bias = bias.as_slice().unwrap();

        // time-major copy so every step reads contiguous rows
        let xt = x3.permuted_axes([1, 0, 2]).as_standard_layout().into_owned();
        let x_rows = xt.view().into_shape_with_order((steps * batch, n_in)).unwrap();
        let mut gates = x_rows.dot(&w_ih);
        for mut row in gates.rows_mut() {
            row.iter_mut().zip(bias).for_each(|(v, &b)| *v += b);
        }
        let mut gates = gates.into_shape_with_order((steps, batch, 4 * hidden)).unwrap();

        let mut hs = Array3::<F>::zeros((steps, batch, hidden));
        let mut cs = Array3::<F>::zeros((steps, batch, hidden));
        let mut h = as_matrix(self.value(h0)).to_owned();
        let mut c = as_matrix(self.value(c0)).to_owned();
        for t in 0..steps {
            let rec = h.dot(&w_hh);
            let mut z = gates.index_axis_mut(Axis(0), t);
            z += &rec;
            let z = z.as_slice_mut().unwrap();
            let c_sl = c.as_slice_mut().unwrap();
            let h_sl = h.as_slice_mut().unwrap();
            for b in 0..batch {
                let zr = &mut z[b * 4 * hidden..(b + 1) * 4 * hidden];
                for j in 0..hidden {
                    let i_g = sigmoid(zr[j]);
                    let f_g = sigmoid(zr[hidden + j]);
                    let g_g = zr[2 * hidden + j].tanh();
                    let o_g = sigmoid(zr[3 * hidden + j]);
                    zr[j] = i_g;
                    zr[hidden + j] = f_g;
                    zr[2 * hidden + j] = g_g;
                    zr[3 * hidden + j] = o_g;
                    let cn = f_g * c_sl[b * hidden + j] + i_g * g_g;
                    c_sl[b * hidden + j] = cn;
                    h_sl[b * hidden + j] = o_g * cn.tanh();
                }
            }
            hs.index_axis_mut(Axis(0), t).assign(&h);
            cs.index_axis_mut(Axis(0), t).assign(&c);
        }

        let mut out = Array3::<F>::zeros((batch, steps, 2 * hidden));
        out.slice_mut(s![.., .., ..hidden])
            .assign(&hs.view().permuted_axes([1, 0, 2]));
        out.slice_mut(s![.., .., hidden..])
            .assign(&cs.view().permuted_axes([1, 0, 2]));
        let x_shape = vec![batch, steps, n_in];
        let bias_shape = self.shape(w.bias).to_vec();

        self.record(
            &[x, h0, c0, w.w_ih, w.w_hh, w.bias],
            out.into_dyn(),
            move |ctx| {
                let g = ctx
                    .grad
                    .view()
                    .into_dimensionality::<Ix3>()
                    .unwrap()
                    .permuted_axes([1, 0, 2]);
                let w_ih = as_matrix(ctx.inputs[3]);
                let w_hh = as_matrix(ctx.inputs[4]);
                let c0 = as_matrix(ctx.inputs[2]);
                let h0 = as_matrix(ctx.inputs[1]);
                let mut dz = Array3::<F>::zeros((steps, batch, 4 * hidden));
                let mut dh_next = Array2::<F>::zeros((batch, hidden));
                let mut dc_next = Array2::<F>::zeros((batch, hidden));
                let one = F::one();
                for t in (0..steps).rev() {
                    let gt = g.index_axis(Axis(0), t);
                    let act = gates.index_axis(Axis(0), t);
                    let act = act.as_slice().unwrap();
                    let ct = cs.index_axis(Axis(0), t);
                    let ct = ct.as_slice().unwrap();
                    let c_prev = if t > 0 {
                        cs.index_axis(Axis(0), t - 1).to_owned()
                    } else {
                        c0.to_owned()
                    };
                    let c_prev = c_prev.as_slice().unwrap();
                    let mut dzt = dz.index_axis_mut(Axis(0), t);
                    let dzt = dzt.as_slice_mut().unwrap();
                    let dh_sl = dh_next.as_slice().unwrap();
                    let dc_sl = dc_next.as_slice_mut().unwrap();
                    for b in 0..batch {
                        let ar = &act[b * 4 * hidden..(b + 1) * 4 * hidden];
                        let dr = &mut dzt[b * 4 * hidden..(b + 1) * 4 * hidden];
                        for j in 0..hidden {
                            let k = b * hidden + j;
                            let (i_g, f_g, g_g, o_g) =
                                (ar[j], ar[hidden + j], ar[2 * hidden + j], ar[3 * hidden + j]);
                            let dh = gt[[b, j]] + dh_sl[k];
                            let tc = ct[k].tanh();
                            let dc = gt[[b, hidden + j]] + dc_sl[k] + dh * o_g * (one - tc * tc);
                            let d_o = dh * tc;
                            let d_i = dc * g_g;
                            let d_g = dc * i_g;
                            let d_f = dc * c_prev[k];
                            dc_sl[k] = dc * f_g;
                            dr[j] = d_i * i_g * (one - i_g);
                            dr[hidden + j] = d_f * f_g * (one - f_g);
                            dr[2 * hidden + j] = d_g * (one - g_g * g_g);
                            dr[3 * hidden + j] = d_o * o_g * (one - o_g);
                        }
                    }
                    dh_next = dz.index_axis(Axis(0), t).dot(&w_hh.t());
                }
                let dz_rows = dz.view().into_shape_with_order((steps * batch, 4 * hidden)).unwrap();
                let dx = ctx.needs[0].then(|| {
                    let d = dz_rows.dot(&w_ih.t());
                    let d = d.into_shape_with_order((steps, batch, n_in)).unwrap();
                    with_shape(
                        standard(d.permuted_axes([1, 0, 2]).into_dyn()),
                        &x_shape,
                    )
                });
                let dw_ih = ctx.needs[3].then(|| {
                    let x_rows = xt.view().into_shape_with_order((steps * batch, n_in)).unwrap();
                    x_rows.t().dot(&dz_rows).into_dyn()
                });
                let dw_hh = ctx.needs[4].then(|| {
                    let mut h_prev = Array3::<F>::zeros((steps, batch, hidden));
                    h_prev.index_axis_mut(Axis(0), 0).assign(&h0);
                    if steps > 1 {
                        h_prev.slice_mut(s![1.., .., ..]).assign(&hs.slice(s![..steps - 1, .., ..]));
                    }
                    let hp = h_prev.into_shape_with_order((steps * batch, hidden)).unwrap();
                    hp.t().dot(&dz_rows).into_dyn()
                });
                let db = ctx
                    .needs[5]
                    .then(|| with_shape(dz_rows.sum_axis(Axis(0)).into_dyn(), &bias_shape));
                vec![
                    dx,
                    ctx.needs[1].then(|| dh_next.clone().into_dyn()),
                    ctx.needs[2].then(|| dc_next.clone().into_dyn()),
                    dw_ih,
                    dw_hh,
                    db,
                ]
            },
        )
    }

    /// Scaled dot-product attention core over `(batch, steps, dim)` inputs
    /// split into `heads` equal slices of the last axis.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize) -> Var {
        let (batch, steps, dim) = dims3(self.value(q));
        assert_eq!(dims3(self.value(k)), (batch, steps, dim), "attention k shape");
        assert_eq!(dims3(self.value(v)), (batch, steps, dim), "attention v shape");
        assert!(heads > 0 && dim % heads == 0, "dim must divide into heads");
        let dh = dim / heads;
        let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
        let q3 = view3(self.value(q));
        let k3 = view3(self.value(k));
        let v3 = view3(self.value(v));
        let mut probs = Array4::<F>::zeros((batch, heads, steps, steps));
        let mut out = Array3::<F>::zeros((batch, steps, dim));
        for b in 0..batch {
            for hd in 0..heads {
                let cols = hd * dh..(hd + 1) * dh;
                let qh = q3.slice(s![b, .., cols.clone()]);
                let kh = k3.slice(s![b, .., cols.clone()]);
                let vh = v3.slice(s![b, .., cols.clone()]);
                let mut p = qh.dot(&kh.t());
                for mut row in p.rows_mut() {
                    let m = row.iter().fold(F::neg_infinity(), |m, &x| m.max(x * scale));
                    row.mapv_inplace(|x| (x * scale - m).exp());
                    let sum: F = row.sum();
                    row.mapv_inplace(|x| x / sum);
                }
                out.slice_mut(s![b, .., cols]).assign(&p.dot(&vh));
                probs.slice_mut(s![b, hd, .., ..]).assign(&p);
            }
        }
        self.record(&[q, k, v], out.into_dyn(), move |ctx| {
            let g = view3(ctx.grad);
            let q3 = view3(ctx.inputs[0]);
            let k3 = view3(ctx.inputs[1]);
            let v3 = view3(ctx.inputs[2]);
            let mut dq = Array3::<F>::zeros((batch, steps, dim));
            let mut dk = Array3::<F>::zeros((batch, steps, dim));
            let mut dv = Array3::<F>::zeros((batch, steps, dim));
            for b in 0..batch {
                for hd in 0..heads {
                    let cols = hd * dh..(hd + 1) * dh;
                    let p = probs.slice(s![b, hd, .., ..]);
                    let gh = g.slice(s![b, .., cols.clone()]);
                    let vh = v3.slice(s![b, .., cols.clone()]);
                    dv.slice_mut(s![b, .., cols.clone()]).assign(&p.t().dot(&gh));
                    let mut ds = gh.dot(&vh.t());
                    for (mut drow, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                        let dot: F = drow.iter().zip(prow.iter()).map(|(&a, &b)| a * b).sum();
                        drow.iter_mut()
                            .zip(prow.iter())
                            .for_each(|(d, &p)| *d = p * (*d - dot) * scale);
                    }
                    let qh = q3.slice(s![b, .., cols.clone()]);
                    let kh = k3.slice(s![b, .., cols.clone()]);
                    dq.slice_mut(s![b, .., cols.clone()]).assign(&ds.dot(&kh));
                    dk.slice_mut(s![b, .., cols]).assign(&ds.t().dot(&qh));
                }
            }
            vec![
                ctx.needs[0].then(|| dq.into_dyn()),
                ctx.needs[1].then(|| dk.into_dyn()),
                ctx.needs[2].then(|| dv.into_dyn()),
            ]
        })
    }
}

fn view3<F: Real>(t: &Tensor<F>) -> ndarray::ArrayView3<'_, F> {
    t.view().into_dimensionality::<Ix3>().expect("expected a 3-D tensor")
}

fn dims3<F: Real>(t: &Tensor<F>) -> (usize, usize, usize) {
    view3(t).dim()
}
