mod elementwise;
mod linalg;
mod norm;
mod reduce;
mod seq;
mod shape;

pub use seq::LstmWeights;

use ndarray::{ArrayView2, Axis, CowArray, Ix2, IxDyn};

use crate::{Real, Tensor};

/// Sums a broadcast gradient back down to `shape`.
pub(crate) fn sum_to_shape<F: Real>(g: &Tensor<F>, shape: &[usize]) -> Tensor<F> {
    if g.shape() == shape {
        return g.clone();
    }
    let mut out = g.clone();
    let extra = out.ndim() - shape.len();
    for _ in 0..extra {
        out = out.sum_axis(Axis(0));
    }
    for (ax, &d) in shape.iter().enumerate() {
        if d == 1 && out.shape()[ax] != 1 {
            out = out.sum_axis(Axis(ax)).insert_axis(Axis(ax));
        }
    }
    out
}

/// Views a tensor as `(prod(leading dims), last dim)`.
pub(crate) fn as_rows<F: Real>(t: &Tensor<F>) -> CowArray<'_, F, Ix2> {
    let last = *t.shape().last().expect("tensor needs at least one axis");
    let n = if last == 0 { 0 } else { t.len() / last };
    match t.view().into_shape_with_order((n, last)) {
        Ok(v) => CowArray::from(v),
        Err(_) => {
            let owned = t.as_standard_layout().into_owned();
            CowArray::from(owned.into_shape_with_order((n, last)).unwrap())
        }
    }
}

pub(crate) fn as_matrix<F: Real>(t: &Tensor<F>) -> ArrayView2<'_, F> {
    t.view()
        .into_dimensionality::<Ix2>()
        .expect("expected a 2-D tensor")
}

pub(crate) fn standard<F: Real>(t: Tensor<F>) -> Tensor<F> {
    if t.is_standard_layout() {
        t
    } else {
        t.as_standard_layout().into_owned()
    }
}

pub(crate) fn with_shape<F: Real>(t: Tensor<F>, shape: &[usize]) -> Tensor<F> {
    standard(t)
        .into_shape_with_order(IxDyn(shape))
        .expect("element count preserved")
}
