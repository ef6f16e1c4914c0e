use muse_autodiff::{Graph, Real, Tensor, Var};
use ndarray::{Axis, IxDyn};

use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Relative energy floor in the SI-SNR ratio.
pub const SI_SNR_EPS: f64 = 1e-8;

struct Parts {
    alpha: f64,
    target: f64,
    noise: f64,
    energy: f64,
}

fn parts(r: &[f64], e: &[f64]) -> Parts {
    let rr: f64 = r.iter().map(|v| v * v).sum();
    let er: f64 = r.iter().zip(e).map(|(a, b)| a * b).sum();
    let alpha = er / rr;
    let target = alpha * alpha * rr;
    let noise: f64 = r.iter().zip(e).map(|(a, b)| (b - alpha * a).powi(2)).sum();
    let energy: f64 = e.iter().map(|v| v * v).sum();
    Parts {
        alpha,
        target,
        noise,
        energy,
    }
}

/// `10·log10((‖s‖² + ε‖ŷ‖²) / (‖ŷ − s‖² + ε‖ŷ‖²))` with `s` the projection of
/// the estimate onto the reference. The floor scales with the estimate, so
/// the value is exactly invariant to rescaling the estimate.
fn ratio_db(p: &Parts) -> f64 {
    if p.energy == 0.0 {
        return 10.0 * SI_SNR_EPS.log10();
    }
    let a = p.target + SI_SNR_EPS * p.energy;
    let b = p.noise + SI_SNR_EPS * p.energy;
    10.0 * (a / b).log10()
}

/// Scale-invariant SNR of `est` against `reference`, in dB.
pub fn si_snr_slices(reference: &[f64], est: &[f64]) -> Result<f64> {
    if reference.len() != est.len() {
        return Err(Error::ShapeMismatch(format!(
            "reference has {} samples, estimate {}",
            reference.len(),
            est.len()
        )));
    }
    if reference.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateReference);
    }
    Ok(ratio_db(&parts(reference, est)))
}

pub fn si_snr(reference: &Waveform, est: &Waveform) -> Result<f64> {
    si_snr_slices(reference.samples(), est.samples())
}

/// Row-wise SI-SNR of estimates `(n, L)` against constant references
/// `(n, L)`, as a differentiable `(n)` vector.
pub fn si_snr_graph<F: Real>(g: &mut Graph<F>, refs: &Tensor<F>, ests: Var) -> Result<Var> {
    let est = g.value(ests);
    if est.shape() != refs.shape() || est.ndim() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "estimates {:?} vs references {:?}",
            est.shape(),
            refs.shape()
        )));
    }
    let to64 = |row: ndarray::ArrayViewD<'_, F>| -> Vec<f64> {
        row.iter().map(|v| v.to_f64_lossy()).collect()
    };
    let mut values = Vec::new();
    let mut coefs = Vec::new();
    for (r, e) in refs.axis_iter(Axis(0)).zip(est.axis_iter(Axis(0))) {
        let (r, e) = (to64(r), to64(e));
        if r.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateReference);
        }
        let p = parts(&r, &e);
        values.push(F::from_f64_lossy(ratio_db(&p)));
        // d/de = k·[(2αr + 2εe)/A − (2e − 2αr + 2εe)/B] with k = 10/ln 10.
        let k = 10.0 / std::f64::consts::LN_10;
        let (a, b) = (
            p.target + SI_SNR_EPS * p.energy,
            p.noise + SI_SNR_EPS * p.energy,
        );
        let ok = p.energy > 0.0;
        coefs.push((ok, p.alpha, k, a, b));
    }
    let n = values.len();
    let value = Tensor::from_shape_vec(IxDyn(&[n]), values).unwrap();
    let refs = refs.clone();
    Ok(g.record(&[ests], value, move |ctx| {
        let e = ctx.inputs[0];
        let mut grad = Tensor::<F>::zeros(e.raw_dim());
        for (i, &(ok, alpha, k, a, b)) in coefs.iter().enumerate() {
            if !ok {
                continue;
            }
            let up = ctx.grad[[i]].to_f64_lossy();
            let mut row = grad.index_axis_mut(Axis(0), i);
            for ((gv, &ev), &rv) in row
                .iter_mut()
                .zip(e.index_axis(Axis(0), i).iter())
                .zip(refs.index_axis(Axis(0), i).iter())
            {
                let (ev, rv) = (ev.to_f64_lossy(), rv.to_f64_lossy());
                let da = 2.0 * alpha * rv + 2.0 * SI_SNR_EPS * ev;
                let db = 2.0 * ev - 2.0 * alpha * rv + 2.0 * SI_SNR_EPS * ev;
                *gv = F::from_f64_lossy(up * k * (da / a - db / b));
            }
        }
        vec![Some(grad)]
    }))
}
