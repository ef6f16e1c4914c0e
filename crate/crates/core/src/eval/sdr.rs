use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Default length of the distortion filter allowed on the reference.
pub const SDR_TAPS: usize = 512;

/// Correlations `Σ_n a[n]·b[n + k]` for `k in 0..lags`.
fn correlate(a: &[f64], b: &[f64], lags: usize) -> Vec<f64> {
    let n = a.len();
    let size = (n + lags).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
        v.resize(size, Complex::new(0.0, 0.0));
        v
    };
    let (mut fa, mut fb) = (pad(a), pad(b));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    inv.process(&mut prod);
    (0..lags).map(|k| prod[k].re / size as f64).collect()
}

/// Projection of estimates onto `taps`-long FIR filterings of one reference.
pub struct SdrProjector {
    gram: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    reference: Vec<f64>,
    energy: f64,
    taps: usize,
}

impl SdrProjector {
    pub fn new(reference: &Waveform, taps: usize) -> Result<Self> {
        let r = reference.samples();
        if r.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateReference);
        }
        let taps = taps.clamp(1, r.len());
        let auto = correlate(r, r, taps);
        let mut gram = DMatrix::from_fn(taps, taps, |i, j| auto[i.abs_diff(j)]);
        for i in 0..taps {
            gram[(i, i)] += 1e-10 * auto[0];
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("reference autocorrelation is singular".into()))?;
        Ok(Self {
            gram,
            chol,
            reference: r.to_vec(),
            energy: auto[0],
            taps,
        })
    }

    /// SDR of `est` in dB.
    pub fn sdr(&self, est: &Waveform) -> Result<f64> {
        let e = est.samples();
        if e.len() != self.reference.len() {
            return Err(Error::ShapeMismatch(format!(
                "reference has {} samples, estimate {}",
                self.reference.len(),
                e.len()
            )));
        }
        let b = DVector::from_vec(correlate(&self.reference, e, self.taps));
        let a = self.chol.solve(&b);
        let est_energy: f64 = e.iter().map(|v| v * v).sum();
        let target = a.dot(&(&self.gram * &a)).max(0.0);
        let residual = (est_energy - 2.0 * a.dot(&b) + target).max(0.0);
        let floor = 1e-10 * est_energy.max(self.energy);
        Ok(10.0 * ((target + floor) / (residual + floor)).log10())
    }
}

/// Signal-to-distortion ratio in dB: the estimate is projected onto the space
/// of `taps`-long FIR filterings of the reference and the projection's
/// energy is compared with the residual.
pub fn sdr_with_taps(reference: &Waveform, est: &Waveform, taps: usize) -> Result<f64> {
    if reference.len() != est.len() {
        return Err(Error::ShapeMismatch(format!(
            "reference has {} samples, estimate {}",
            reference.len(),
            est.len()
        )));
    }
    SdrProjector::new(reference, taps)?.sdr(est)
}

pub fn sdr(reference: &Waveform, est: &Waveform) -> Result<f64> {
    sdr_with_taps(reference, est, SDR_TAPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(v: Vec<f64>) -> Waveform {
        Waveform::new(v, 8000).unwrap()
    }

    #[test]
    fn correlation_matches_direct_sum() {
        let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos()).collect();
        let c = correlate(&a, &b, 7);
        for (k, &v) in c.iter().enumerate() {
            let direct: f64 = (0..50 - k).map(|n| a[n] * b[n + k]).sum();
            assert!((v - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_signals_hit_the_cap() {
        let r = wave((0..4000).map(|i| (i as f64 * 0.05).sin() * (i as f64 * 0.003).cos()).collect());
        let v = sdr(&r, &r).unwrap();
        assert!(v >= 60.0, "{v}");
        assert!(sdr(&wave(vec![0.0; 10]), &wave(vec![1.0; 10])).is_err());
    }
}
