//! Separation and extraction metrics, output assignment and reports.

mod assign;
mod confusion;
pub mod plot;
mod report;
mod sdr;

pub use assign::{assign_from_scores, AssignMode, AssignmentResult};
pub use confusion::{counting_confusion, ConfusionMatrix};
pub use report::{write_report, Aggregate, EvalReport, ExampleRow, ReferenceRow, Task};
pub use sdr::{sdr, sdr_with_taps, SdrProjector, SDR_TAPS};

use muse_autodiff::Real;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::si_snr;
use crate::model::{ExtractResult, MuseModel, SeparateResult};
use crate::signal::Waveform;
use crate::sim::LoadedExample;

/// Anything that separates or extracts speakers from a mixture.
pub trait Enhancer {
    fn n_max(&self) -> usize;
    fn separate(&self, mixture: &Waveform, oracle_n: Option<usize>) -> Result<SeparateResult>;
    fn extract(
        &self,
        mixture: &Waveform,
        enrollment: &Waveform,
        oracle_n: Option<usize>,
    ) -> Result<ExtractResult>;
}

impl<F: Real> Enhancer for MuseModel<F> {
    fn n_max(&self) -> usize {
        self.cfg().n_max
    }

    fn separate(&self, mixture: &Waveform, oracle_n: Option<usize>) -> Result<SeparateResult> {
        MuseModel::separate(self, mixture, oracle_n)
    }

    fn extract(
        &self,
        mixture: &Waveform,
        enrollment: &Waveform,
        oracle_n: Option<usize>,
    ) -> Result<ExtractResult> {
        MuseModel::extract(self, mixture, enrollment, oracle_n)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignMetric {
    #[default]
    Sdr,
    SiSnr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub task: Task,
    /// Force the true speaker count instead of the existence threshold.
    pub oracle_n: bool,
    pub assign_metric: AssignMetric,
    pub sdr_taps: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            task: Task::Ss,
            oracle_n: false,
            assign_metric: AssignMetric::Sdr,
            sdr_taps: SDR_TAPS,
        }
    }
}

/// Matches references with estimates by SDR.
pub fn assign_outputs(refs: &[Waveform], ests: &[Waveform]) -> Result<AssignmentResult> {
    assign_from_scores(&sdr_matrix(refs, ests, SDR_TAPS)?)
}

/// `scores[r][e] = SDR(refs[r], ests[e])`.
pub fn sdr_matrix(refs: &[Waveform], ests: &[Waveform], taps: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((refs.len(), ests.len()));
    for (i, r) in refs.iter().enumerate() {
        let p = SdrProjector::new(r, taps)?;
        for (j, e) in ests.iter().enumerate() {
            m[[i, j]] = p.sdr(e)?;
        }
    }
    Ok(m)
}

fn si_snr_matrix(refs: &[Waveform], ests: &[Waveform]) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((refs.len(), ests.len()));
    for (i, r) in refs.iter().enumerate() {
        for (j, e) in ests.iter().enumerate() {
            m[[i, j]] = si_snr(r, e)?;
        }
    }
    Ok(m)
}

struct Scored {
    reference: usize,
    estimate: usize,
    duplicated: bool,
    si_snr: f64,
    sdr: f64,
}

/// Runs the model over every example and scores its outputs against the
/// references, with improvements measured over the unprocessed mixture.
pub fn evaluate<E: Enhancer + ?Sized>(
    model: &E,
    examples: &[LoadedExample],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let n_max = model.n_max();
    let mut report = EvalReport::new(opts.task, opts.oracle_n, n_max);
    for (index, ex) in examples.iter().enumerate() {
        let n = ex.n_speakers();
        if n == 0 || ex.references.is_empty() {
            return Err(Error::InvalidArgument(format!("example {} has no references", ex.id)));
        }
        let oracle = opts.oracle_n.then_some(n);
        let (n_est, scored, refs) = match opts.task {
            Task::Ss => {
                let out = model.separate(&ex.mixture, oracle)?;
                let n_est = out.n_est;
                let ests = if out.estimates.is_empty() {
                    model.separate(&ex.mixture, Some(1))?.estimates
                } else {
                    out.estimates
                };
                let refs = &ex.references[..];
                let sdr_m = sdr_matrix(refs, &ests, opts.sdr_taps)?;
                let assignment = match opts.assign_metric {
                    AssignMetric::Sdr => assign_from_scores(&sdr_m)?,
                    AssignMetric::SiSnr => assign_from_scores(&si_snr_matrix(refs, &ests)?)?,
                };
                let mut scored = Vec::with_capacity(n);
                for (&(r, e), dup) in assignment
                    .pairs
                    .iter()
                    .map(|p| (p, false))
                    .chain(assignment.duplicated.iter().map(|p| (p, true)))
                {
                    scored.push(Scored {
                        reference: r,
                        estimate: e,
                        duplicated: dup,
                        si_snr: si_snr(&refs[r], &ests[e])?,
                        sdr: sdr_m[[r, e]],
                    });
                }
                scored.sort_by_key(|s| s.reference);
                (n_est, scored, refs)
            }
            Task::Tse => {
                let enrollment = ex.enrollments.first().ok_or(Error::MissingEnrollment(index))?;
                let out = model.extract(&ex.mixture, enrollment, oracle)?;
                let refs = &ex.references[..1];
                let si = si_snr(&refs[0], &out.estimate)?;
                let sd = sdr_with_taps(&refs[0], &out.estimate, opts.sdr_taps)?;
                let scored = vec![Scored {
                    reference: 0,
                    estimate: 0,
                    duplicated: false,
                    si_snr: si,
                    sdr: sd,
                }];
                (out.n_est, scored, refs)
            }
        };
        let mut rows = Vec::with_capacity(scored.len());
        for s in &scored {
            let input_si_snr = si_snr(&refs[s.reference], &ex.mixture)?;
            let input_sdr = sdr_with_taps(&refs[s.reference], &ex.mixture, opts.sdr_taps)?;
            rows.push(ReferenceRow {
                id: ex.id.clone(),
                task: opts.task,
                n,
                n_est,
                reference: s.reference,
                estimate: s.estimate,
                duplicated: s.duplicated,
                si_snr: s.si_snr,
                si_snri: s.si_snr - input_si_snr,
                sdr: s.sdr,
                sdri: s.sdr - input_sdr,
                input_si_snr,
                input_sdr,
                pesq: None,
                wer: None,
            });
        }
        report.push(ex.id.clone(), n, n_est, rows)?;
    }
    report.finish();
    Ok(report)
}
