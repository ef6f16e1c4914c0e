//! Finite-difference checks against parameters of a [`ParamStore`].

use muse_autodiff::gradcheck::{GradCheckOptions, GradCheckReport};
use muse_autodiff::Var;

use super::params::{ParamId, ParamStore, Session};

/// Compares reverse-mode gradients of the scalar built by `f` with central
/// differences, perturbing entries of every parameter in `targets`.
pub fn check_params<Fun>(
    store: &ParamStore<f64>,
    targets: &[ParamId],
    opts: GradCheckOptions,
    f: Fun,
) -> GradCheckReport
where
    Fun: Fn(&mut Session<'_, f64>) -> Var,
{
    let names: Vec<&str> = targets.iter().map(|&id| store.name(id)).collect();
    let mut s = Session::train(store, |n| names.contains(&n));
    let loss = f(&mut s);
    let grads = s.gradients(loss);
    drop(s);

    let eval = |st: &ParamStore<f64>| {
        let mut s = Session::inference(st);
        let v = f(&mut s);
        s.g.value(v).sum()
    };
    let mut work = store.clone();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        worst: None,
    };
    for (ti, &id) in targets.iter().enumerate() {
        let analytic = grads.iter().find(|(g, _)| *g == id).map(|(_, t)| t.clone());
        let len = store.get(id).len();
        let probe: Vec<usize> = if len <= opts.max_entries_per_input {
            (0..len).collect()
        } else {
            (0..opts.max_entries_per_input)
                .map(|i| i * len / opts.max_entries_per_input)
                .collect()
        };
        for j in probe {
            let orig = store.get(id).as_slice_memory_order().unwrap()[j];
            work.get_mut(id).as_slice_memory_order_mut().unwrap()[j] = orig + opts.eps;
            let up = eval(&work);
            work.get_mut(id).as_slice_memory_order_mut().unwrap()[j] = orig - opts.eps;
            let down = eval(&work);
            work.get_mut(id).as_slice_memory_order_mut().unwrap()[j] = orig;
            let numeric = (up - down) / (2.0 * opts.eps);
            let a = analytic
                .as_ref()
                .map(|t| t.as_slice_memory_order().unwrap()[j])
                .unwrap_or(0.0);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            report.checked += 1;
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(rel);
                if rel >= report.max_rel_err {
                    report.worst = Some((ti, j, a, numeric));
                }
            }
        }
    }
    report
}
