//! Finite-difference gradient checking in double precision.

use crate::{Graph, Tensor, Var};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Entries probed per input; inputs with fewer entries are probed fully.
    pub max_entries_per_input: usize,
    /// Magnitude below which the relative error is measured against this floor.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            max_entries_per_input: 24,
            floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// `(input, flat index, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Compares reverse-mode gradients of the scalar built by `f` against
/// central differences, for every tensor in `inputs`.
pub fn check<Fun>(inputs: &[Tensor<f64>], opts: GradCheckOptions, f: Fun) -> GradCheckReport
where
    Fun: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let out = f(&mut g, &vars);
    let grads = g.backward(out);

    let eval = |perturbed: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::no_grad();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars);
        *g.value(out).iter().next().unwrap()
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        worst: None,
    };
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let n = input.len();
        if n == 0 {
            continue;
        }
        let analytic = grads
            .get(vars[i])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(input.raw_dim()));
        let probes = n.min(opts.max_entries_per_input);
        // spread probes evenly, offset so small tensors still hit index 0
        for p in 0..probes {
            let idx = p * n / probes;
            let orig = input.as_slice_memory_order().unwrap()[idx];
            work[i].as_slice_memory_order_mut().unwrap()[idx] = orig + opts.eps;
            let plus = eval(&work);
            work[i].as_slice_memory_order_mut().unwrap()[idx] = orig - opts.eps;
            let minus = eval(&work);
            work[i].as_slice_memory_order_mut().unwrap()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * opts.eps);
            let a = analytic.as_slice_memory_order().unwrap()[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            report.checked += 1;
            if rel > report.max_rel_err || report.worst.is_none() {
                if rel >= report.max_rel_err {
                    report.max_rel_err = rel;
                    report.worst = Some((i, idx, a, numeric));
                }
            }
        }
    }
    report
}
