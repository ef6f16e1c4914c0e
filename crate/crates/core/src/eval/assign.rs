use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::max_score_assignment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignMode {
    Exact,
    /// More estimates than references; the unmatched ones are ignored.
    Over,
    /// Fewer estimates than references; unmatched references reuse the
    /// estimate that scores best against them.
    Under,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    /// `(reference, estimate)` pairs of the optimal one-to-one matching.
    pub pairs: Vec<(usize, usize)>,
    /// `(reference, estimate)` for references filled by copying an estimate.
    pub duplicated: Vec<(usize, usize)>,
    pub mode: AssignMode,
}

impl AssignmentResult {
    /// Estimate used for every reference, in reference order.
    pub fn estimate_of(&self) -> Vec<usize> {
        let n = self.pairs.len() + self.duplicated.len();
        let mut out = vec![0; n];
        for &(r, e) in self.pairs.iter().chain(&self.duplicated) {
            out[r] = e;
        }
        out
    }

    pub fn total(&self, scores: &Array2<f64>) -> f64 {
        self.pairs.iter().map(|&(r, e)| scores[[r, e]]).sum()
    }
}

/// Matches references (rows) with estimates (columns) of a score matrix,
/// maximizing the total score of the one-to-one pairs.
pub fn assign_from_scores(scores: &Array2<f64>) -> Result<AssignmentResult> {
    let (n, n_hat) = scores.dim();
    if n_hat == 0 {
        return Err(Error::NoOutputs);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("no references".into()));
    }
    if n <= n_hat {
        let cols = max_score_assignment(scores);
        return Ok(AssignmentResult {
            pairs: cols.into_iter().enumerate().collect(),
            duplicated: Vec::new(),
            mode: if n == n_hat { AssignMode::Exact } else { AssignMode::Over },
        });
    }
    let t = scores.t().to_owned();
    let refs_of_est = max_score_assignment(&t);
    let mut pairs: Vec<(usize, usize)> = refs_of_est
        .iter()
        .enumerate()
        .map(|(e, &r)| (r, e))
        .collect();
    pairs.sort_unstable();
    let matched: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let duplicated = (0..n)
        .filter(|r| !matched.contains(r))
        .map(|r| {
            let best = (0..n_hat)
                .max_by(|&a, &b| scores[[r, a]].total_cmp(&scores[[r, b]]))
                .unwrap();
            (r, best)
        })
        .collect();
    Ok(AssignmentResult {
        pairs,
        duplicated,
        mode: AssignMode::Under,
    })
}
