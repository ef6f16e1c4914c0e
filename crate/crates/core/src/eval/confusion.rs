use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speaker-counting tallies: `counts[n - 1][n_hat]` for `n in 1..=n_max`
/// and `n_hat in 0..=n_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_max: usize,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n_max: usize) -> Self {
        Self {
            n_max,
            counts: vec![vec![0; n_max + 1]; n_max],
        }
    }

    pub fn add(&mut self, n: usize, n_hat: usize) -> Result<()> {
        if n == 0 || n > self.n_max || n_hat > self.n_max {
            return Err(Error::InvalidArgument(format!(
                "speaker count pair ({n}, {n_hat}) outside 1..={} x 0..={}",
                self.n_max, self.n_max
            )));
        }
        self.counts[n - 1][n_hat] += 1;
        Ok(())
    }

    pub fn row_total(&self, n: usize) -> usize {
        self.counts[n - 1].iter().sum()
    }

    /// Row-normalized percentages; empty rows stay at zero.
    pub fn percentages(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }

    /// Fraction of `n`-speaker examples counted correctly.
    pub fn accuracy(&self, n: usize) -> Option<f64> {
        let total = self.row_total(n);
        (total > 0).then(|| self.counts[n - 1][n] as f64 / total as f64)
    }
}

/// Tallies `(n, n_hat)` pairs.
pub fn counting_confusion(
    rows: impl IntoIterator<Item = (usize, usize)>,
    n_max: usize,
) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::new(n_max);
    for (n, n_hat) in rows {
        m.add(n, n_hat)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_tally() {
        let m = counting_confusion([(2, 2), (2, 3), (3, 3), (1, 0), (2, 2)], 5).unwrap();
        assert_eq!(m.counts[1], vec![0, 0, 2, 1, 0, 0]);
        assert_eq!(m.counts[0], vec![1, 0, 0, 0, 0, 0]);
        assert_eq!(m.counts[2][3], 1);
        assert_eq!(m.row_total(2), 3);
        let p = m.percentages();
        assert!((p[1][2] - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(p[4], vec![0.0; 6]);
        assert_eq!(m.accuracy(2), Some(2.0 / 3.0));
        assert_eq!(m.accuracy(4), None);
        assert!(counting_confusion([(0, 1)], 5).is_err());
        assert!(counting_confusion([(2, 6)], 5).is_err());
    }

    #[test]
    fn all_correct_is_diagonal() {
        let m = counting_confusion((1..=5).flat_map(|n| [(n, n), (n, n)]), 5).unwrap();
        for (i, row) in m.percentages().iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if j == i + 1 { 100.0 } else { 0.0 });
            }
        }
    }
}
