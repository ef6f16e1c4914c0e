//! Minimum-cost assignment (Hungarian method).

use ndarray::Array2;

/// Assigns every row of an `n × m` cost matrix (`n ≤ m`) to a distinct
/// column so that the total cost is minimal. Returns the column of each row.
pub fn min_cost_assignment(cost: &Array2<f64>) -> Vec<usize> {
    let (n, m) = cost.dim();
    assert!(n <= m, "more rows than columns");
    if n == 0 {
        return Vec::new();
    }
    // Potentials and matching over 1-based indices; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            out[row_of[j] - 1] = j - 1;
        }
    }
    out
}

/// Maximum-score assignment, same conventions as [`min_cost_assignment`].
pub fn max_score_assignment(score: &Array2<f64>) -> Vec<usize> {
    min_cost_assignment(&score.mapv(|v| -v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn small_cases() {
        assert_eq!(min_cost_assignment(&array![[0.0, 10.0], [10.0, 0.0]]), vec![0, 1]);
        assert_eq!(min_cost_assignment(&array![[10.0, 0.0], [0.0, 10.0]]), vec![1, 0]);
        assert_eq!(min_cost_assignment(&array![[5.0, 1.0, 3.0]]), vec![1]);
        assert_eq!(
            min_cost_assignment(&array![[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]),
            vec![1, 0, 2]
        );
        assert!(min_cost_assignment(&Array2::zeros((0, 3))).is_empty());
    }
}
