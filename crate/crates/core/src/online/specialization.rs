use crate::linalg::Matrix;

/// Alignment of student hidden units to teacher units over a run.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecializationReport {
    /// Per snapshot: mean row-normalized `|M|` over the assigned pairs.
    /// Equals 1 for perfect specialization and `1/k` for none.
    pub dominance: Vec<f64>,
    /// Per snapshot: `(student, teacher)` pairs of the greedy assignment.
    pub assignments: Vec<Vec<(usize, usize)>>,
}

impl SpecializationReport {
    pub fn mean_dominance(&self) -> f64 {
        if self.dominance.is_empty() {
            return 0.0;
        }
        self.dominance.iter().sum::<f64>() / self.dominance.len() as f64
    }
}

fn row_normalized_abs(m: &Matrix) -> Matrix {
    let k = m.cols();
    let mut out = m.map(f64::abs);
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / k as f64);
        }
    }
    out
}

fn greedy_assignment(w: &Matrix) -> Vec<(usize, usize)> {
    let mut entries: Vec<(usize, usize)> = (0..w.rows()).flat_map(|i| (0..w.cols()).map(move |j| (i, j))).collect();
    entries.sort_by(|a, b| w[*b].total_cmp(&w[*a]).then(a.cmp(b)));
    let mut row_used = vec![false; w.rows()];
    let mut col_used = vec![false; w.cols()];
    let mut pairs = Vec::new();
    for (i, j) in entries {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Greedy one-to-one matching on row-normalized `|M|` for each snapshot.
pub fn specialization_report(snapshots: &[Matrix]) -> SpecializationReport {
    let mut dominance = Vec::with_capacity(snapshots.len());
    let mut assignments = Vec::with_capacity(snapshots.len());
    for m in snapshots {
        let w = row_normalized_abs(m);
        let pairs = greedy_assignment(&w);
        let value = if pairs.is_empty() {
            0.0
        } else {
            pairs.iter().map(|&(i, j)| w[(i, j)]).sum::<f64>() / pairs.len() as f64
        };
        dominance.push(value);
        assignments.push(pairs);
    }
    SpecializationReport { dominance, assignments }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_fully_specialized() {
        let r = specialization_report(&[Matrix::diag(&[0.5, -2.0, 1.0]), Matrix::zeros(3, 3)]);
        assert_eq!(r.dominance[0], 1.0);
        assert_eq!(r.assignments[0], vec![(0, 0), (1, 1), (2, 2)]);
        assert!((r.dominance[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn permuted_alignment_is_found() {
        let m = Matrix::from_rows(&[vec![0.1, 0.9], vec![0.8, 0.2]]).unwrap();
        let r = specialization_report(&[m]);
        assert_eq!(r.assignments[0], vec![(0, 1), (1, 0)]);
        assert!((r.dominance[0] - 0.85).abs() < 1e-12);
    }
}
