use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, RngState};

/// Index partition of one epoch: a fresh permutation cut into consecutive
/// batches, the last one possibly short.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut RngState) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 || batch_size > n {
        return Err(Error::validation(format!(
            "batch size {batch_size} must be in 1..={n}"
        )));
    }
    let perm = rng.permutation(n);
    Ok(perm.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// A gathered minibatch.
#[derive(Clone, Debug)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub inputs: Matrix,
    pub targets: Matrix,
}

/// Iterator over the minibatches of one epoch.
pub struct Minibatches<'a> {
    ds: &'a LabeledDataset,
    batches: std::vec::IntoIter<Vec<usize>>,
}

impl Iterator for Minibatches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        let indices = self.batches.next()?;
        Some(Batch {
            inputs: self.ds.inputs().select_rows(&indices),
            targets: self.ds.targets().select_rows(&indices),
            indices,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.batches.size_hint()
    }
}

pub fn minibatches<'a>(ds: &'a LabeledDataset, batch_size: usize, rng: &mut RngState) -> Result<Minibatches<'a>> {
    let batches = epoch_batches(ds.len(), batch_size, rng)?;
    Ok(Minibatches {
        ds,
        batches: batches.into_iter(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sizes_and_coverage() {
        let mut rng = RngState::new(1);
        let b = epoch_batches(10, 3, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 3, 1]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn full_batch_and_fresh_permutations() {
        let mut rng = RngState::new(2);
        let e1 = epoch_batches(50, 50, &mut rng).unwrap();
        let e2 = epoch_batches(50, 50, &mut rng).unwrap();
        assert_eq!(e1.len(), 1);
        assert_ne!(e1, e2);
        assert!(epoch_batches(5, 0, &mut rng).is_err());
        assert!(epoch_batches(5, 6, &mut rng).is_err());
    }

    #[test]
    fn gathered_rows_follow_indices() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let ds = LabeledDataset::from_labels(x, &[0, 1, 0], 2).unwrap();
        for batch in minibatches(&ds, 2, &mut RngState::new(3)).unwrap() {
            for (r, &i) in batch.indices.iter().enumerate() {
                assert_eq!(batch.inputs[(r, 0)], i as f64);
                assert_eq!(batch.targets.row(r), ds.targets().row(i));
            }
        }
    }
}
