use std::collections::VecDeque;

use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::epoch_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub inputs: Matrix,
    pub labels: Option<Vec<usize>>,
}

impl Batch {
    fn gather(ds: &Dataset, indices: Vec<usize>) -> Self {
        let inputs = ds.inputs().select_rows(&indices);
        let labels = ds.labels().map(|l| indices.iter().map(|&i| l[i]).collect());
        Batch {
            indices,
            inputs,
            labels,
        }
    }
}

/// Permutation of `0..n` for `(seed, epoch)`, chunked into batches.
/// The last batch may be smaller.
pub fn batch_indices(
    n: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut epoch_rng(seed, epoch));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// One epoch of shuffled minibatches.
pub fn batches(
    ds: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<impl Iterator<Item = Batch> + '_> {
    let chunks = batch_indices(ds.len(), batch_size, seed, epoch)?;
    Ok(chunks.into_iter().map(move |idx| Batch::gather(ds, idx)))
}

/// Endless minibatch stream that reshuffles after every pass.
///
/// Used for the labeled set, which is cycled independently of how many
/// unlabeled batches make up an epoch.
#[derive(Debug, Clone)]
pub struct CyclicBatches<'a> {
    ds: &'a Dataset,
    batch_size: usize,
    seed: u64,
    pass: u64,
    pending: VecDeque<Vec<usize>>,
}

impl<'a> CyclicBatches<'a> {
    pub fn new(ds: &'a Dataset, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        Ok(Self {
            ds,
            batch_size,
            seed,
            pass: 0,
            pending: VecDeque::new(),
        })
    }

    /// Number of completed or started passes.
    pub fn passes(&self) -> u64 {
        self.pass
    }

    pub fn next_batch(&mut self) -> Batch {
        if self.pending.is_empty() {
            let chunks = batch_indices(self.ds.len(), self.batch_size, self.seed, self.pass)
                .expect("batch size validated");
            self.pending.extend(chunks);
            self.pass += 1;
        }
        let idx = self.pending.pop_front().expect("refilled above");
        Batch::gather(self.ds, idx)
    }
}

impl Iterator for CyclicBatches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        Some(self.next_batch())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::two_moons;

    #[test]
    fn big_batch_is_whole_set() {
        let ds = two_moons(10, 0.1, 0).unwrap();
        let b: Vec<_> = batches(&ds, 64, 1, 0).unwrap().collect();
        assert_eq!(b.len(), 1);
        let mut idx = b[0].indices.clone();
        idx.sort_unstable();
        assert_eq!(idx, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn epoch_is_a_permutation_with_partial_tail() {
        let ds = two_moons(23, 0.1, 0).unwrap();
        let b: Vec<_> = batches(&ds, 5, 7, 3).unwrap().collect();
        assert_eq!(
            b.iter().map(|b| b.indices.len()).collect::<Vec<_>>(),
            vec![5, 5, 5, 5, 3]
        );
        let mut all: Vec<usize> = b.iter().flat_map(|b| b.indices.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(b[0].inputs.row(0), ds.inputs().row(b[0].indices[0]));
    }

    #[test]
    fn epochs_and_seeds_reshuffle() {
        let e0 = batch_indices(100, 10, 1, 0).unwrap();
        assert_eq!(e0, batch_indices(100, 10, 1, 0).unwrap());
        assert_ne!(e0, batch_indices(100, 10, 1, 1).unwrap());
        // independent unlabeled streams pair different rows
        assert_ne!(e0[0], batch_indices(100, 10, 2, 0).unwrap()[0]);
        assert!(batch_indices(5, 0, 0, 0).is_err());
    }

    #[test]
    fn cyclic_stream_reshuffles_each_pass() {
        let ds = two_moons(6, 0.1, 0).unwrap();
        let mut it = CyclicBatches::new(&ds, 100, 4).unwrap();
        let a = it.next_batch();
        let b = it.next_batch();
        assert_eq!(a.indices.len(), 6);
        assert_eq!(it.passes(), 2);
        let mut sa = a.indices.clone();
        let mut sb = b.indices.clone();
        sa.sort_unstable();
        sb.sort_unstable();
        assert_eq!(sa, sb);
        assert!(a.labels.is_some());
    }
}
