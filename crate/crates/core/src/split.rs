//! Per-user ("userfixed") k-fold cross-validation.
//!
//! Each user's interactions are shuffled by a ChaCha8 stream keyed on
//! `(seed, user)` and dealt round-robin into `k` test buckets: position `p`
//! of the shuffled list is tested in fold `p mod k`. A user with `n = qk + r`
//! interactions therefore has `q + 1` test items in folds `0..r` and `q` in
//! the rest.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::cohort::ExperimentCohort;
use crate::error::{Error, Result};
use crate::ingest::InteractionDataset;
use crate::matrix::BinaryMatrix;
use crate::seed;

const SPLIT_STREAM: u64 = 0x5350_4C49_54;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    k: usize,
    seed: u64,
    /// Test fold of each cohort interaction, indexed like `interactions`.
    test_fold: Vec<u8>,
    /// Interaction id ranges per user.
    user_ranges: Vec<std::ops::Range<usize>>,
}

/// One fold's view: per user, train and test interaction ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
}

pub fn userfixed_kfold(cohort: &ExperimentCohort, k: usize, seed: u64) -> Result<FoldSplit> {
    split_dataset(&cohort.dataset, k, seed)
}

pub(crate) fn split_dataset(dataset: &InteractionDataset, k: usize, seed: u64) -> Result<FoldSplit> {
    if !(2..=255).contains(&k) {
        return Err(Error::InvalidArgument(format!("k = {k} must be in 2..=255")));
    }
    let user_ranges = dataset.user_ranges();
    let mut test_fold = vec![0u8; dataset.n_interactions()];
    for (u, range) in user_ranges.iter().enumerate() {
        if range.len() < k {
            return Err(Error::TooFewInteractions {
                user: u,
                count: range.len(),
                k,
            });
        }
        let mut ids: Vec<usize> = range.clone().collect();
        ids.shuffle(&mut seed::rng(seed, &[SPLIT_STREAM, u as u64]));
        for (pos, id) in ids.into_iter().enumerate() {
            test_fold[id] = (pos % k) as u8;
        }
    }
    Ok(FoldSplit {
        k,
        seed,
        test_fold,
        user_ranges,
    })
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_users(&self) -> usize {
        self.user_ranges.len()
    }

    /// Fold in which interaction `id` is held out.
    pub fn test_fold_of(&self, id: usize) -> usize {
        self.test_fold[id] as usize
    }

    pub fn fold(&self, f: usize) -> Fold {
        assert!(f < self.k, "fold {f} out of range");
        let mut train = Vec::with_capacity(self.n_users());
        let mut test = Vec::with_capacity(self.n_users());
        for range in &self.user_ranges {
            let (te, tr): (Vec<usize>, Vec<usize>) =
                range.clone().partition(|&id| self.test_fold[id] as usize == f);
            train.push(tr);
            test.push(te);
        }
        Fold { index: f, train, test }
    }

    pub fn folds(&self) -> impl Iterator<Item = Fold> + '_ {
        (0..self.k).map(|f| self.fold(f))
    }

    /// Writes `fold,user,item,role` rows with external ids.
    pub fn export_csv(&self, dataset: &InteractionDataset, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "fold,user,item,role").map_err(io)?;
        for fold in self.folds() {
            for u in 0..self.n_users() {
                for (ids, role) in [(&fold.train[u], "train"), (&fold.test[u], "test")] {
                    for &id in ids {
                        let x = &dataset.interactions[id];
                        writeln!(
                            w,
                            "{},{},{},{role}",
                            fold.index,
                            dataset.users.external(x.user as usize),
                            dataset.items.external(x.item as usize)
                        )
                        .map_err(io)?;
                    }
                }
            }
        }
        w.flush().map_err(io)
    }
}

impl Fold {
    pub fn train_matrix(&self, dataset: &InteractionDataset) -> BinaryMatrix {
        ids_to_matrix(dataset, &self.train)
    }

    pub fn test_matrix(&self, dataset: &InteractionDataset) -> BinaryMatrix {
        ids_to_matrix(dataset, &self.test)
    }
}

fn ids_to_matrix(dataset: &InteractionDataset, ids: &[Vec<usize>]) -> BinaryMatrix {
    BinaryMatrix::from_pairs(
        dataset.n_users(),
        dataset.n_items(),
        ids.iter().flatten().map(|&id| {
            let x = &dataset.interactions[id];
            (x.user as usize, x.item as usize)
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RawRating;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn dataset(counts: &[usize]) -> InteractionDataset {
        let ratings = counts
            .iter()
            .enumerate()
            .flat_map(|(u, &n)| {
                (0..n).map(move |i| RawRating {
                    user: u.to_string(),
                    item: i.to_string(),
                    rating: 3.0,
                    timestamp: 0,
                })
            })
            .collect();
        InteractionDataset::assemble(ratings, |_| "M".into(), |_| vec![], (1.0, 5.0), "t")
    }

    fn test_sizes(split: &FoldSplit, user: usize) -> Vec<usize> {
        split.folds().map(|f| f.test[user].len()).collect()
    }

    #[test]
    fn exact_division() {
        let split = split_dataset(&dataset(&[10]), 5, 1).unwrap();
        for f in split.folds() {
            assert_eq!(f.train[0].len(), 8);
            assert_eq!(f.test[0].len(), 2);
        }
    }

    #[test]
    fn remainder_goes_to_leading_folds() {
        let split = split_dataset(&dataset(&[11]), 5, 1).unwrap();
        assert_eq!(test_sizes(&split, 0), vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn deterministic() {
        let d = dataset(&[12, 7, 30]);
        assert_eq!(split_dataset(&d, 5, 9).unwrap(), split_dataset(&d, 5, 9).unwrap());
    }

    #[test]
    fn too_few_interactions() {
        assert!(matches!(
            split_dataset(&dataset(&[10, 3]), 5, 0),
            Err(Error::TooFewInteractions { user: 1, count: 3, k: 5 })
        ));
        assert!(split_dataset(&dataset(&[10]), 1, 0).is_err());
    }

    #[test]
    fn seeds_change_partitions() {
        let d = dataset(&[6]);
        let base = split_dataset(&d, 5, 0).unwrap();
        let differ = (1..=100)
            .filter(|&s| split_dataset(&d, 5, s).unwrap() != base)
            .count();
        assert!(differ >= 99, "only {differ} of 100 seeds changed the split");
    }

    #[test]
    fn export_lists_every_role() {
        let d = dataset(&[5, 5]);
        let split = split_dataset(&d, 5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.csv");
        split.export_csv(&d, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "fold,user,item,role");
        // 5 folds x 10 interactions
        assert_eq!(lines.len() - 1, 50);
        assert_eq!(lines.iter().filter(|l| l.ends_with(",test")).count(), 10);
    }

    proptest! {
        #[test]
        fn folds_partition_each_user(counts in prop::collection::vec(5usize..23, 1..6), k in 2usize..6, seed: u64) {
            let d = dataset(&counts);
            let split = split_dataset(&d, k, seed).unwrap();
            let ranges = d.user_ranges();
            let mut tested = vec![0usize; d.n_interactions()];
            for fold in split.folds() {
                for u in 0..d.n_users() {
                    let tr: BTreeSet<_> = fold.train[u].iter().copied().collect();
                    let te: BTreeSet<_> = fold.test[u].iter().copied().collect();
                    prop_assert!(tr.is_disjoint(&te));
                    let all: BTreeSet<_> = tr.union(&te).copied().collect();
                    prop_assert_eq!(all, ranges[u].clone().collect::<BTreeSet<_>>());
                    let n = ranges[u].len();
                    prop_assert!(te.len() == n / k || te.len() == n / k + 1);
                    for id in te { tested[id] += 1; }
                }
            }
            prop_assert!(tested.iter().all(|&t| t == 1));
        }
    }
}
