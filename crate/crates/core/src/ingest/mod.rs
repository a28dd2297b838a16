//! Dataset ingestion: MovieLens 1M, Yelp restaurants, and the CSV cache.

mod cache;
mod movielens;
mod yelp;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;

pub use cache::{dataset_hash, read_cache, write_cache};
pub use movielens::load_movielens;
pub use yelp::{load_yelp_restaurants, parse_label_list, YelpOptions, DEFAULT_REGION_LABELS};

/// Dense mapping between external ids and `0..n` indices.
///
/// Indices follow ascending external id order: numeric order when every id
/// parses as an unsigned integer, lexicographic order otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdIndex {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl IdIndex {
    pub fn from_ids<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = ids.into_iter().map(Into::into).collect();
        let mut ids: Vec<String> = set.into_iter().collect();
        if ids.iter().all(|s| s.parse::<u64>().is_ok()) {
            ids.sort_by_key(|s| s.parse::<u64>().unwrap_or(0));
        }
        Self::from_ordered(ids)
    }

    /// Builds an index that keeps `ids` in the given order.
    pub(crate) fn from_ordered(ids: Vec<String>) -> Self {
        let lookup = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        IdIndex { ids, lookup }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn external(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
    pub timestamp: i64,
}

/// Fractional category membership per item.
///
/// An item with `k` categories carries weight `1/k` on each, so the weights
/// of every categorized item sum to one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoryWeighting {
    labels: Vec<String>,
    weights: Vec<Vec<(u32, f64)>>,
}

impl CategoryWeighting {
    /// Equal weights over each item's distinct labels. Labels are sorted.
    pub fn equal_split(item_labels: &[Vec<String>]) -> Self {
        let labels: Vec<String> = item_labels
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&str, u32> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let weights = item_labels
            .iter()
            .map(|ls| {
                let distinct: BTreeSet<u32> = ls.iter().map(|l| index[l.as_str()]).collect();
                let w = 1.0 / distinct.len() as f64;
                distinct.into_iter().map(|c| (c, w)).collect()
            })
            .collect();
        CategoryWeighting { labels, weights }
    }

    pub(crate) fn from_parts(labels: Vec<String>, weights: Vec<Vec<(u32, f64)>>) -> Self {
        CategoryWeighting { labels, weights }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn n_items(&self) -> usize {
        self.weights.len()
    }

    /// `(category index, weight)` pairs for `item`, ascending by category.
    pub fn item(&self, item: usize) -> &[(u32, f64)] {
        &self.weights[item]
    }

    pub fn weight(&self, item: usize, category: usize) -> f64 {
        self.weights[item]
            .iter()
            .find(|(c, _)| *c as usize == category)
            .map_or(0.0, |&(_, w)| w)
    }

    /// Weighted item count `|C|` of a category.
    pub fn category_size(&self, category: usize) -> f64 {
        (0..self.weights.len())
            .map(|i| self.weight(i, category))
            .sum()
    }
}

/// Disjoint group label per user.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupPartition {
    labels: Vec<String>,
    of_user: Vec<u32>,
}

impl GroupPartition {
    pub fn from_user_labels<S: AsRef<str>>(user_labels: &[S]) -> Self {
        let labels: Vec<String> = user_labels
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let of_user = user_labels
            .iter()
            .map(|s| labels.iter().position(|l| l == s.as_ref()).unwrap() as u32)
            .collect();
        GroupPartition { labels, of_user }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_users(&self) -> usize {
        self.of_user.len()
    }

    pub fn group_of(&self, user: usize) -> &str {
        &self.labels[self.of_user[user] as usize]
    }

    pub fn members(&self, label: &str) -> Vec<usize> {
        self.of_user
            .iter()
            .enumerate()
            .filter(|(_, &g)| self.labels[g as usize] == label)
            .map(|(u, _)| u)
            .collect()
    }

    pub(crate) fn select_users(&self, users: &[usize]) -> Self {
        let labels: Vec<&str> = users.iter().map(|&u| self.group_of(u)).collect();
        GroupPartition::from_user_labels(&labels)
    }
}

/// Canonical rating data: dense users and items, one interaction per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub users: IdIndex,
    pub items: IdIndex,
    /// Sorted by `(user, item)`.
    pub interactions: Vec<Interaction>,
    pub item_categories: CategoryWeighting,
    pub user_groups: GroupPartition,
    pub rating_scale: (f64, f64),
    pub source: String,
}

/// One rating keyed by external ids, as read from a source file.
#[derive(Debug, Clone)]
pub(crate) struct RawRating {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub timestamp: i64,
}

impl InteractionDataset {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_interactions(&self) -> usize {
        self.interactions.len()
    }

    /// Assembles a dataset from external-id records. Users and items are the
    /// ones referenced by at least one rating; duplicates must already be
    /// resolved by the caller.
    pub(crate) fn assemble(
        ratings: Vec<RawRating>,
        user_group: impl Fn(&str) -> String,
        item_labels: impl Fn(&str) -> Vec<String>,
        rating_scale: (f64, f64),
        source: &str,
    ) -> Self {
        let users = IdIndex::from_ids(ratings.iter().map(|r| r.user.as_str()));
        let items = IdIndex::from_ids(ratings.iter().map(|r| r.item.as_str()));
        let mut interactions: Vec<Interaction> = ratings
            .iter()
            .map(|r| Interaction {
                user: users.get(&r.user).unwrap() as u32,
                item: items.get(&r.item).unwrap() as u32,
                rating: r.rating,
                timestamp: r.timestamp,
            })
            .collect();
        interactions.sort_by_key(|x| (x.user, x.item));
        let groups: Vec<String> = users.ids().iter().map(|u| user_group(u)).collect();
        let labels: Vec<Vec<String>> = items.ids().iter().map(|i| item_labels(i)).collect();
        InteractionDataset {
            users,
            items,
            interactions,
            item_categories: CategoryWeighting::equal_split(&labels),
            user_groups: GroupPartition::from_user_labels(&groups),
            rating_scale,
            source: source.to_string(),
        }
    }

    /// Checks the structural invariants; used by the cache reader and tests.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.rating_scale;
        let mut prev: Option<(u32, u32)> = None;
        for x in &self.interactions {
            if x.user as usize >= self.n_users() || x.item as usize >= self.n_items() {
                return Err(Error::InvalidArgument(format!(
                    "interaction ({}, {}) out of range",
                    x.user, x.item
                )));
            }
            if prev.is_some_and(|p| p >= (x.user, x.item)) {
                return Err(Error::InvalidArgument(
                    "interactions not strictly sorted by (user, item)".into(),
                ));
            }
            if !(lo..=hi).contains(&x.rating) {
                return Err(Error::InvalidArgument(format!(
                    "rating {} outside scale [{lo}, {hi}]",
                    x.rating
                )));
            }
            prev = Some((x.user, x.item));
        }
        if self.item_categories.n_items() != self.n_items() {
            return Err(Error::InvalidArgument("category weights do not cover items".into()));
        }
        for i in 0..self.n_items() {
            let ws = self.item_categories.item(i);
            if ws.iter().any(|&(_, w)| w <= 0.0 || w > 1.0) {
                return Err(Error::InvalidArgument(format!("item {i} has a weight outside (0, 1]")));
            }
            let total: f64 = ws.iter().map(|&(_, w)| w).sum();
            if !ws.is_empty() && (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("item {i} weights sum to {total}")));
            }
        }
        if self.user_groups.n_users() != self.n_users() {
            return Err(Error::InvalidArgument("group partition does not cover users".into()));
        }
        Ok(())
    }

    /// Interactions of each user as index ranges into `interactions`.
    pub fn user_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut ranges = vec![0..0; self.n_users()];
        let mut start = 0;
        while start < self.interactions.len() {
            let u = self.interactions[start].user;
            let mut end = start;
            while end < self.interactions.len() && self.interactions[end].user == u {
                end += 1;
            }
            ranges[u as usize] = start..end;
            start = end;
        }
        ranges
    }
}

/// Selection matrix: `(u, i)` is set iff `u` rated `i` (at or above the
/// threshold, when one is given).
pub fn binarize(dataset: &InteractionDataset, like_threshold: Option<f64>) -> Result<BinaryMatrix> {
    if let Some(t) = like_threshold {
        let (lo, hi) = dataset.rating_scale;
        if !(lo..=hi).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "like threshold {t} outside rating scale [{lo}, {hi}]"
            )));
        }
    }
    Ok(BinaryMatrix::from_pairs(
        dataset.n_users(),
        dataset.n_items(),
        dataset
            .interactions
            .iter()
            .filter(|x| like_threshold.is_none_or(|t| x.rating >= t))
            .map(|x| (x.user as usize, x.item as usize)),
    ))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn raw(user: &str, item: &str, rating: f64) -> RawRating {
        RawRating {
            user: user.into(),
            item: item.into(),
            rating,
            timestamp: 0,
        }
    }

    fn tiny(ratings: &[f64]) -> InteractionDataset {
        let rs = ratings
            .iter()
            .enumerate()
            .map(|(k, &r)| raw("1", &(k + 1).to_string(), r))
            .collect();
        InteractionDataset::assemble(rs, |_| "M".into(), |_| vec!["A".into()], (1.0, 5.0), "t")
    }

    #[test]
    fn numeric_ids_sort_numerically() {
        let idx = IdIndex::from_ids(["10", "9", "100", "9"]);
        assert_eq!(idx.ids(), &["9", "10", "100"]);
        let idx = IdIndex::from_ids(["b", "a", "10"]);
        assert_eq!(idx.ids(), &["10", "a", "b"]);
    }

    #[test]
    fn equal_split_weights() {
        let w = CategoryWeighting::equal_split(&[
            vec!["Action".into(), "Thriller".into()],
            vec!["Drama".into()],
            vec![],
        ]);
        assert_eq!(w.labels(), &["Action", "Drama", "Thriller"]);
        assert_eq!(w.item(0), &[(0, 0.5), (2, 0.5)]);
        assert_eq!(w.weight(1, 1), 1.0);
        assert!(w.item(2).is_empty());
        assert_eq!(w.category_size(0), 0.5);
    }

    #[test]
    fn binarize_support() {
        let d = tiny(&[3.0, 4.0, 5.0]);
        assert_eq!(binarize(&d, None).unwrap().nnz(), 3);
        assert_eq!(binarize(&d, Some(4.0)).unwrap().nnz(), 2);
        assert!(binarize(&d, Some(6.0)).is_err());
    }

    #[test]
    fn binarize_empty_dataset() {
        let d = InteractionDataset::assemble(vec![], |_| "M".into(), |_| vec![], (1.0, 5.0), "t");
        let m = binarize(&d, None).unwrap();
        assert!(m.is_empty());
        assert_eq!(m.n_users(), 0);
    }

    #[test]
    fn user_ranges_cover_interactions() {
        let rs = vec![raw("2", "1", 1.0), raw("1", "1", 2.0), raw("2", "2", 3.0)];
        let d = InteractionDataset::assemble(rs, |_| "M".into(), |_| vec![], (1.0, 5.0), "t");
        assert_eq!(d.user_ranges(), vec![0..1, 1..3]);
        d.validate().unwrap();
    }
}
