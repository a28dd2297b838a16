//! Category-pair experiment cohorts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{dataset_hash, CategoryWeighting, IdIndex, Interaction, InteractionDataset};
use crate::matrix::BinaryMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortProvenance {
    pub source: String,
    pub source_hash: String,
    pub pair: (String, String),
    pub min_ratings: usize,
}

/// A dataset restricted to items of two categories and to active users.
///
/// The cohort's `item_categories` carry exactly the two pair labels, in pair
/// order, renormalized so each item's two weights sum to one.
#[derive(Debug, Clone)]
pub struct ExperimentCohort {
    pub dataset: InteractionDataset,
    pub category_pair: (String, String),
    pub provenance: CohortProvenance,
}

impl ExperimentCohort {
    pub fn pair_weights(&self) -> &CategoryWeighting {
        &self.dataset.item_categories
    }

    /// Index of a pair label in the cohort's weighting.
    pub fn category(&self, label: &str) -> Result<usize> {
        self.pair_weights()
            .label_index(label)
            .ok_or_else(|| Error::UnknownCategory(label.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    pub group_sizes: BTreeMap<String, usize>,
    /// Weighted item count `|C|` per category.
    pub category_sizes: BTreeMap<String, f64>,
    pub density: f64,
    pub sparsity: f64,
}

/// Restricts `dataset` to items carrying either label of `pair`, then drops
/// users with fewer than `min_ratings` interactions on those items.
///
/// One pass: items first, users once. Items left without interactions after
/// the user filter are dropped as well.
pub fn build_experiment_subset(
    dataset: &InteractionDataset,
    pair: (&str, &str),
    min_ratings: usize,
) -> Result<ExperimentCohort> {
    if min_ratings == 0 {
        return Err(Error::InvalidArgument("min_ratings must be at least 1".into()));
    }
    if pair.0 == pair.1 {
        return Err(Error::InvalidArgument("pair labels must differ".into()));
    }
    let cats = &dataset.item_categories;
    let c1 = cats
        .label_index(pair.0)
        .ok_or_else(|| Error::UnknownCategory(pair.0.to_string()))?;
    let c2 = cats
        .label_index(pair.1)
        .ok_or_else(|| Error::UnknownCategory(pair.1.to_string()))?;

    let pair_weight: Vec<Option<(f64, f64)>> = (0..dataset.n_items())
        .map(|i| {
            let (w1, w2) = (cats.weight(i, c1), cats.weight(i, c2));
            (w1 + w2 > 0.0).then(|| (w1 / (w1 + w2), w2 / (w1 + w2)))
        })
        .collect();

    let mut per_user = vec![0usize; dataset.n_users()];
    for x in &dataset.interactions {
        if pair_weight[x.item as usize].is_some() {
            per_user[x.user as usize] += 1;
        }
    }
    let keep_user: Vec<bool> = per_user.iter().map(|&n| n >= min_ratings).collect();
    let mut item_used = vec![false; dataset.n_items()];
    for x in &dataset.interactions {
        if keep_user[x.user as usize] && pair_weight[x.item as usize].is_some() {
            item_used[x.item as usize] = true;
        }
    }

    let users: Vec<usize> = (0..dataset.n_users()).filter(|&u| keep_user[u]).collect();
    let items: Vec<usize> = (0..dataset.n_items()).filter(|&i| item_used[i]).collect();
    if users.is_empty() || items.is_empty() {
        return Err(Error::EmptyCohort(format!(
            "no user has {min_ratings} ratings on {} or {}",
            pair.0, pair.1
        )));
    }
    let mut new_user = vec![u32::MAX; dataset.n_users()];
    for (k, &u) in users.iter().enumerate() {
        new_user[u] = k as u32;
    }
    let mut new_item = vec![u32::MAX; dataset.n_items()];
    for (k, &i) in items.iter().enumerate() {
        new_item[i] = k as u32;
    }

    let interactions: Vec<Interaction> = dataset
        .interactions
        .iter()
        .filter(|x| keep_user[x.user as usize] && item_used[x.item as usize])
        .map(|x| Interaction {
            user: new_user[x.user as usize],
            item: new_item[x.item as usize],
            ..*x
        })
        .collect();

    let weights = items
        .iter()
        .map(|&i| {
            let (w1, w2) = pair_weight[i].expect("kept items carry a pair label");
            [(0u32, w1), (1u32, w2)]
                .into_iter()
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();

    let restricted = InteractionDataset {
        users: IdIndex::from_ordered(users.iter().map(|&u| dataset.users.external(u).to_string()).collect()),
        items: IdIndex::from_ordered(items.iter().map(|&i| dataset.items.external(i).to_string()).collect()),
        interactions,
        item_categories: CategoryWeighting::from_parts(
            vec![pair.0.to_string(), pair.1.to_string()],
            weights,
        ),
        user_groups: dataset.user_groups.select_users(&users),
        rating_scale: dataset.rating_scale,
        source: dataset.source.clone(),
    };

    Ok(ExperimentCohort {
        dataset: restricted,
        category_pair: (pair.0.to_string(), pair.1.to_string()),
        provenance: CohortProvenance {
            source: dataset.source.clone(),
            source_hash: dataset_hash(dataset),
            pair: (pair.0.to_string(), pair.1.to_string()),
            min_ratings,
        },
    })
}

pub fn cohort_stats(cohort: &ExperimentCohort) -> CohortStats {
    let d = &cohort.dataset;
    let group_sizes = d
        .user_groups
        .labels()
        .iter()
        .map(|g| (g.clone(), d.user_groups.members(g).len()))
        .collect();
    let w = cohort.pair_weights();
    let category_sizes = w
        .labels()
        .iter()
        .enumerate()
        .map(|(c, l)| (l.clone(), w.category_size(c)))
        .collect();
    let density = if d.n_users() == 0 || d.n_items() == 0 {
        0.0
    } else {
        d.n_interactions() as f64 / (d.n_users() as f64 * d.n_items() as f64)
    };
    CohortStats {
        n_users: d.n_users(),
        n_items: d.n_items(),
        n_interactions: d.n_interactions(),
        group_sizes,
        category_sizes,
        density,
        sparsity: 1.0 - density,
    }
}

/// Users whose selections in `selections` put zero weight on `zero_category`
/// and positive weight on the other pair category. Ascending.
pub fn select_extreme_users(
    selections: &BinaryMatrix,
    cohort: &ExperimentCohort,
    zero_category: &str,
) -> Result<Vec<usize>> {
    let (a, b) = (&cohort.category_pair.0, &cohort.category_pair.1);
    if zero_category != a && zero_category != b {
        return Err(Error::UnknownCategory(zero_category.to_string()));
    }
    let zero = cohort.category(zero_category)?;
    let other = cohort.category(if zero_category == a { b } else { a })?;
    let w = cohort.pair_weights();
    Ok((0..selections.n_users())
        .filter(|&u| {
            let row = selections.row(u);
            let on = |c: usize| row.iter().map(|&i| w.weight(i as usize, c)).sum::<f64>();
            on(zero) == 0.0 && on(other) > 0.0
        })
        .collect())
}
