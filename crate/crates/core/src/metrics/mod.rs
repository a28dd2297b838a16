//! Preference ratio, bias, bias disparity, calibration, accuracy and
//! significance.
//!
//! ```text
//! PR(G, C)  = Σ_{u∈G} Σ_i M(u,i) w_i(C) / Σ_{u∈G} Σ_i M(u,i)
//! P(C)      = |C| / m                (|C| = Σ_i w_i(C))
//! B(G, C)   = PR(G, C) / P(C)
//! BD(G, C)  = (B_R − B_S) / B_S      = (PR_R − PR_S) / PR_S
//! ```
//!
//! General BD is the same formula with every user in `G`.

mod significance;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cohort::CohortStats;
use crate::error::{Error, Result};
use crate::ingest::CategoryWeighting;
use crate::matrix::BinaryMatrix;

pub use significance::{
    group_significance, mann_whitney_u, GroupBdSamples, MannWhitney, SignificanceResult, UMethod,
};

/// Default smoothing for [`kl_calibration`].
pub const DEFAULT_CALIBRATION_ALPHA: f64 = 0.01;

pub fn preference_ratio(
    m: &BinaryMatrix,
    users: &[usize],
    category: usize,
    weights: &CategoryWeighting,
) -> Result<f64> {
    let mut hits = 0.0;
    let mut total = 0usize;
    for &u in users {
        let row = m.row(u);
        total += row.len();
        hits += row.iter().map(|&i| weights.weight(i as usize, category)).sum::<f64>();
    }
    if total == 0 {
        return Err(Error::UndefinedPreferenceRatio);
    }
    Ok(hits / total as f64)
}

/// `|C| / m` from cohort statistics.
pub fn category_prior(stats: &CohortStats, category: &str) -> Result<f64> {
    let size = stats
        .category_sizes
        .get(category)
        .ok_or_else(|| Error::UnknownCategory(category.to_string()))?;
    if stats.n_items == 0 {
        return Err(Error::InvalidArgument("category prior over zero items".into()));
    }
    Ok(size / stats.n_items as f64)
}

/// `|C| / m` straight from a weighting.
pub fn category_prior_of(weights: &CategoryWeighting, category: usize) -> Result<f64> {
    if weights.n_items() == 0 {
        return Err(Error::InvalidArgument("category prior over zero items".into()));
    }
    Ok(weights.category_size(category) / weights.n_items() as f64)
}

pub fn bias(pr: f64, prior: f64) -> Result<f64> {
    if !(prior > 0.0) {
        return Err(Error::ZeroPrior);
    }
    Ok(pr / prior)
}

/// `(output − input) / input`, for biases or preference ratios alike.
pub fn bias_disparity(input: f64, output: f64) -> Result<f64> {
    if !(input > 0.0) {
        return Err(Error::UndefinedPreferenceRatio);
    }
    Ok((output - input) / input)
}

fn check_distribution(d: &[f64], name: &str) -> Result<()> {
    let sum: f64 = d.iter().sum();
    if d.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("{name} = {d:?}")));
    }
    Ok(())
}

/// `Σ_g p(g) ln(p(g) / q̃(g))` with `q̃ = (1 − α) q + α p`.
pub fn kl_calibration(p: &[f64], q: &[f64], alpha: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidDistribution("length mismatch".into()));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let kl = p
        .iter()
        .zip(q)
        .filter(|(&pg, _)| pg > 0.0)
        .map(|(&pg, &qg)| pg * (pg / ((1.0 - alpha) * qg + alpha * pg)).ln())
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// Normalized category distribution of a list of items; `None` when the
/// items carry no category weight.
pub fn category_distribution(items: &[u32], weights: &CategoryWeighting) -> Option<Vec<f64>> {
    let mut d = vec![0.0; weights.labels().len()];
    for &i in items {
        for &(c, w) in weights.item(i as usize) {
            d[c as usize] += w;
        }
    }
    let sum: f64 = d.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    d.iter_mut().for_each(|v| *v /= sum);
    Some(d)
}

/// Binary-relevance nDCG of the first `k` ranked items; `None` for an empty
/// test set. `test` must be sorted.
pub fn ndcg_at_k(ranked: &[u32], test: &[u32], k: usize) -> Option<f64> {
    assert!(k >= 1, "k must be at least 1");
    if test.is_empty() {
        return None;
    }
    let gain = |pos: usize| 1.0 / ((pos + 1) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| test.binary_search(i).is_ok())
        .map(|(p, _)| gain(p + 1))
        .sum();
    let ideal: f64 = (1..=k.min(test.len())).map(gain).sum();
    Some(dcg / ideal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdcgSummary {
    pub mean: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Mean nDCG over users; users with no test items are skipped.
pub fn mean_ndcg(lists: &[Vec<u32>], test: &BinaryMatrix, k: usize) -> NdcgSummary {
    let mut sum = 0.0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for (u, list) in lists.iter().enumerate() {
        match ndcg_at_k(list, test.row(u), k) {
            Some(v) => {
                sum += v;
                evaluated += 1;
            }
            None => skipped += 1,
        }
    }
    NdcgSummary {
        mean: if evaluated == 0 { 0.0 } else { sum / evaluated as f64 },
        evaluated,
        skipped,
    }
}

/// The three user scopes of an audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// One user group, e.g. "F".
    Group,
    /// Every user.
    General,
    /// Users with zero input preference on one pair category.
    Extreme,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Group => "group",
            Scope::General => "general",
            Scope::Extreme => "extreme",
        }
    }
}

/// A named set of users evaluated together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSet {
    pub scope: Scope,
    pub label: String,
    pub users: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceCell {
    pub scope: Scope,
    pub group: String,
    pub category: String,
    pub pr_input: f64,
    pub pr_output: f64,
    pub bias_input: f64,
    pub bias_output: f64,
    /// `None` when the input preference ratio is zero.
    pub bias_disparity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceReport {
    pub priors: BTreeMap<String, f64>,
    pub cells: Vec<PreferenceCell>,
}

impl PreferenceReport {
    pub fn cell(&self, scope: Scope, group: &str, category: &str) -> Option<&PreferenceCell> {
        self.cells
            .iter()
            .find(|c| c.scope == scope && c.group == group && c.category == category)
    }
}

/// PR, bias and BD of every (user set, category) cell.
pub fn preference_report(
    input: &BinaryMatrix,
    output: &BinaryMatrix,
    weights: &CategoryWeighting,
    sets: &[UserSet],
) -> Result<PreferenceReport> {
    let labels = weights.labels();
    let mut priors = BTreeMap::new();
    for (c, l) in labels.iter().enumerate() {
        priors.insert(l.clone(), category_prior_of(weights, c)?);
    }
    let mut cells = Vec::with_capacity(sets.len() * labels.len());
    for set in sets {
        for (c, l) in labels.iter().enumerate() {
            let prior = priors[l];
            let pr_input = preference_ratio(input, &set.users, c, weights)?;
            let pr_output = preference_ratio(output, &set.users, c, weights)?;
            cells.push(PreferenceCell {
                scope: set.scope,
                group: set.label.clone(),
                category: l.clone(),
                pr_input,
                pr_output,
                bias_input: bias(pr_input, prior)?,
                bias_output: bias(pr_output, prior)?,
                bias_disparity: bias_disparity(pr_input, pr_output).ok(),
            });
        }
    }
    Ok(PreferenceReport { priors, cells })
}

/// Per-user Σ_C |BD(u, C)| over the categories where the user's input PR is
/// positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PerUserBd {
    /// Aligned with the queried users; `None` if no category is defined.
    pub values: Vec<Option<f64>>,
    /// (user, category) pairs skipped for a zero input PR.
    pub excluded_pairs: usize,
}

pub fn per_user_abs_bd(
    input: &BinaryMatrix,
    output: &BinaryMatrix,
    weights: &CategoryWeighting,
    users: &[usize],
) -> PerUserBd {
    let mut excluded_pairs = 0;
    let values = users
        .iter()
        .map(|&u| {
            let one = [u];
            let mut sum = None;
            for c in 0..weights.labels().len() {
                let pin = preference_ratio(input, &one, c, weights).ok();
                let pout = preference_ratio(output, &one, c, weights).ok();
                match (pin, pout) {
                    (Some(i), Some(o)) => match bias_disparity(i, o) {
                        Ok(bd) => *sum.get_or_insert(0.0) += bd.abs(),
                        Err(_) => excluded_pairs += 1,
                    },
                    _ => excluded_pairs += 1,
                }
            }
            sum
        })
        .collect();
    PerUserBd {
        values,
        excluded_pairs,
    }
}

/// Per-user calibration of output against input; `None` where either row
/// has no category mass.
pub fn user_calibration(
    input: &BinaryMatrix,
    output: &BinaryMatrix,
    weights: &CategoryWeighting,
    users: &[usize],
    alpha: f64,
) -> Result<Vec<Option<f64>>> {
    users
        .iter()
        .map(|&u| {
            match (
                category_distribution(input.row(u), weights),
                category_distribution(output.row(u), weights),
            ) {
                (Some(p), Some(q)) => kl_calibration(&p, &q, alpha).map(Some),
                _ => Ok(None),
            }
        })
        .collect()
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    (mean, var.sqrt())
}
