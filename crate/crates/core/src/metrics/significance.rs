//! Two-sided Mann–Whitney U test and the group |BD| comparison built on it.
//!
//! Small tie-free samples use the exact null distribution of `U`; otherwise
//! a normal approximation with tie-corrected variance and a 0.5 continuity
//! correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest combined sample size handled by exact enumeration.
const EXACT_MAX_N: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UMethod {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub method: UMethod,
}

/// Midranks (1-based) of the concatenation of `a` and `b`, plus the tie
/// group sizes.
fn midranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&x, &y| all[x].total_cmp(&all[y]));
    let mut ranks = vec![0.0; all.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && all[order[end]] == all[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Number of arrangements giving each `U` value, `0..=n1*n2`.
pub(crate) fn exact_u_counts(n1: usize, n2: usize) -> Vec<f64> {
    // c[j][u]: arrangements of i first-sample and j second-sample values
    let mut prev: Vec<Vec<f64>> = (0..=n2).map(|_| vec![1.0]).collect();
    for i in 1..=n1 {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n2 + 1);
        cur.push(vec![1.0]);
        for j in 1..=n2 {
            let mut c = vec![0.0; i * j + 1];
            // largest value from the first sample: it exceeds all j others
            for (u, v) in prev[j].iter().enumerate() {
                c[u + j] += v;
            }
            for (u, v) in cur[j - 1].iter().enumerate() {
                c[u] += v;
            }
            cur.push(c);
        }
        prev = cur;
    }
    prev.pop().expect("n2 + 1 rows")
}

fn exact_p(u: f64, n1: usize, n2: usize) -> f64 {
    let counts = exact_u_counts(n1, n2);
    let total: f64 = counts.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = counts[..=u].iter().sum::<f64>() / total;
    let upper: f64 = counts[u..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("Mann-Whitney U needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("Mann-Whitney U samples must be finite".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let (ranks, ties) = midranks(a, b);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;

    if ties.is_empty() && n1 + n2 <= EXACT_MAX_N {
        return Ok(MannWhitney {
            u,
            p_value: exact_p(u, n1, n2),
            method: UMethod::Exact,
        });
    }
    let n = (n1 + n2) as f64;
    let (f1, f2) = (n1 as f64, n2 as f64);
    let mean = f1 * f2 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term);
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.sf(z)).clamp(0.0, 1.0)
    };
    Ok(MannWhitney {
        u,
        p_value,
        method: UMethod::Asymptotic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub group_a: String,
    pub group_b: String,
    /// Σ over categories of |group BD|.
    pub group_a_stat: f64,
    pub group_b_stat: f64,
    pub p_value: f64,
    pub u_statistic: f64,
    pub test_name: String,
    /// Users contributing a per-user sample.
    pub n_a: usize,
    pub n_b: usize,
}

/// Per-group input to [`group_significance`].
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBdSamples {
    pub label: String,
    /// Group-level BD per category.
    pub group_bd: Vec<f64>,
    /// Per-user Σ |BD| over the categories where the user's BD is defined.
    pub per_user: Vec<f64>,
}

pub fn group_significance(a: &GroupBdSamples, b: &GroupBdSamples) -> Result<SignificanceResult> {
    for g in [a, b] {
        if g.per_user.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "group {} has no valid per-user bias disparities",
                g.label
            )));
        }
    }
    let mw = mann_whitney_u(&a.per_user, &b.per_user)?;
    let stat = |g: &GroupBdSamples| g.group_bd.iter().map(|v| v.abs()).sum();
    Ok(SignificanceResult {
        group_a: a.label.clone(),
        group_b: b.label.clone(),
        group_a_stat: stat(a),
        group_b_stat: stat(b),
        p_value: mw.p_value,
        u_statistic: mw.u,
        test_name: match mw.method {
            UMethod::Exact => "mann-whitney-u-two-sided-exact".into(),
            UMethod::Asymptotic => "mann-whitney-u-two-sided-normal".into(),
        },
        n_a: a.per_user.len(),
        n_b: b.per_user.len(),
    })
}
