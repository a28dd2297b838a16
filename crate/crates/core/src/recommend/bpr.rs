//! Bayesian personalized ranking with matrix-factorization scores.
//!
//! For a triple `(u, i, j)` with `i` selected and `j` not, `x = p_u·(q_i − q_j)`.
//! Per-triple loss:
//!
//! ```text
//! ℓ = −ln σ(x) + ½ reg (‖p_u‖² + ‖q_i‖² + ‖q_j‖²)
//! ```
//!
//! Each epoch draws `sample_factor × |train|` triples uniformly: a user with
//! at least one selected and one unselected item, a selected item, then an
//! unselected item by rejection.

use rand::Rng;

use super::linalg::{dot, uniform_init};
use super::{FactorState, HyperParams, TrainingData};
use crate::error::{Error, Result};
use crate::seed;

const INIT_STREAM: u64 = 0x4250_5200_0001;
const SAMPLE_STREAM: u64 = 0x4250_5200_0002;

/// `−ln σ(x)` without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BprParams {
    pub factors: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl BprParams {
    pub fn init(data: &TrainingData, factors: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed, &[INIT_STREAM]);
        BprParams {
            factors,
            p: uniform_init(&mut rng, data.n_users * factors),
            q: uniform_init(&mut rng, data.n_items * factors),
        }
    }

    fn margin(&self, u: usize, i: usize, j: usize) -> f64 {
        let f = self.factors;
        let pu = &self.p[u * f..(u + 1) * f];
        dot(pu, &self.q[i * f..(i + 1) * f]) - dot(pu, &self.q[j * f..(j + 1) * f])
    }

    /// Summed loss over a fixed list of triples.
    pub fn loss(&self, triples: &[(u32, u32, u32)], reg: f64) -> f64 {
        let f = self.factors;
        triples
            .iter()
            .map(|&(u, i, j)| {
                let (u, i, j) = (u as usize, i as usize, j as usize);
                let sq = |v: &[f64], r: usize| dot(&v[r * f..(r + 1) * f], &v[r * f..(r + 1) * f]);
                neg_log_sigmoid(self.margin(u, i, j))
                    + 0.5 * reg * (sq(&self.p, u) + sq(&self.q, i) + sq(&self.q, j))
            })
            .sum()
    }

    /// Flat layout `[p, q]`.
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.p[..], &self.q].concat()
    }

    pub fn set_from(&mut self, flat: &[f64]) {
        let (a, b) = flat.split_at(self.p.len());
        self.p.copy_from_slice(a);
        self.q.copy_from_slice(b);
    }

    pub fn gradient(&self, triples: &[(u32, u32, u32)], reg: f64) -> Vec<f64> {
        let f = self.factors;
        let mut gp = vec![0.0; self.p.len()];
        let mut gq = vec![0.0; self.q.len()];
        for &(u, i, j) in triples {
            let (u, i, j) = (u as usize, i as usize, j as usize);
            // d/dx of −ln σ(x) is −σ(−x)
            let g = -sigmoid(-self.margin(u, i, j));
            for k in 0..f {
                let (pk, qi, qj) = (self.p[u * f + k], self.q[i * f + k], self.q[j * f + k]);
                gp[u * f + k] += g * (qi - qj) + reg * pk;
                gq[i * f + k] += g * pk + reg * qi;
                gq[j * f + k] += -g * pk + reg * qj;
            }
        }
        [gp, gq].concat()
    }

    /// One SGD step; returns the log-loss term before the update.
    fn step(&mut self, u: usize, i: usize, j: usize, lr: f64, reg: f64) -> f64 {
        let f = self.factors;
        let x = self.margin(u, i, j);
        let g = sigmoid(-x);
        for k in 0..f {
            let (pk, qi, qj) = (self.p[u * f + k], self.q[i * f + k], self.q[j * f + k]);
            self.p[u * f + k] += lr * (g * (qi - qj) - reg * pk);
            self.q[i * f + k] += lr * (g * pk - reg * qi);
            self.q[j * f + k] += lr * (-g * pk - reg * qj);
        }
        neg_log_sigmoid(x)
    }

    pub fn into_state(self) -> FactorState {
        FactorState {
            factors: self.factors,
            user: self.p,
            item: self.q,
            user_bias: Vec::new(),
            item_bias: Vec::new(),
            global_mean: 0.0,
            implicit: None,
            effective_user: None,
        }
    }
}

/// Draws one epoch of triples. `eligible` lists users with both selected
/// and unselected items.
fn sample_triples(
    data: &TrainingData,
    eligible: &[usize],
    count: usize,
    rng: &mut impl Rng,
) -> Vec<(u32, u32, u32)> {
    let sel = data.selections();
    (0..count)
        .map(|_| {
            let u = eligible[rng.random_range(0..eligible.len())];
            let row = sel.row(u);
            let i = row[rng.random_range(0..row.len())];
            let j = loop {
                let j = rng.random_range(0..data.n_items) as u32;
                if row.binary_search(&j).is_err() {
                    break j;
                }
            };
            (u as u32, i, j)
        })
        .collect()
}

pub(super) fn train(
    data: &TrainingData,
    hyper: &HyperParams,
    seed: u64,
    trace: &mut Vec<f64>,
) -> Result<FactorState> {
    let mut params = BprParams::init(data, hyper.factors, seed);
    let eligible: Vec<usize> = (0..data.n_users)
        .filter(|&u| !data.rows[u].is_empty() && data.rows[u].len() < data.n_items)
        .collect();
    if eligible.is_empty() {
        return Ok(params.into_state());
    }
    let per_epoch = hyper.sample_factor * data.nnz();
    for epoch in 0..hyper.epochs {
        let mut rng = seed::rng(seed, &[SAMPLE_STREAM, epoch as u64]);
        let triples = sample_triples(data, &eligible, per_epoch, &mut rng);
        let mut total = 0.0;
        for &(u, i, j) in &triples {
            total += params.step(u as usize, i as usize, j as usize, hyper.learn_rate, hyper.reg);
        }
        let mean = total / per_epoch as f64;
        if !mean.is_finite() || params.p.iter().chain(&params.q).any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                learn_rate: hyper.learn_rate,
            });
        }
        trace.push(mean);
    }
    Ok(params.into_state())
}
