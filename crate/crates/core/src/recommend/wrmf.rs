//! Weighted regularized matrix factorization for implicit feedback, solved
//! by alternating least squares.
//!
//! ```text
//! L = Σ_u Σ_i c_ui (s_ui − p_u·q_i)² + reg (‖P‖² + ‖Q‖²),   c_ui = 1 + α s_ui
//! ```
//!
//! Each half-sweep solves every row exactly, so `L` never increases.

use super::linalg::{add_outer, axpy, dot, gram, mat_vec, solve_spd, uniform_init};
use super::{FactorState, HyperParams, TrainingData};
use crate::error::{Error, Result};
use crate::seed;

const INIT_STREAM: u64 = 0x5752_4D46_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct WrmfState {
    pub factors: usize,
    pub alpha: f64,
    pub reg: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl WrmfState {
    pub fn init(data: &TrainingData, hyper: &HyperParams, seed: u64) -> Self {
        let mut rng = seed::rng(seed, &[INIT_STREAM]);
        WrmfState {
            factors: hyper.factors,
            alpha: hyper.alpha_confidence,
            reg: hyper.reg,
            p: uniform_init(&mut rng, data.n_users * hyper.factors),
            q: uniform_init(&mut rng, data.n_items * hyper.factors),
        }
    }

    /// Objective value, using `Σ_all (p·q)² = Σ_u p_uᵀ (QᵀQ) p_u` plus a
    /// correction over the observed cells.
    pub fn objective(&self, data: &TrainingData) -> f64 {
        let f = self.factors;
        let g = gram(&self.q, f);
        let mut total = 0.0;
        for (u, row) in data.rows.iter().enumerate() {
            let pu = &self.p[u * f..(u + 1) * f];
            total += dot(pu, &mat_vec(&g, pu));
            for &(i, _) in row {
                let x = dot(pu, &self.q[i as usize * f..(i as usize + 1) * f]);
                total += (1.0 + self.alpha) * (1.0 - x).powi(2) - x * x;
            }
        }
        total + self.reg * (dot(&self.p, &self.p) + dot(&self.q, &self.q))
    }

    /// Solves every row of `target` against the fixed `other` factors.
    /// `rows[r]` lists the positive columns of row `r`.
    fn solve_side(&self, target: &mut [f64], other: &[f64], rows: &[Vec<u32>]) -> Result<()> {
        let f = self.factors;
        let base = gram(other, f);
        for (r, pos) in rows.iter().enumerate() {
            let mut a = base.clone();
            let mut b = vec![0.0; f];
            for &c in pos {
                let v = &other[c as usize * f..(c as usize + 1) * f];
                add_outer(&mut a, v, self.alpha);
                axpy(&mut b, v, 1.0 + self.alpha);
            }
            for k in 0..f {
                a[k * f + k] += self.reg;
            }
            target[r * f..(r + 1) * f].copy_from_slice(&solve_spd(&a, &b)?);
        }
        Ok(())
    }

    pub fn update_users(&mut self, data: &TrainingData) -> Result<()> {
        let rows: Vec<Vec<u32>> = (0..data.n_users).map(|u| data.items_of(u)).collect();
        let mut p = std::mem::take(&mut self.p);
        let res = self.solve_side(&mut p, &self.q, &rows);
        self.p = p;
        res
    }

    pub fn update_items(&mut self, data: &TrainingData) -> Result<()> {
        let cols = data.selections().transpose_rows();
        let mut q = std::mem::take(&mut self.q);
        let res = self.solve_side(&mut q, &self.p, &cols);
        self.q = q;
        res
    }

    pub fn sweep(&mut self, data: &TrainingData) -> Result<()> {
        self.update_users(data)?;
        self.update_items(data)
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

pub(super) fn train(
    data: &TrainingData,
    hyper: &HyperParams,
    seed: u64,
    trace: &mut Vec<f64>,
) -> Result<FactorState> {
    let mut state = WrmfState::init(data, hyper, seed);
    for epoch in 0..hyper.epochs {
        state.sweep(data)?;
        let obj = state.objective(data);
        if !obj.is_finite() {
            return Err(Error::Diverged {
                epoch,
                learn_rate: hyper.learn_rate,
            });
        }
        trace.push(obj);
    }
    Ok(state.into_state())
}
