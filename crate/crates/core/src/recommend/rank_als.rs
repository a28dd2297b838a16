//! RankALS: pairwise squared ranking loss minimized by alternating least
//! squares.
//!
//! With binary selections `r_ui`, confidence `c_ui = r_ui`, uniform item
//! importance `s_j = 1` and `x_uj = p_u·q_j − r_uj`:
//!
//! ```text
//! L = Σ_u Σ_{i∈R(u)} Σ_j (x_ui − x_uj)² + reg (‖P‖² + ‖Q‖²)
//! ```
//!
//! The per-user sum expands to `m Σ_{R(u)} x² − 2 (Σ_{R(u)} x)(Σ_j x) + n_u Σ_j x²`,
//! which keeps the user step at `O(n_u f² + f³)`. Item vectors are updated
//! one at a time (Gauss-Seidel) with running aggregates, so every step is an
//! exact minimization and `L` never increases.

use super::linalg::{add_outer, axpy, dot, gram, mat_vec, solve_spd, uniform_init};
use super::{FactorState, HyperParams, TrainingData};
use crate::error::{Error, Result};
use crate::seed;

const INIT_STREAM: u64 = 0x5241_4C53_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct RankAlsState {
    pub factors: usize,
    pub reg: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl RankAlsState {
    pub fn init(data: &TrainingData, hyper: &HyperParams, seed: u64) -> Self {
        let mut rng = seed::rng(seed, &[INIT_STREAM]);
        RankAlsState {
            factors: hyper.factors,
            reg: hyper.reg,
            p: uniform_init(&mut rng, data.n_users * hyper.factors),
            q: uniform_init(&mut rng, data.n_items * hyper.factors),
        }
    }

    fn pu(&self, u: usize) -> &[f64] {
        &self.p[u * self.factors..(u + 1) * self.factors]
    }

    fn qi(&self, i: usize) -> &[f64] {
        &self.q[i * self.factors..(i + 1) * self.factors]
    }

    fn item_sum(&self, items: &[u32]) -> Vec<f64> {
        let mut s = vec![0.0; self.factors];
        for &i in items {
            axpy(&mut s, self.qi(i as usize), 1.0);
        }
        s
    }

    pub fn objective(&self, data: &TrainingData) -> f64 {
        let m = data.n_items as f64;
        let g = gram(&self.q, self.factors);
        let q_all = self.item_sum(&(0..data.n_items as u32).collect::<Vec<_>>());
        let mut total = 0.0;
        for u in 0..data.n_users {
            let items = data.items_of(u);
            if items.is_empty() {
                continue;
            }
            let n = items.len() as f64;
            let pu = self.pu(u);
            let q_sel = self.item_sum(&items);
            let sel_sq: f64 = items
                .iter()
                .map(|&i| (dot(pu, self.qi(i as usize)) - 1.0).powi(2))
                .sum();
            let sel_sum = dot(pu, &q_sel) - n;
            let all_sum = dot(pu, &q_all) - n;
            let all_sq = dot(pu, &mat_vec(&g, pu)) - 2.0 * dot(pu, &q_sel) + n;
            total += m * sel_sq - 2.0 * sel_sum * all_sum + n * all_sq;
        }
        total + self.reg * (dot(&self.p, &self.p) + dot(&self.q, &self.q))
    }

    pub fn update_users(&mut self, data: &TrainingData) -> Result<()> {
        let f = self.factors;
        let m = data.n_items as f64;
        let g = gram(&self.q, f);
        let q_all = self.item_sum(&(0..data.n_items as u32).collect::<Vec<_>>());
        for u in 0..data.n_users {
            let items = data.items_of(u);
            let n = items.len() as f64;
            let mut a = vec![0.0; f * f];
            for &i in &items {
                add_outer(&mut a, self.qi(i as usize), m);
            }
            let q_sel = self.item_sum(&items);
            for r in 0..f {
                for c in 0..f {
                    a[r * f + c] += n * g[r * f + c] - q_sel[r] * q_all[c] - q_all[r] * q_sel[c];
                }
                a[r * f + r] += self.reg;
            }
            let b: Vec<f64> = (0..f).map(|k| m * q_sel[k] - n * q_all[k]).collect();
            let x = solve_spd(&a, &b)?;
            self.p[u * f..(u + 1) * f].copy_from_slice(&x);
        }
        Ok(())
    }

    pub fn update_items(&mut self, data: &TrainingData) -> Result<()> {
        let f = self.factors;
        let m = data.n_items as f64;
        let rows: Vec<Vec<u32>> = (0..data.n_users).map(|u| data.items_of(u)).collect();
        let n: Vec<f64> = rows.iter().map(|r| r.len() as f64).collect();
        let cols = data.selections().transpose_rows();

        // h = Σ_u p_u T_u with T_u = Σ_{R(u)} x_ui
        let mut h = vec![0.0; f];
        let mut g_n = vec![0.0; f * f];
        for u in 0..data.n_users {
            let pu = self.pu(u);
            let t = dot(pu, &self.item_sum(&rows[u])) - n[u];
            axpy(&mut h, pu, t);
            add_outer(&mut g_n, pu, n[u]);
        }
        let mut q_all = self.item_sum(&(0..data.n_items as u32).collect::<Vec<_>>());

        for k in 0..data.n_items {
            let mut a = g_n.clone();
            let mut a_k = vec![0.0; f * f];
            let mut b = h.clone();
            for &u in &cols[k] {
                let u = u as usize;
                let pu = self.pu(u);
                add_outer(&mut a_k, pu, 1.0);
                let x_uk = dot(pu, self.qi(k)) - 1.0;
                let x_all = dot(pu, &q_all) - n[u];
                axpy(&mut b, pu, m + n[u] - 2.0 + x_all - 2.0 * x_uk);
            }
            for (dst, src) in a.iter_mut().zip(&a_k) {
                *dst += (m - 2.0) * src;
            }
            for r in 0..f {
                a[r * f + r] += self.reg;
            }
            let new = solve_spd(&a, &b)?;
            let delta: Vec<f64> = new.iter().zip(self.qi(k)).map(|(a, b)| a - b).collect();
            axpy(&mut h, &mat_vec(&a_k, &delta), 1.0);
            axpy(&mut q_all, &delta, 1.0);
            self.q[k * f..(k + 1) * f].copy_from_slice(&new);
        }
        Ok(())
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
    let mut state = RankAlsState::init(data, hyper, seed);
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
