//! SVD++: biased factorization plus an implicit-feedback term.
//!
//! ```text
//! r̂_ui = μ + b_u + b_i + q_i · (p_u + |N(u)|^-½ Σ_{j∈N(u)} y_j)
//! L = Σ_(u,i) ½ e_ui² + ½ reg (b_u² + b_i² + ‖p_u‖² + ‖q_i‖²) + ½ reg Σ_u Σ_{j∈N(u)} ‖y_j‖²
//! ```
//!
//! `N(u)` is the user's training item set. Training visits users in a
//! shuffled order; the `y` vectors of a user are updated once after all of
//! that user's ratings, which matches the per-user `y` penalty above.

use rand::seq::SliceRandom;

use super::linalg::{dot, uniform_init};
use super::{FactorState, HyperParams, TrainingData};
use crate::error::{Error, Result};
use crate::seed;

const INIT_STREAM: u64 = 0x5356_4450_0001;
const ORDER_STREAM: u64 = 0x5356_4450_0002;

#[derive(Debug, Clone, PartialEq)]
pub struct SvdppParams {
    pub factors: usize,
    pub global_mean: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub y: Vec<f64>,
}

impl SvdppParams {
    pub fn init(data: &TrainingData, factors: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed, &[INIT_STREAM]);
        SvdppParams {
            factors,
            global_mean: data.mean_rating(),
            user_bias: vec![0.0; data.n_users],
            item_bias: vec![0.0; data.n_items],
            p: uniform_init(&mut rng, data.n_users * factors),
            q: uniform_init(&mut rng, data.n_items * factors),
            y: uniform_init(&mut rng, data.n_items * factors),
        }
    }

    /// `|N(u)|^-½ Σ y_j` over the user's rated items.
    fn implicit_sum(&self, row: &[(u32, f64)]) -> Vec<f64> {
        let f = self.factors;
        let mut z = vec![0.0; f];
        if row.is_empty() {
            return z;
        }
        for &(j, _) in row {
            let j = j as usize;
            for k in 0..f {
                z[k] += self.y[j * f + k];
            }
        }
        let norm = (row.len() as f64).powf(-0.5);
        z.iter_mut().for_each(|v| *v *= norm);
        z
    }

    fn predict_with(&self, u: usize, i: usize, z: &[f64]) -> f64 {
        let f = self.factors;
        let pu = &self.p[u * f..(u + 1) * f];
        let qi = &self.q[i * f..(i + 1) * f];
        let eff: f64 = (0..f).map(|k| (pu[k] + z[k]) * qi[k]).sum();
        self.global_mean + self.user_bias[u] + self.item_bias[i] + eff
    }

    pub fn loss(&self, data: &TrainingData, reg: f64) -> f64 {
        let f = self.factors;
        let mut total = 0.0;
        for (u, row) in data.rows.iter().enumerate() {
            let z = self.implicit_sum(row);
            let pu = &self.p[u * f..(u + 1) * f];
            for &(i, r) in row {
                let i = i as usize;
                let qi = &self.q[i * f..(i + 1) * f];
                let e = r - self.predict_with(u, i, &z);
                let norm = self.user_bias[u].powi(2) + self.item_bias[i].powi(2) + dot(pu, pu) + dot(qi, qi);
                total += 0.5 * e * e + 0.5 * reg * norm;
                let yi = &self.y[i * f..(i + 1) * f];
                total += 0.5 * reg * dot(yi, yi);
            }
        }
        total
    }

    /// Flat layout `[user_bias, item_bias, p, q, y]`.
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.user_bias[..], &self.item_bias, &self.p, &self.q, &self.y].concat()
    }

    pub fn set_from(&mut self, flat: &[f64]) {
        let mut rest = flat;
        for part in [
            &mut self.user_bias,
            &mut self.item_bias,
            &mut self.p,
            &mut self.q,
            &mut self.y,
        ] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
        assert!(rest.is_empty(), "flat parameter length mismatch");
    }

    pub fn gradient(&self, data: &TrainingData, reg: f64) -> Vec<f64> {
        let f = self.factors;
        let mut g = self.clone();
        for v in [&mut g.user_bias, &mut g.item_bias, &mut g.p, &mut g.q, &mut g.y] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        for (u, row) in data.rows.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            let z = self.implicit_sum(row);
            let norm = (row.len() as f64).powf(-0.5);
            let mut gz = vec![0.0; f];
            for &(i, r) in row {
                let i = i as usize;
                let e = r - self.predict_with(u, i, &z);
                g.user_bias[u] += -e + reg * self.user_bias[u];
                g.item_bias[i] += -e + reg * self.item_bias[i];
                for k in 0..f {
                    let pk = self.p[u * f + k];
                    let qk = self.q[i * f + k];
                    g.p[u * f + k] += -e * qk + reg * pk;
                    g.q[i * f + k] += -e * (pk + z[k]) + reg * qk;
                    gz[k] += -e * qk;
                }
            }
            for &(j, _) in row {
                let j = j as usize;
                for k in 0..f {
                    g.y[j * f + k] += norm * gz[k] + reg * self.y[j * f + k];
                }
            }
        }
        g.to_vec()
    }

    fn user_pass(&mut self, u: usize, row: &[(u32, f64)], order: &[usize], lr: f64, reg: f64) {
        let f = self.factors;
        let z = self.implicit_sum(row);
        let norm = (row.len() as f64).powf(-0.5);
        let mut gz = vec![0.0; f];
        for &idx in order {
            let (i, r) = row[idx];
            let i = i as usize;
            let e = r - self.predict_with(u, i, &z);
            self.user_bias[u] += lr * (e - reg * self.user_bias[u]);
            self.item_bias[i] += lr * (e - reg * self.item_bias[i]);
            for k in 0..f {
                let pk = self.p[u * f + k];
                let qk = self.q[i * f + k];
                self.p[u * f + k] += lr * (e * qk - reg * pk);
                self.q[i * f + k] += lr * (e * (pk + z[k]) - reg * qk);
                gz[k] += e * qk;
            }
        }
        for &(j, _) in row {
            let j = j as usize;
            for k in 0..f {
                let yk = self.y[j * f + k];
                self.y[j * f + k] += lr * (norm * gz[k] - reg * yk);
            }
        }
    }

    pub fn into_state(self, data: &TrainingData) -> FactorState {
        let f = self.factors;
        let mut effective = self.p.clone();
        for (u, row) in data.rows.iter().enumerate() {
            let z = self.implicit_sum(row);
            for k in 0..f {
                effective[u * f + k] += z[k];
            }
        }
        FactorState {
            factors: f,
            user: self.p,
            item: self.q,
            user_bias: self.user_bias,
            item_bias: self.item_bias,
            global_mean: self.global_mean,
            implicit: Some(self.y),
            effective_user: Some(effective),
        }
    }
}

pub(super) fn train(
    data: &TrainingData,
    hyper: &HyperParams,
    seed: u64,
    trace: &mut Vec<f64>,
) -> Result<FactorState> {
    let mut params = SvdppParams::init(data, hyper.factors, seed);
    let mut users: Vec<usize> = (0..data.n_users).filter(|&u| !data.rows[u].is_empty()).collect();
    for epoch in 0..hyper.epochs {
        let mut rng = seed::rng(seed, &[ORDER_STREAM, epoch as u64]);
        users.shuffle(&mut rng);
        for &u in &users {
            let row = &data.rows[u];
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.shuffle(&mut rng);
            params.user_pass(u, row, &order, hyper.learn_rate, hyper.reg);
        }
        let loss = params.loss(data, hyper.reg);
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                learn_rate: hyper.learn_rate,
            });
        }
        trace.push(loss);
    }
    Ok(params.into_state(data))
}

#[cfg(test)]
mod tests {
    use super::super::{train as train_model, Algorithm, ModelState};
    use super::*;
    use rand::Rng;

    fn toy() -> TrainingData {
        TrainingData::from_dense(&[
            vec![Some(5.0), Some(3.0), None, Some(1.0)],
            vec![Some(4.0), None, Some(1.0), Some(2.0)],
            vec![None, Some(1.0), Some(5.0), Some(4.0)],
            vec![Some(2.0), Some(1.0), Some(4.0), None],
        ])
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = toy();
        let mut rng = seed::rng(21, &[]);
        let mut params = SvdppParams::init(&data, 3, 1);
        let flat: Vec<f64> = params.to_vec().iter().map(|_| rng.random_range(-0.5..0.5)).collect();
        params.set_from(&flat);
        let reg = 0.05;
        let g = params.gradient(&data, reg);
        let h = 1e-5;
        for _ in 0..10 {
            let k = rng.random_range(0..flat.len());
            let eval = |delta: f64| {
                let mut v = flat.clone();
                v[k] += delta;
                let mut p = params.clone();
                p.set_from(&v);
                p.loss(&data, reg)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-8);
            assert!(rel < 1e-4, "param {k}: fd {fd} vs analytic {}", g[k]);
        }
    }

    #[test]
    fn training_lowers_loss() {
        let data = toy();
        let h = HyperParams::defaults_for(Algorithm::SVDpp);
        let model = train_model(Algorithm::SVDpp, &data, &h, 2).unwrap();
        let trace = &model.loss_trace;
        assert_eq!(trace.len(), h.epochs);
        assert!(trace.last().unwrap() < &trace[0]);
        let ModelState::Factors(fs) = &model.state else { panic!() };
        assert!(fs.implicit.is_some() && fs.effective_user.is_some());
    }
}
