//! Biased matrix factorization trained by stochastic gradient descent.
//!
//! Objective over observed ratings:
//!
//! ```text
//! L = Σ_(u,i) ½ (r_ui − μ − b_u − b_i − p_u·q_i)² + ½ reg (b_u² + b_i² + ‖p_u‖² + ‖q_i‖²)
//! ```
//!
//! Each SGD step moves the parameters of one `(u, i)` term against its
//! gradient, so the regularization is frequency-weighted.

use rand::seq::SliceRandom;

use super::linalg::{dot, uniform_init};
use super::{FactorState, HyperParams, TrainingData};
use crate::error::{Error, Result};
use crate::seed;

const INIT_STREAM: u64 = 0xB1A5_0001;
const ORDER_STREAM: u64 = 0xB1A5_0002;

#[derive(Debug, Clone, PartialEq)]
pub struct BiasedMfParams {
    pub factors: usize,
    pub global_mean: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl BiasedMfParams {
    pub fn zeros(n_users: usize, n_items: usize, factors: usize, global_mean: f64) -> Self {
        BiasedMfParams {
            factors,
            global_mean,
            user_bias: vec![0.0; n_users],
            item_bias: vec![0.0; n_items],
            p: vec![0.0; n_users * factors],
            q: vec![0.0; n_items * factors],
        }
    }

    pub fn init(data: &TrainingData, factors: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed, &[INIT_STREAM]);
        BiasedMfParams {
            p: uniform_init(&mut rng, data.n_users * factors),
            q: uniform_init(&mut rng, data.n_items * factors),
            ..Self::zeros(data.n_users, data.n_items, factors, data.mean_rating())
        }
    }

    fn pu(&self, u: usize) -> &[f64] {
        &self.p[u * self.factors..(u + 1) * self.factors]
    }

    fn qi(&self, i: usize) -> &[f64] {
        &self.q[i * self.factors..(i + 1) * self.factors]
    }

    pub fn predict(&self, u: usize, i: usize) -> f64 {
        self.global_mean + self.user_bias[u] + self.item_bias[i] + dot(self.pu(u), self.qi(i))
    }

    pub fn loss(&self, data: &TrainingData, reg: f64) -> f64 {
        let mut total = 0.0;
        for (u, row) in data.rows.iter().enumerate() {
            for &(i, r) in row {
                let i = i as usize;
                let e = r - self.predict(u, i);
                let norm = self.user_bias[u].powi(2)
                    + self.item_bias[i].powi(2)
                    + dot(self.pu(u), self.pu(u))
                    + dot(self.qi(i), self.qi(i));
                total += 0.5 * e * e + 0.5 * reg * norm;
            }
        }
        total
    }

    /// Flat layout `[user_bias, item_bias, p, q]`.
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.user_bias[..], &self.item_bias, &self.p, &self.q].concat()
    }

    pub fn set_from(&mut self, flat: &[f64]) {
        let (nu, ni) = (self.user_bias.len(), self.item_bias.len());
        let (np, nq) = (self.p.len(), self.q.len());
        assert_eq!(flat.len(), nu + ni + np + nq);
        self.user_bias.copy_from_slice(&flat[..nu]);
        self.item_bias.copy_from_slice(&flat[nu..nu + ni]);
        self.p.copy_from_slice(&flat[nu + ni..nu + ni + np]);
        self.q.copy_from_slice(&flat[nu + ni + np..]);
    }

    /// Analytic gradient of [`loss`](Self::loss) in the flat layout.
    pub fn gradient(&self, data: &TrainingData, reg: f64) -> Vec<f64> {
        let f = self.factors;
        let mut g = Self::zeros(self.user_bias.len(), self.item_bias.len(), f, 0.0);
        for (u, row) in data.rows.iter().enumerate() {
            for &(i, r) in row {
                let i = i as usize;
                let e = r - self.predict(u, i);
                g.user_bias[u] += -e + reg * self.user_bias[u];
                g.item_bias[i] += -e + reg * self.item_bias[i];
                for k in 0..f {
                    g.p[u * f + k] += -e * self.q[i * f + k] + reg * self.p[u * f + k];
                    g.q[i * f + k] += -e * self.p[u * f + k] + reg * self.q[i * f + k];
                }
            }
        }
        g.to_vec()
    }

    fn sgd_step(&mut self, u: usize, i: usize, r: f64, lr: f64, reg: f64) {
        let f = self.factors;
        let e = r - self.predict(u, i);
        self.user_bias[u] += lr * (e - reg * self.user_bias[u]);
        self.item_bias[i] += lr * (e - reg * self.item_bias[i]);
        for k in 0..f {
            let pk = self.p[u * f + k];
            let qk = self.q[i * f + k];
            self.p[u * f + k] += lr * (e * qk - reg * pk);
            self.q[i * f + k] += lr * (e * pk - reg * qk);
        }
    }

    pub fn into_state(self) -> FactorState {
        FactorState {
            factors: self.factors,
            user: self.p,
            item: self.q,
            user_bias: self.user_bias,
            item_bias: self.item_bias,
            global_mean: self.global_mean,
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
    let mut params = BiasedMfParams::init(data, hyper.factors, seed);
    let mut samples: Vec<(u32, u32, f64)> = data
        .rows
        .iter()
        .enumerate()
        .flat_map(|(u, r)| r.iter().map(move |&(i, x)| (u as u32, i, x)))
        .collect();
    for epoch in 0..hyper.epochs {
        samples.shuffle(&mut seed::rng(seed, &[ORDER_STREAM, epoch as u64]));
        for &(u, i, r) in &samples {
            params.sgd_step(u as usize, i as usize, r, hyper.learn_rate, hyper.reg);
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
    Ok(params.into_state())
}

#[cfg(test)]
mod tests {
    use super::super::{train as train_model, Algorithm, ModelState};
    use super::*;
    use rand::Rng;

    fn dense_toy() -> TrainingData {
        let vals = [
            [5.0, 3.0, 1.0, 1.0],
            [4.0, 2.0, 1.0, 2.0],
            [1.0, 1.0, 5.0, 4.0],
            [2.0, 1.0, 4.0, 5.0],
        ];
        TrainingData::from_dense(
            &vals
                .iter()
                .map(|r| r.iter().map(|&v| Some(v)).collect())
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn zero_loss_at_mean() {
        let data = TrainingData::from_dense(&[vec![Some(4.0)]]);
        let p = BiasedMfParams::zeros(1, 1, 2, data.mean_rating());
        assert_eq!(p.loss(&data, 0.02), 0.0);
    }

    #[test]
    fn fits_dense_toy() {
        let data = dense_toy();
        let mut h = HyperParams::defaults_for(Algorithm::BiasedMF);
        h.factors = 4;
        h.epochs = 200;
        h.learn_rate = 0.05;
        let model = train_model(Algorithm::BiasedMF, &data, &h, 3).unwrap();
        let ModelState::Factors(fs) = &model.state else { panic!() };
        let mut se = 0.0;
        for (u, row) in data.rows.iter().enumerate() {
            for &(i, r) in row {
                se += (r - fs.score(u, i as usize)).powi(2);
            }
        }
        let rmse = (se / data.nnz() as f64).sqrt();
        assert!(rmse < 0.1, "training RMSE {rmse}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = dense_toy();
        let mut rng = seed::rng(11, &[]);
        let mut params = BiasedMfParams::init(&data, 3, 4);
        // move away from the near-zero init so every term matters
        let flat: Vec<f64> = params.to_vec().iter().map(|_| rng.random_range(-0.5..0.5)).collect();
        params.set_from(&flat);
        let reg = 0.05;
        let g = params.gradient(&data, reg);
        let h = 1e-5;
        for _ in 0..10 {
            let k = rng.random_range(0..flat.len());
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            let mut pp = params.clone();
            pp.set_from(&plus);
            let mut pm = params.clone();
            pm.set_from(&minus);
            let fd = (pp.loss(&data, reg) - pm.loss(&data, reg)) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-8);
            assert!(rel < 1e-4, "param {k}: fd {fd} vs analytic {}", g[k]);
        }
    }

    #[test]
    fn diverges_with_huge_learn_rate() {
        let data = dense_toy();
        let mut h = HyperParams::defaults_for(Algorithm::BiasedMF);
        h.learn_rate = 50.0;
        assert!(matches!(
            train_model(Algorithm::BiasedMF, &data, &h, 0),
            Err(Error::Diverged { .. })
        ));
    }
}
