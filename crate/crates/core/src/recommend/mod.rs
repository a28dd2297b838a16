//! Recommendation algorithms and top-N list generation.
//!
//! Rating-oriented models (BiasedMF, SVD++) and the neighborhood models use
//! rating values; WRMF, BPR and RankALS see only the selection pattern.

mod bpr;
mod dump;
mod knn;
mod linalg;
mod mf;
mod rank_als;
mod svdpp;
mod wrmf;

use std::fmt;
use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::InteractionDataset;
use crate::matrix::BinaryMatrix;
use crate::seed;
use crate::split::{Fold, FoldSplit};

pub use bpr::BprParams;
pub use knn::{item_similarities, user_similarities};
pub use mf::BiasedMfParams;
pub use rank_als::RankAlsState;
pub use svdpp::SvdppParams;
pub use wrmf::WrmfState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    MostPopular,
    Random,
    UserKNN,
    ItemKNN,
    BiasedMF,
    #[serde(rename = "SVD++", alias = "SVDpp")]
    SVDpp,
    WRMF,
    BPR,
    RankALS,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::MostPopular,
        Algorithm::Random,
        Algorithm::UserKNN,
        Algorithm::ItemKNN,
        Algorithm::BiasedMF,
        Algorithm::SVDpp,
        Algorithm::WRMF,
        Algorithm::BPR,
        Algorithm::RankALS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MostPopular => "MostPopular",
            Algorithm::Random => "Random",
            Algorithm::UserKNN => "UserKNN",
            Algorithm::ItemKNN => "ItemKNN",
            Algorithm::BiasedMF => "BiasedMF",
            Algorithm::SVDpp => "SVD++",
            Algorithm::WRMF => "WRMF",
            Algorithm::BPR => "BPR",
            Algorithm::RankALS => "RankALS",
        }
    }

    /// Trains on rating values rather than the binary selection pattern.
    pub fn uses_ratings(self) -> bool {
        matches!(
            self,
            Algorithm::UserKNN | Algorithm::ItemKNN | Algorithm::BiasedMF | Algorithm::SVDpp
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', '_', ' '], "");
        Algorithm::ALL
            .into_iter()
            .find(|a| {
                let n = a.name().to_ascii_lowercase();
                n == norm || (n == "svd++" && norm == "svdpp")
            })
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Cosine,
    Pearson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub factors: usize,
    pub learn_rate: f64,
    pub reg: f64,
    pub epochs: usize,
    pub k_neighbors: usize,
    pub similarity: Similarity,
    pub alpha_confidence: f64,
    /// BPR draws `sample_factor * |train|` triples per epoch.
    pub sample_factor: usize,
    pub top_n: usize,
}

/// Partial hyperparameters as they appear in a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperOverrides {
    pub factors: Option<usize>,
    pub learn_rate: Option<f64>,
    pub reg: Option<f64>,
    pub epochs: Option<usize>,
    pub k_neighbors: Option<usize>,
    pub similarity: Option<Similarity>,
    pub alpha_confidence: Option<f64>,
    pub sample_factor: Option<usize>,
    pub top_n: Option<usize>,
}

impl HyperParams {
    pub fn defaults_for(algorithm: Algorithm) -> Self {
        let base = HyperParams {
            factors: 10,
            learn_rate: 0.01,
            reg: 0.02,
            epochs: 50,
            k_neighbors: 50,
            similarity: Similarity::Cosine,
            alpha_confidence: 40.0,
            sample_factor: 1,
            top_n: 10,
        };
        match algorithm {
            Algorithm::UserKNN => HyperParams {
                similarity: Similarity::Pearson,
                ..base
            },
            Algorithm::SVDpp => HyperParams { epochs: 30, ..base },
            Algorithm::WRMF => HyperParams {
                reg: 0.01,
                epochs: 15,
                ..base
            },
            Algorithm::BPR => HyperParams {
                learn_rate: 0.05,
                reg: 0.01,
                epochs: 100,
                ..base
            },
            Algorithm::RankALS => HyperParams {
                reg: 0.01,
                epochs: 15,
                ..base
            },
            _ => base,
        }
    }

    pub fn with_overrides(mut self, o: &HyperOverrides) -> Self {
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        apply!(factors, learn_rate, reg, epochs, k_neighbors, similarity, alpha_confidence, sample_factor, top_n);
        self
    }

    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::UnsupportedHyper {
                algorithm: algorithm.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.top_n == 0 {
            return bad("top_n must be at least 1");
        }
        match algorithm {
            Algorithm::MostPopular | Algorithm::Random => {}
            Algorithm::UserKNN | Algorithm::ItemKNN => {
                if self.k_neighbors == 0 {
                    return bad("k_neighbors must be positive");
                }
            }
            _ => {
                if self.factors == 0 || self.epochs == 0 {
                    return bad("factors and epochs must be positive");
                }
                if !(self.reg.is_finite() && self.reg > 0.0) {
                    return bad("reg must be positive and finite");
                }
                let sgd = matches!(algorithm, Algorithm::BiasedMF | Algorithm::SVDpp | Algorithm::BPR);
                if sgd && !(self.learn_rate.is_finite() && self.learn_rate > 0.0) {
                    return bad("learn_rate must be positive and finite");
                }
                if algorithm == Algorithm::WRMF && !(self.alpha_confidence > 0.0) {
                    return bad("alpha_confidence must be positive");
                }
                if algorithm == Algorithm::BPR && self.sample_factor == 0 {
                    return bad("sample_factor must be positive");
                }
            }
        }
        Ok(())
    }
}

/// Per-user training rows: `(item, rating)` ascending by item.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub n_users: usize,
    pub n_items: usize,
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl TrainingData {
    pub fn from_fold(dataset: &InteractionDataset, fold: &Fold) -> Self {
        let rows = fold
            .train
            .iter()
            .map(|ids| {
                ids.iter()
                    .map(|&id| {
                        let x = &dataset.interactions[id];
                        (x.item, x.rating)
                    })
                    .collect()
            })
            .collect();
        TrainingData {
            n_users: dataset.n_users(),
            n_items: dataset.n_items(),
            rows,
        }
    }

    pub fn from_dataset(dataset: &InteractionDataset) -> Self {
        let mut rows = vec![Vec::new(); dataset.n_users()];
        for x in &dataset.interactions {
            rows[x.user as usize].push((x.item, x.rating));
        }
        TrainingData {
            n_users: dataset.n_users(),
            n_items: dataset.n_items(),
            rows,
        }
    }

    /// Dense rows given as `rows[u][i]`; `None` marks a missing rating.
    pub fn from_dense(rows: &[Vec<Option<f64>>]) -> Self {
        let n_items = rows.first().map_or(0, Vec::len);
        TrainingData {
            n_users: rows.len(),
            n_items,
            rows: rows
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter_map(|(i, v)| v.map(|v| (i as u32, v)))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_matrix(m: &BinaryMatrix) -> Self {
        TrainingData {
            n_users: m.n_users(),
            n_items: m.n_items(),
            rows: (0..m.n_users())
                .map(|u| m.row(u).iter().map(|&i| (i, 1.0)).collect())
                .collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn items_of(&self, user: usize) -> Vec<u32> {
        self.rows[user].iter().map(|&(i, _)| i).collect()
    }

    pub fn selections(&self) -> BinaryMatrix {
        BinaryMatrix::from_pairs(
            self.n_users,
            self.n_items,
            self.rows
                .iter()
                .enumerate()
                .flat_map(|(u, r)| r.iter().map(move |&(i, _)| (u, i as usize))),
        )
    }

    /// Same pattern with every value set to one.
    pub fn implicit(&self) -> TrainingData {
        TrainingData {
            n_users: self.n_users,
            n_items: self.n_items,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(i, _)| (i, 1.0)).collect())
                .collect(),
        }
    }

    pub fn mean_rating(&self) -> f64 {
        let n = self.nnz();
        if n == 0 {
            return 0.0;
        }
        self.rows.iter().flatten().map(|&(_, r)| r).sum::<f64>() / n as f64
    }
}

/// Latent factor state shared by the matrix-factorization models.
///
/// `score(u, i) = global_mean + user_bias[u] + item_bias[i] + user_vec(u) · item(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    pub factors: usize,
    pub user: Vec<f64>,
    pub item: Vec<f64>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub global_mean: f64,
    /// SVD++ implicit item factors `y`.
    pub implicit: Option<Vec<f64>>,
    /// SVD++ effective user vectors `p_u + |N(u)|^-1/2 Σ y_j`.
    pub effective_user: Option<Vec<f64>>,
}

impl FactorState {
    fn user_vec(&self, u: usize) -> &[f64] {
        let f = self.factors;
        match &self.effective_user {
            Some(e) => &e[u * f..(u + 1) * f],
            None => &self.user[u * f..(u + 1) * f],
        }
    }

    fn score(&self, u: usize, i: usize) -> f64 {
        let f = self.factors;
        let ub = self.user_bias.get(u).copied().unwrap_or(0.0);
        let ib = self.item_bias.get(i).copied().unwrap_or(0.0);
        self.global_mean + ub + ib + linalg::dot(self.user_vec(u), &self.item[i * f..(i + 1) * f])
    }

    fn all_finite(&self) -> bool {
        self.user
            .iter()
            .chain(&self.item)
            .chain(&self.user_bias)
            .chain(&self.item_bias)
            .chain(self.implicit.iter().flatten())
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelState {
    Popularity,
    Random,
    UserNeighbors(Vec<Vec<(u32, f64)>>),
    ItemNeighbors(Vec<Vec<(u32, f64)>>),
    Factors(FactorState),
}

/// A trained model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RecModel {
    pub algorithm: Algorithm,
    pub hyper: HyperParams,
    pub train_seed: u64,
    pub state: ModelState,
    /// Rater count per item; also the cold-start ranking.
    pub popularity: Vec<u32>,
    /// Training items per user, ascending.
    pub user_items: Vec<Vec<u32>>,
    /// Objective value after each epoch or sweep.
    pub loss_trace: Vec<f64>,
}

pub fn train(
    algorithm: Algorithm,
    data: &TrainingData,
    hyper: &HyperParams,
    seed: u64,
) -> Result<RecModel> {
    hyper.validate(algorithm)?;
    if data.nnz() == 0 {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    let popularity = data.selections().item_counts();
    let user_items = (0..data.n_users).map(|u| data.items_of(u)).collect();
    let mut loss_trace = Vec::new();
    let state = match algorithm {
        Algorithm::MostPopular => ModelState::Popularity,
        Algorithm::Random => ModelState::Random,
        Algorithm::UserKNN => ModelState::UserNeighbors(knn::user_neighbors(data, hyper)),
        Algorithm::ItemKNN => ModelState::ItemNeighbors(knn::item_neighbors(data, hyper)),
        Algorithm::BiasedMF => ModelState::Factors(mf::train(data, hyper, seed, &mut loss_trace)?),
        Algorithm::SVDpp => ModelState::Factors(svdpp::train(data, hyper, seed, &mut loss_trace)?),
        Algorithm::WRMF => {
            ModelState::Factors(wrmf::train(&data.implicit(), hyper, seed, &mut loss_trace)?)
        }
        Algorithm::BPR => {
            ModelState::Factors(bpr::train(&data.implicit(), hyper, seed, &mut loss_trace)?)
        }
        Algorithm::RankALS => {
            ModelState::Factors(rank_als::train(&data.implicit(), hyper, seed, &mut loss_trace)?)
        }
    };
    if let ModelState::Factors(fs) = &state {
        if !fs.all_finite() {
            return Err(Error::Diverged {
                epoch: loss_trace.len(),
                learn_rate: hyper.learn_rate,
            });
        }
    }
    Ok(RecModel {
        algorithm,
        hyper: hyper.clone(),
        train_seed: seed,
        state,
        popularity,
        user_items,
        loss_trace,
    })
}

const RANDOM_STREAM: u64 = 0x52_414E_444F_4D;

impl RecModel {
    pub fn n_items(&self) -> usize {
        self.popularity.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_items.len()
    }

    /// Native score of every item for `user`; `None` when the model has no
    /// signal for the user.
    pub fn scores(&self, user: usize) -> Option<Vec<f64>> {
        let m = self.n_items();
        if user >= self.n_users() || self.user_items[user].is_empty() {
            return None;
        }
        let scores = match &self.state {
            ModelState::Popularity => self.popularity.iter().map(|&c| c as f64).collect(),
            ModelState::Random => return None,
            ModelState::UserNeighbors(nb) => {
                let mut s = vec![0.0; m];
                for &(v, sim) in &nb[user] {
                    for &i in &self.user_items[v as usize] {
                        s[i as usize] += sim;
                    }
                }
                s
            }
            ModelState::ItemNeighbors(nb) => {
                let mut rated = vec![false; m];
                for &i in &self.user_items[user] {
                    rated[i as usize] = true;
                }
                nb.iter()
                    .map(|list| {
                        list.iter()
                            .filter(|&&(j, _)| rated[j as usize])
                            .map(|&(_, sim)| sim)
                            .sum()
                    })
                    .collect()
            }
            ModelState::Factors(fs) => (0..m).map(|i| fs.score(user, i)).collect(),
        };
        let has_signal = match &self.state {
            ModelState::UserNeighbors(_) | ModelState::ItemNeighbors(_) => {
                scores.iter().any(|&x| x != 0.0)
            }
            _ => true,
        };
        has_signal.then_some(scores)
    }

    pub fn recommend_top_n(&self, user: usize, exclude: &[u32], top_n: usize) -> Vec<u32> {
        let m = self.n_items();
        let mut excluded = vec![false; m];
        for &i in exclude {
            excluded[i as usize] = true;
        }
        if self.algorithm == Algorithm::Random {
            let mut order: Vec<u32> = (0..m as u32).collect();
            use rand::seq::SliceRandom;
            order.shuffle(&mut seed::rng(self.train_seed, &[RANDOM_STREAM, user as u64]));
            return order
                .into_iter()
                .filter(|&i| !excluded[i as usize])
                .take(top_n)
                .collect();
        }
        let scores = match self.scores(user) {
            Some(s) => s,
            None => {
                debug!("{}: no signal for user {user}, ranking by popularity", self.algorithm);
                self.popularity.iter().map(|&c| c as f64).collect()
            }
        };
        top_n_by_score(&scores, &excluded, top_n)
    }
}

/// Highest-scoring non-excluded items; ties go to the lower item index.
pub fn top_n_by_score(scores: &[f64], excluded: &[bool], top_n: usize) -> Vec<u32> {
    let mut cand: Vec<u32> = (0..scores.len() as u32)
        .filter(|&i| !excluded[i as usize])
        .collect();
    let cmp = |a: &u32, b: &u32| {
        scores[*b as usize]
            .total_cmp(&scores[*a as usize])
            .then(a.cmp(b))
    };
    if cand.len() > top_n {
        cand.select_nth_unstable_by(top_n, cmp);
        cand.truncate(top_n);
    }
    cand.sort_unstable_by(cmp);
    cand
}

/// Top-N lists of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecommendationMatrix {
    pub fold: usize,
    pub n_items: usize,
    /// Per user, ranked item indices.
    pub lists: Vec<Vec<u32>>,
}

impl RecommendationMatrix {
    pub fn to_matrix(&self) -> BinaryMatrix {
        BinaryMatrix::from_pairs(
            self.lists.len(),
            self.n_items,
            self.lists
                .iter()
                .enumerate()
                .flat_map(|(u, l)| l.iter().map(move |&i| (u, i as usize))),
        )
    }

    pub fn nnz(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }
}

/// Recommendations for every user from the model trained on that fold.
///
/// Lists hold `top_n` items whenever the user has that many untrained items.
pub fn recommend_fold(model: &RecModel, fold: usize, top_n: usize) -> RecommendationMatrix {
    RecommendationMatrix {
        fold,
        n_items: model.n_items(),
        lists: (0..model.n_users())
            .map(|u| model.recommend_top_n(u, &model.user_items[u], top_n))
            .collect(),
    }
}

/// One recommendation matrix per fold; `models[f]` must be trained on fold `f`.
pub fn build_r(models: &[RecModel], split: &FoldSplit, top_n: usize) -> Result<Vec<RecommendationMatrix>> {
    if models.len() != split.k() {
        return Err(Error::InvalidArgument(format!(
            "{} models for {} folds",
            models.len(),
            split.k()
        )));
    }
    Ok(models
        .iter()
        .enumerate()
        .map(|(f, m)| recommend_fold(m, f, top_n))
        .collect())
}

pub use dump::{write_model_dump, write_recommendations_csv};
