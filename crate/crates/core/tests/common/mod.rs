#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_config() -> PathBuf {
    fixture_dir().join("ml_tiny.json")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random ratings matrix; every user rates at least `min_per_user` items.
pub fn random_dense(rng: &mut ChaCha8Rng, n_users: usize, n_items: usize, density: f64, min_per_user: usize) -> Vec<Vec<Option<f64>>> {
    (0..n_users)
        .map(|_| loop {
            let row: Vec<Option<f64>> = (0..n_items)
                .map(|_| rng.random_bool(density).then(|| rng.random_range(1..=5) as f64))
                .collect();
            if row.iter().flatten().count() >= min_per_user {
                break row;
            }
        })
        .collect()
}

/// Random fractional category weights over two categories; each item gets at
/// least one category.
pub fn random_pair_weights(rng: &mut ChaCha8Rng, n_items: usize) -> Vec<Vec<(usize, f64)>> {
    (0..n_items)
        .map(|_| match rng.random_range(0..3) {
            0 => vec![(0, 1.0)],
            1 => vec![(1, 1.0)],
            _ => vec![(0, 0.5), (1, 0.5)],
        })
        .collect()
}

/// Preference ratio by a plain loop over every (user, item, category) triple.
pub fn brute_pr(selected: &[Vec<bool>], users: &[usize], weights: &[Vec<(usize, f64)>], category: usize) -> f64 {
    let n_cat = 2;
    let mut num = 0.0;
    let mut den = 0.0;
    for &u in users {
        for (i, &sel) in selected[u].iter().enumerate() {
            for g in 0..n_cat {
                let w = weights[i].iter().find(|(c, _)| *c == g).map_or(0.0, |&(_, w)| w);
                let m = if sel { 1.0 } else { 0.0 };
                den += m * w;
                if g == category {
                    num += m * w;
                }
            }
        }
    }
    num / den
}

/// |C| / m by a loop over items.
pub fn brute_prior(weights: &[Vec<(usize, f64)>], category: usize) -> f64 {
    let size: f64 = weights
        .iter()
        .map(|w| w.iter().filter(|(c, _)| *c == category).map(|(_, w)| w).sum::<f64>())
        .sum();
    size / weights.len() as f64
}

/// Unrated items ordered by rater count, then index.
pub fn brute_most_popular(dense: &[Vec<Option<f64>>], user: usize, n: usize) -> Vec<u32> {
    let n_items = dense[0].len();
    let count = |i: usize| dense.iter().filter(|r| r[i].is_some()).count();
    let mut cand: Vec<usize> = (0..n_items).filter(|&i| dense[user][i].is_none()).collect();
    cand.sort_by(|&a, &b| count(b).cmp(&count(a)).then(a.cmp(&b)));
    cand.into_iter().take(n).map(|i| i as u32).collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na * nb > 0.0 {
        dot / (na * nb)
    } else {
        0.0
    }
}

fn centered_vector(v: &[Option<f64>], pearson: bool) -> Vec<f64> {
    let present: Vec<f64> = v.iter().flatten().copied().collect();
    let mean = if pearson && !present.is_empty() {
        present.iter().sum::<f64>() / present.len() as f64
    } else {
        0.0
    };
    v.iter().map(|x| x.map_or(0.0, |x| x - mean)).collect()
}

fn keep_top(mut s: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    s.retain(|&(_, x)| x > 0.0);
    s.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    s.truncate(k);
    s
}

/// KNN item scores straight from dense data. `user_based` selects UserKNN,
/// otherwise ItemKNN. Users without a neighbor signal fall back to popularity.
pub fn brute_knn_scores(dense: &[Vec<Option<f64>>], user_based: bool, k: usize, pearson: bool, user: usize) -> Vec<f64> {
    let n_users = dense.len();
    let n_items = dense[0].len();
    let mut scores = vec![0.0; n_items];
    if user_based {
        let me = centered_vector(&dense[user], pearson);
        let sims = (0..n_users)
            .filter(|&v| v != user)
            .map(|v| (v, cosine(&me, &centered_vector(&dense[v], pearson))))
            .collect();
        for (v, s) in keep_top(sims, k) {
            for i in 0..n_items {
                if dense[v][i].is_some() {
                    scores[i] += s;
                }
            }
        }
    } else {
        let cols: Vec<Vec<f64>> = (0..n_items)
            .map(|i| centered_vector(&(0..n_users).map(|u| dense[u][i]).collect::<Vec<_>>(), pearson))
            .collect();
        for i in 0..n_items {
            let sims = (0..n_items).filter(|&j| j != i).map(|j| (j, cosine(&cols[i], &cols[j]))).collect();
            scores[i] = keep_top(sims, k)
                .iter()
                .filter(|(j, _)| dense[user][*j].is_some())
                .map(|(_, s)| s)
                .sum();
        }
    }
    if scores.iter().all(|&s| s == 0.0) {
        for (i, s) in scores.iter_mut().enumerate() {
            *s = dense.iter().filter(|r| r[i].is_some()).count() as f64;
        }
    }
    scores
}

/// Unrated items by descending score, ties to the lower index.
pub fn brute_top_n(dense: &[Vec<Option<f64>>], scores: &[f64], user: usize, n: usize) -> Vec<u32> {
    let n_items = dense[0].len();
    let mut cand: Vec<usize> = (0..n_items).filter(|&i| dense[user][i].is_none()).collect();
    cand.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    cand.into_iter().take(n).map(|i| i as u32).collect()
}

/// The fixture files parsed with a plain `split("::")`, independent of the
/// library's loader.
pub struct RawFixture {
    pub gender: BTreeMap<String, String>,
    pub genres: BTreeMap<String, Vec<String>>,
    pub ratings: Vec<(String, String)>,
}

pub fn raw_fixture() -> RawFixture {
    let dir = fixture_dir().join("ml_tiny");
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap();
    let gender = read("users.dat")
        .lines()
        .map(|l| {
            let p: Vec<&str> = l.split("::").collect();
            (p[0].to_string(), p[1].to_string())
        })
        .collect();
    let genres = read("movies.dat")
        .lines()
        .map(|l| {
            let p: Vec<&str> = l.split("::").collect();
            (p[0].to_string(), p[2].split('|').map(String::from).collect())
        })
        .collect();
    let ratings = read("ratings.dat")
        .lines()
        .map(|l| {
            let p: Vec<&str> = l.split("::").collect();
            (p[0].to_string(), p[1].to_string())
        })
        .collect();
    RawFixture { gender, genres, ratings }
}

impl RawFixture {
    /// Input PR per (group, category) of the pair cohort, with `min_ratings`
    /// counted on pair items. Group "ALL" is every user.
    pub fn input_pr(&self, pair: (&str, &str), min_ratings: usize) -> BTreeMap<(String, String), f64> {
        let pair_weight = |item: &str, cat: &str| -> f64 {
            let g = &self.genres[item];
            let hits = [pair.0, pair.1].iter().filter(|c| g.iter().any(|x| x == *c)).count();
            if hits == 0 || !g.iter().any(|x| x == cat) {
                0.0
            } else {
                1.0 / hits as f64
            }
        };
        let in_pair = |item: &str| pair_weight(item, pair.0) + pair_weight(item, pair.1) > 0.0;
        let mut per_user: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (u, i) in &self.ratings {
            if in_pair(i) {
                per_user.entry(u).or_default().push(i);
            }
        }
        per_user.retain(|_, items| items.len() >= min_ratings);
        let groups: BTreeSet<String> = per_user.keys().map(|u| self.gender[*u].clone()).collect();
        let mut out = BTreeMap::new();
        for group in groups.iter().cloned().chain(["ALL".to_string()]) {
            let mut sums = [0.0, 0.0];
            for (u, items) in &per_user {
                if group != "ALL" && self.gender[*u] != group {
                    continue;
                }
                for i in items {
                    sums[0] += pair_weight(i, pair.0);
                    sums[1] += pair_weight(i, pair.1);
                }
            }
            let total = sums[0] + sums[1];
            out.insert((group.clone(), pair.0.to_string()), sums[0] / total);
            out.insert((group.clone(), pair.1.to_string()), sums[1] / total);
        }
        out
    }
}

/// Central-difference check of `grad` against `f` at `x`; returns the
/// largest relative error over coordinates.
pub fn max_fd_rel_error(x: &[f64], grad: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut y = x.to_vec();
    for k in 0..x.len() {
        y[k] = x[k] + h;
        let up = f(&y);
        y[k] = x[k] - h;
        let down = f(&y);
        y[k] = x[k];
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Trains a KNN model on `dense` and compares every user's top-`n` list with
/// the brute-force oracle. Lists may differ only where oracle scores tie to
/// within 1e-9.
pub fn knn_agrees_with_oracle(dense: &[Vec<Option<f64>>], user_based: bool, k: usize, pearson: bool, n: usize) -> Result<(), String> {
    use bdaudit_core::recommend::{train, Algorithm, HyperParams, Similarity, TrainingData};
    let data = TrainingData::from_dense(dense);
    let alg = if user_based { Algorithm::UserKNN } else { Algorithm::ItemKNN };
    let mut h = HyperParams::defaults_for(alg);
    h.k_neighbors = k;
    h.similarity = if pearson { Similarity::Pearson } else { Similarity::Cosine };
    let model = train(alg, &data, &h, 0).map_err(|e| e.to_string())?;
    for u in 0..dense.len() {
        let got = model.recommend_top_n(u, &model.user_items[u], n);
        let scores = brute_knn_scores(dense, user_based, k, pearson, u);
        let want = brute_top_n(dense, &scores, u, n);
        if got.len() != want.len() {
            return Err(format!("{alg} user {u}: got {got:?} want {want:?}"));
        }
        for (g, w) in got.iter().zip(&want) {
            if (scores[*g as usize] - scores[*w as usize]).abs() > 1e-9 {
                return Err(format!("{alg} user {u}: got {got:?} want {want:?}"));
            }
        }
    }
    Ok(())
}

/// MostPopular lists against the counting oracle.
pub fn most_popular_agrees_with_oracle(dense: &[Vec<Option<f64>>], n: usize) -> Result<(), String> {
    use bdaudit_core::recommend::{recommend_fold, train, Algorithm, HyperParams, TrainingData};
    let data = TrainingData::from_dense(dense);
    let model = train(Algorithm::MostPopular, &data, &HyperParams::defaults_for(Algorithm::MostPopular), 0)
        .map_err(|e| e.to_string())?;
    let r = recommend_fold(&model, 0, n);
    for (u, list) in r.lists.iter().enumerate() {
        let want = brute_most_popular(dense, u, n);
        if list != &want {
            return Err(format!("user {u}: got {list:?} want {want:?}"));
        }
    }
    Ok(())
}
