//! Neighborhood models.
//!
//! Similarities are cosine over rating vectors, with missing entries as zero.
//! Pearson mode first centers each vector on its own mean (over rated
//! entries), i.e. cosine on mean-centered ratings. Neighbor lists keep the
//! `k_neighbors` most similar entities with positive similarity, ties to the
//! lower index.

use super::{HyperParams, Similarity, TrainingData};

fn centered(values: &mut [(u32, f64)], similarity: Similarity) {
    if similarity == Similarity::Pearson && !values.is_empty() {
        let mean = values.iter().map(|&(_, v)| v).sum::<f64>() / values.len() as f64;
        for (_, v) in values.iter_mut() {
            *v -= mean;
        }
    }
}

/// Dense symmetric similarity matrix between the given sparse vectors, which
/// live in a space of dimension `dim`.
fn similarity_matrix(vectors: &[Vec<(u32, f64)>], dim: usize) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let norms: Vec<f64> = vectors
        .iter()
        .map(|v| v.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt())
        .collect();
    let mut inverted: Vec<Vec<(u32, f64)>> = vec![Vec::new(); dim];
    for (a, v) in vectors.iter().enumerate() {
        for &(d, x) in v {
            inverted[d as usize].push((a as u32, x));
        }
    }
    let mut sims = vec![vec![0.0; n]; n];
    for (a, v) in vectors.iter().enumerate() {
        let row = &mut sims[a];
        for &(d, x) in v {
            for &(b, y) in &inverted[d as usize] {
                row[b as usize] += x * y;
            }
        }
        for (b, s) in row.iter_mut().enumerate() {
            let denom = norms[a] * norms[b];
            *s = if denom > 0.0 { *s / denom } else { 0.0 };
        }
        row[a] = 0.0;
    }
    sims
}

pub fn user_similarities(data: &TrainingData, similarity: Similarity) -> Vec<Vec<f64>> {
    let vectors: Vec<Vec<(u32, f64)>> = data
        .rows
        .iter()
        .map(|r| {
            let mut v = r.clone();
            centered(&mut v, similarity);
            v
        })
        .collect();
    similarity_matrix(&vectors, data.n_items)
}

pub fn item_similarities(data: &TrainingData, similarity: Similarity) -> Vec<Vec<f64>> {
    let mut columns: Vec<Vec<(u32, f64)>> = vec![Vec::new(); data.n_items];
    for (u, r) in data.rows.iter().enumerate() {
        for &(i, x) in r {
            columns[i as usize].push((u as u32, x));
        }
    }
    for c in &mut columns {
        centered(c, similarity);
    }
    similarity_matrix(&columns, data.n_users)
}

fn top_k(sims: Vec<Vec<f64>>, k: usize) -> Vec<Vec<(u32, f64)>> {
    sims.into_iter()
        .map(|row| {
            let mut cand: Vec<(u32, f64)> = row
                .into_iter()
                .enumerate()
                .filter(|&(_, s)| s > 0.0)
                .map(|(b, s)| (b as u32, s))
                .collect();
            cand.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            cand.truncate(k);
            cand
        })
        .collect()
}

pub(super) fn user_neighbors(data: &TrainingData, hyper: &HyperParams) -> Vec<Vec<(u32, f64)>> {
    top_k(user_similarities(data, hyper.similarity), hyper.k_neighbors)
}

pub(super) fn item_neighbors(data: &TrainingData, hyper: &HyperParams) -> Vec<Vec<(u32, f64)>> {
    top_k(item_similarities(data, hyper.similarity), hyper.k_neighbors)
}
