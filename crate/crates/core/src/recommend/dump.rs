//! Text dumps of trained models and recommendation lists.
//!
//! A model dump is one JSON header line followed by CSV. The CSV shape
//! depends on the model state:
//!
//! ```text
//! popularity / random    item,count
//! neighbors              row,neighbor,similarity
//! factors                kind,index,bias,f0,..,f{k-1}   kind ∈ user | item | implicit | effective_user
//! ```
//!
//! Numbers use shortest round-trip formatting.

use std::io::Write;
use std::path::Path;

use serde_json::json;

use super::{ModelState, RecModel, RecommendationMatrix};
use crate::error::{Error, Result};
use crate::ingest::InteractionDataset;

pub fn write_model_dump(model: &RecModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let (kind, factors, global_mean) = match &model.state {
        ModelState::Popularity => ("popularity", 0, 0.0),
        ModelState::Random => ("random", 0, 0.0),
        ModelState::UserNeighbors(_) => ("user_neighbors", 0, 0.0),
        ModelState::ItemNeighbors(_) => ("item_neighbors", 0, 0.0),
        ModelState::Factors(fs) => ("factors", fs.factors, fs.global_mean),
    };
    let header = json!({
        "format": "bdaudit-model-dump",
        "version": 1,
        "algorithm": model.algorithm,
        "state": kind,
        "hyper": model.hyper,
        "train_seed": model.train_seed,
        "n_users": model.n_users(),
        "n_items": model.n_items(),
        "factors": factors,
        "global_mean": global_mean,
        "loss_trace": model.loss_trace,
    });
    out += &header.to_string();
    out.push('\n');
    match &model.state {
        ModelState::Popularity | ModelState::Random => {
            out += "item,count\n";
            for (i, c) in model.popularity.iter().enumerate() {
                out += &format!("{i},{c}\n");
            }
        }
        ModelState::UserNeighbors(nb) | ModelState::ItemNeighbors(nb) => {
            out += "row,neighbor,similarity\n";
            for (r, list) in nb.iter().enumerate() {
                for (n, s) in list {
                    out += &format!("{r},{n},{s}\n");
                }
            }
        }
        ModelState::Factors(fs) => {
            let f = fs.factors;
            out += "kind,index,bias";
            for k in 0..f {
                out += &format!(",f{k}");
            }
            out.push('\n');
            let mut block = |name: &str, values: &[f64], bias: &[f64]| {
                for (idx, row) in values.chunks_exact(f.max(1)).enumerate() {
                    out += &format!("{name},{idx},{}", bias.get(idx).copied().unwrap_or(0.0));
                    for v in row {
                        out += &format!(",{v}");
                    }
                    out.push('\n');
                }
            };
            block("user", &fs.user, &fs.user_bias);
            block("item", &fs.item, &fs.item_bias);
            if let Some(y) = &fs.implicit {
                block("implicit", y, &[]);
            }
            if let Some(e) = &fs.effective_user {
                block("effective_user", e, &[]);
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `fold,user,rank,item` rows (external ids, rank from 1).
pub fn write_recommendations_csv(
    matrices: &[RecommendationMatrix],
    dataset: &InteractionDataset,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "fold,user,rank,item").map_err(io)?;
    for r in matrices {
        for (u, list) in r.lists.iter().enumerate() {
            for (rank, &i) in list.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    r.fold,
                    dataset.users.external(u),
                    rank + 1,
                    dataset.items.external(i as usize)
                )
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::super::{train, Algorithm, HyperParams, TrainingData};
    use super::*;

    #[test]
    fn factor_dump_layout() {
        let data = TrainingData::from_dense(&[
            vec![Some(5.0), Some(1.0), None],
            vec![None, Some(2.0), Some(4.0)],
        ]);
        let mut h = HyperParams::defaults_for(Algorithm::SVDpp);
        h.factors = 2;
        h.epochs = 3;
        let m = train(Algorithm::SVDpp, &data, &h, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        write_model_dump(&m, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(header["algorithm"], "SVD++");
        assert_eq!(header["factors"], 2);
        assert_eq!(lines.next().unwrap(), "kind,index,bias,f0,f1");
        // 2 users + 3 items + 3 implicit + 2 effective
        assert_eq!(lines.count(), 10);
    }
}
