//! Columnar CSV cache for [`InteractionDataset`].
//!
//! A cache is a directory holding:
//!
//! ```text
//! manifest.json         format tag, version, source, rating scale, counts,
//!                       category labels (in index order)
//! users.csv             index,external_id,group
//! items.csv             index,external_id
//! item_categories.csv   item,category,weight
//! interactions.csv      user,item,rating,timestamp
//! ```
//!
//! Reals are written in shortest round-trip form, so a reload is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CategoryWeighting, GroupPartition, IdIndex, Interaction, InteractionDataset};
use crate::error::{Error, Result};

const FORMAT: &str = "bdaudit-dataset-cache";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    source: String,
    rating_scale: (f64, f64),
    n_users: usize,
    n_items: usize,
    n_interactions: usize,
    categories: Vec<String>,
}

fn render(dataset: &InteractionDataset) -> Vec<(&'static str, String)> {
    let mut users = String::from("index,external_id,group\n");
    for (u, id) in dataset.users.ids().iter().enumerate() {
        users += &format!("{u},{},{}\n", quote(id), quote(dataset.user_groups.group_of(u)));
    }
    let mut items = String::from("index,external_id\n");
    for (i, id) in dataset.items.ids().iter().enumerate() {
        items += &format!("{i},{}\n", quote(id));
    }
    let mut cats = String::from("item,category,weight\n");
    for i in 0..dataset.n_items() {
        for &(c, w) in dataset.item_categories.item(i) {
            cats += &format!("{i},{c},{w}\n");
        }
    }
    let mut inter = String::with_capacity(dataset.n_interactions() * 24);
    inter += "user,item,rating,timestamp\n";
    for x in &dataset.interactions {
        inter += &format!("{},{},{},{}\n", x.user, x.item, x.rating, x.timestamp);
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        source: dataset.source.clone(),
        rating_scale: dataset.rating_scale,
        n_users: dataset.n_users(),
        n_items: dataset.n_items(),
        n_interactions: dataset.n_interactions(),
        categories: dataset.item_categories.labels().to_vec(),
    };
    let manifest = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    vec![
        ("manifest.json", manifest),
        ("users.csv", users),
        ("items.csv", items),
        ("item_categories.csv", cats),
        ("interactions.csv", inter),
    ]
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// SHA-256 over the canonical cache rendering; independent of the source
/// file layout.
pub fn dataset_hash(dataset: &InteractionDataset) -> String {
    let mut h = Sha256::new();
    for (name, body) in render(dataset) {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update(body.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_cache(dataset: &InteractionDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in render(dataset) {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

fn records(dir: &Path, name: &str) -> Result<Vec<csv::StringRecord>> {
    let p = dir.join(name);
    let mut rdr = csv::Reader::from_path(&p).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&p, io),
        other => Error::Serde(format!("{other:?}")),
    })?;
    rdr.records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(Error::from)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, file: &str, line: usize) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Malformed {
            file: file.to_string(),
            line,
            reason: format!("bad column {k}"),
        })
}

pub fn read_cache(dir: impl AsRef<Path>) -> Result<InteractionDataset> {
    let dir = dir.as_ref();
    let mp = dir.join("manifest.json");
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(Error::Config(format!(
            "{} is not a version-{VERSION} dataset cache",
            dir.display()
        )));
    }

    let mut user_ids = Vec::new();
    let mut groups = Vec::new();
    for (n, r) in records(dir, "users.csv")?.iter().enumerate() {
        user_ids.push(field::<String>(r, 1, "users.csv", n + 2)?);
        groups.push(field::<String>(r, 2, "users.csv", n + 2)?);
    }
    let mut item_ids = Vec::new();
    for (n, r) in records(dir, "items.csv")?.iter().enumerate() {
        item_ids.push(field::<String>(r, 1, "items.csv", n + 2)?);
    }
    let mut weights = vec![Vec::new(); item_ids.len()];
    for (n, r) in records(dir, "item_categories.csv")?.iter().enumerate() {
        let i: usize = field(r, 0, "item_categories.csv", n + 2)?;
        let c: u32 = field(r, 1, "item_categories.csv", n + 2)?;
        let w: f64 = field(r, 2, "item_categories.csv", n + 2)?;
        weights
            .get_mut(i)
            .ok_or_else(|| Error::Malformed {
                file: "item_categories.csv".into(),
                line: n + 2,
                reason: format!("item {i} out of range"),
            })?
            .push((c, w));
    }
    let mut interactions = Vec::with_capacity(manifest.n_interactions);
    for (n, r) in records(dir, "interactions.csv")?.iter().enumerate() {
        interactions.push(Interaction {
            user: field(r, 0, "interactions.csv", n + 2)?,
            item: field(r, 1, "interactions.csv", n + 2)?,
            rating: field(r, 2, "interactions.csv", n + 2)?,
            timestamp: field(r, 3, "interactions.csv", n + 2)?,
        });
    }

    let dataset = InteractionDataset {
        users: IdIndex::from_ordered(user_ids),
        items: IdIndex::from_ordered(item_ids),
        interactions,
        item_categories: CategoryWeighting::from_parts(manifest.categories, weights),
        user_groups: GroupPartition::from_user_labels(&groups),
        rating_scale: manifest.rating_scale,
        source: manifest.source,
    };
    if dataset.n_users() != manifest.n_users
        || dataset.n_items() != manifest.n_items
        || dataset.n_interactions() != manifest.n_interactions
    {
        return Err(Error::Config("cache counts disagree with manifest".into()));
    }
    dataset.validate()?;
    Ok(dataset)
}
