//! Experiment configuration files (JSON).
//!
//! Relative paths are resolved against the directory holding the config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::YelpOptions;
use crate::metrics::DEFAULT_CALIBRATION_ALPHA;
use crate::recommend::{Algorithm, HyperOverrides, HyperParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Movielens {
        ratings: PathBuf,
        movies: PathBuf,
        users: PathBuf,
    },
    Yelp {
        business: PathBuf,
        review: PathBuf,
        photo: PathBuf,
        city: String,
        #[serde(default = "default_yelp_min")]
        min_label_count: usize,
        #[serde(default = "default_yelp_min")]
        min_user_ratings: usize,
        /// File with one allowed label per line; defaults to the bundled list.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        region_labels: Option<PathBuf>,
        #[serde(default)]
        strict: bool,
    },
    /// A directory written by `bdaudit ingest`.
    Cache { dir: PathBuf },
}

fn default_yelp_min() -> usize {
    YelpOptions::default().min_label_count
}

/// One algorithm entry: either a bare name or an object with overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmEntry {
    Name(Algorithm),
    Full {
        algorithm: Algorithm,
        /// Report label; defaults to the algorithm name.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default)]
        hyper: HyperOverrides,
    },
}

impl AlgorithmEntry {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgorithmEntry::Name(a) => *a,
            AlgorithmEntry::Full { algorithm, .. } => *algorithm,
        }
    }

    pub fn label(&self) -> String {
        match self {
            AlgorithmEntry::Full { label: Some(l), .. } => l.clone(),
            _ => self.algorithm().to_string(),
        }
    }

    /// Defaults for the algorithm, then `top_n` from the experiment, then
    /// the entry's own overrides.
    pub fn hyper(&self, top_n: usize) -> HyperParams {
        let alg = self.algorithm();
        let base = HyperParams {
            top_n,
            ..HyperParams::defaults_for(alg)
        };
        match self {
            AlgorithmEntry::Name(_) => base,
            AlgorithmEntry::Full { hyper, .. } => base.with_overrides(hyper),
        }
    }
}

fn default_folds() -> usize {
    5
}

fn default_top_n() -> usize {
    10
}

fn default_alpha() -> f64 {
    DEFAULT_CALIBRATION_ALPHA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSource,
    pub pair: (String, String),
    pub min_ratings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub like_threshold: Option<f64>,
    pub algorithms: Vec<AlgorithmEntry>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_alpha")]
    pub calibration_alpha: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, resolves relative paths and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetSource::Movielens {
                ratings,
                movies,
                users,
            } => {
                fix(ratings);
                fix(movies);
                fix(users);
            }
            DatasetSource::Yelp {
                business,
                review,
                photo,
                region_labels,
                ..
            } => {
                fix(business);
                fix(review);
                fix(photo);
                if let Some(r) = region_labels {
                    fix(r);
                }
            }
            DatasetSource::Cache { dir } => fix(dir),
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.folds < 2 {
            return bad(format!("folds = {} must be at least 2", self.folds));
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty".into());
        }
        if self.pair.0 == self.pair.1 {
            return bad(format!("pair labels must differ, got {:?} twice", self.pair.0));
        }
        if self.top_n == 0 {
            return bad("top_n must be at least 1".into());
        }
        if !(self.calibration_alpha > 0.0 && self.calibration_alpha < 1.0) {
            return bad("calibration_alpha must lie in (0, 1)".into());
        }
        let mut labels: Vec<String> = self.algorithms.iter().map(AlgorithmEntry::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("algorithm label {:?} appears twice", w[0]));
        }
        for entry in &self.algorithms {
            entry
                .hyper(self.top_n)
                .validate(entry.algorithm())
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "name": "exp",
        "dataset": {"kind": "movielens", "ratings": "r.dat", "movies": "m.dat", "users": "/abs/u.dat"},
        "pair": ["Action", "Romance"],
        "min_ratings": 90,
        "algorithms": ["BPR", {"algorithm": "WRMF", "label": "WRMF-f20", "hyper": {"factors": 20}}],
        "seed": 7,
        "output_dir": "out"
    }"#;

    #[test]
    fn parses_and_resolves() {
        let mut c = ExperimentConfig::from_json(SAMPLE).unwrap();
        c.resolve_paths(Path::new("/cfg"));
        c.validate().unwrap();
        assert_eq!(c.folds, 5);
        assert_eq!(c.top_n, 10);
        match &c.dataset {
            DatasetSource::Movielens { ratings, users, .. } => {
                assert_eq!(ratings, Path::new("/cfg/r.dat"));
                assert_eq!(users, Path::new("/abs/u.dat"));
            }
            _ => panic!(),
        }
        assert_eq!(c.output_dir, Path::new("/cfg/out"));
        assert_eq!(c.algorithms[1].label(), "WRMF-f20");
        assert_eq!(c.algorithms[1].hyper(10).factors, 20);
        assert_eq!(c.algorithms[0].hyper(10).learn_rate, 0.05);
    }

    #[test]
    fn rejects_invalid() {
        let base = ExperimentConfig::from_json(SAMPLE).unwrap();
        let mut c = base.clone();
        c.folds = 1;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.pair.1 = "Action".into();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.algorithms.clear();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.algorithms.push(AlgorithmEntry::Name(Algorithm::BPR));
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(&SAMPLE.replace("\"seed\"", "\"sed\"")).is_err());
    }
}
