//! ingest → cohort → split → train/recommend → metrics → significance.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, ExperimentConfig};
use crate::cohort::{build_experiment_subset, cohort_stats, select_extreme_users, CohortStats, ExperimentCohort};
use crate::error::{Error, Result};
use crate::ingest::{
    binarize, dataset_hash, load_movielens, load_yelp_restaurants, parse_label_list, read_cache,
    InteractionDataset, YelpOptions,
};
use crate::matrix::BinaryMatrix;
use crate::metrics::{
    bias, group_significance, mean_and_std, mean_ndcg, per_user_abs_bd, preference_ratio,
    preference_report, user_calibration, GroupBdSamples, NdcgSummary, PreferenceCell, Scope,
    SignificanceResult, UserSet,
};
use crate::recommend::{self, recommend_fold, Algorithm, HyperParams, RecommendationMatrix, TrainingData};
use crate::seed;
use crate::split::userfixed_kfold;

/// Label of the whole-population scope.
pub const ALL_USERS: &str = "ALL";

/// Echo of the configuration that produced a report. Dataset paths are
/// reduced to file names so reports do not depend on where data lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub name: String,
    pub dataset_kind: String,
    pub dataset_files: Vec<String>,
    pub pair: (String, String),
    pub min_ratings: usize,
    pub like_threshold: Option<f64>,
    pub algorithms: Vec<AlgorithmEcho>,
    pub folds: usize,
    pub top_n: usize,
    pub seed: u64,
    pub calibration_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEcho {
    pub label: String,
    pub algorithm: Algorithm,
    pub hyper: HyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputCell {
    pub scope: Scope,
    pub group: String,
    pub category: String,
    pub preference_ratio: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeGroup {
    pub label: String,
    pub zero_category: String,
    pub n_users: usize,
    pub group_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub scope: Scope,
    pub group: String,
    pub mean_kl: f64,
    pub users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub cells: Vec<PreferenceCell>,
    pub ndcg: NdcgSummary,
    pub calibration: Vec<CalibrationCell>,
    /// (user, category) pairs left out of per-user BD for a zero input PR.
    pub bd_excluded_pairs: usize,
}

/// Fold mean ± sample standard deviation of one (scope, group, category).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub scope: Scope,
    pub group: String,
    pub category: String,
    pub pr_input: f64,
    pub pr_output_mean: f64,
    pub pr_output_std: f64,
    pub bias_input: f64,
    pub bias_output_mean: f64,
    /// `None` when the input PR is zero.
    pub bd_mean: Option<f64>,
    pub bd_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Fold mean ± standard deviation of the per-user mean KL calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub scope: Scope,
    pub group: String,
    pub mean_kl: f64,
    pub std_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub label: String,
    pub algorithm: Algorithm,
    pub hyper: HyperParams,
    pub summary: Vec<SummaryCell>,
    pub ndcg: MeanStd,
    pub calibration: Vec<CalibrationSummary>,
    pub significance: Option<SignificanceResult>,
    pub folds: Vec<FoldMetrics>,
}

impl AlgorithmReport {
    pub fn summary_cell(&self, scope: Scope, group: &str, category: &str) -> Option<&SummaryCell> {
        self.summary
            .iter()
            .find(|c| c.scope == scope && c.group == group && c.category == category)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitTiming {
    pub label: String,
    pub fold: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub units: Vec<UnitTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: ConfigEcho,
    pub dataset_source: String,
    pub dataset_hash: String,
    pub cohort: CohortStats,
    pub priors: BTreeMap<String, f64>,
    pub input: Vec<InputCell>,
    pub extreme_groups: Vec<ExtremeGroup>,
    pub algorithms: Vec<AlgorithmReport>,
    /// Wall-clock data; written to provenance only, never to the report.
    #[serde(skip)]
    pub timing: Timing,
}

impl AuditReport {
    pub fn algorithm(&self, label: &str) -> Option<&AlgorithmReport> {
        self.algorithms.iter().find(|a| a.label == label)
    }

    pub fn input_cell(&self, scope: Scope, group: &str, category: &str) -> Option<&InputCell> {
        self.input
            .iter()
            .find(|c| c.scope == scope && c.group == group && c.category == category)
    }
}

/// Recommendation lists of one configured algorithm, per fold.
#[derive(Debug, Clone)]
pub struct AlgorithmRecommendations {
    pub label: String,
    pub folds: Vec<RecommendationMatrix>,
}

/// Intermediate results kept alongside a report.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub cohort: ExperimentCohort,
    pub recommendations: Vec<AlgorithmRecommendations>,
}

pub fn load_dataset(source: &DatasetSource) -> Result<InteractionDataset> {
    match source {
        DatasetSource::Movielens {
            ratings,
            movies,
            users,
        } => load_movielens(ratings, movies, users),
        DatasetSource::Yelp {
            business,
            review,
            photo,
            city,
            min_label_count,
            min_user_ratings,
            region_labels,
            strict,
        } => {
            let region_labels = match region_labels {
                Some(p) => Some(parse_label_list(
                    &std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
                )),
                None => None,
            };
            let opts = YelpOptions {
                min_label_count: *min_label_count,
                min_user_ratings: *min_user_ratings,
                region_labels,
                strict: *strict,
            };
            load_yelp_restaurants(business, review, photo, city, &opts)
        }
        DatasetSource::Cache { dir } => read_cache(dir),
    }
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn echo(config: &ExperimentConfig) -> ConfigEcho {
    let (kind, files) = match &config.dataset {
        DatasetSource::Movielens {
            ratings,
            movies,
            users,
        } => ("movielens", vec![file_name(ratings), file_name(movies), file_name(users)]),
        DatasetSource::Yelp {
            business,
            review,
            photo,
            ..
        } => ("yelp", vec![file_name(business), file_name(review), file_name(photo)]),
        DatasetSource::Cache { dir } => ("cache", vec![file_name(dir)]),
    };
    ConfigEcho {
        name: config.name.clone(),
        dataset_kind: kind.into(),
        dataset_files: files,
        pair: config.pair.clone(),
        min_ratings: config.min_ratings,
        like_threshold: config.like_threshold,
        algorithms: config
            .algorithms
            .iter()
            .map(|e| AlgorithmEcho {
                label: e.label(),
                algorithm: e.algorithm(),
                hyper: e.hyper(config.top_n),
            })
            .collect(),
        folds: config.folds,
        top_n: config.top_n,
        seed: config.seed,
        calibration_alpha: config.calibration_alpha,
    }
}

/// Cohort built from a loaded dataset per the config.
pub fn build_cohort(config: &ExperimentConfig, dataset: &InteractionDataset) -> Result<ExperimentCohort> {
    build_experiment_subset(
        dataset,
        (config.pair.0.as_str(), config.pair.1.as_str()),
        config.min_ratings,
    )
}

/// The group, general and extreme user sets of a cohort.
fn user_sets(cohort: &ExperimentCohort, s: &BinaryMatrix) -> Result<(Vec<UserSet>, Vec<ExtremeGroup>)> {
    let groups = &cohort.dataset.user_groups;
    let mut sets: Vec<UserSet> = groups
        .labels()
        .iter()
        .map(|g| UserSet {
            scope: Scope::Group,
            label: g.clone(),
            users: groups.members(g),
        })
        .collect();
    sets.push(UserSet {
        scope: Scope::General,
        label: ALL_USERS.into(),
        users: (0..cohort.dataset.n_users()).collect(),
    });
    let mut extremes = Vec::new();
    for zero in [&cohort.category_pair.0, &cohort.category_pair.1] {
        let users = select_extreme_users(s, cohort, zero)?;
        let mut group_counts = BTreeMap::new();
        for &u in &users {
            *group_counts.entry(groups.group_of(u).to_string()).or_insert(0) += 1;
        }
        let label = format!("zero-{zero}");
        extremes.push(ExtremeGroup {
            label: label.clone(),
            zero_category: zero.clone(),
            n_users: users.len(),
            group_counts,
        });
        if !users.is_empty() {
            sets.push(UserSet {
                scope: Scope::Extreme,
                label,
                users,
            });
        }
    }
    Ok((sets, extremes))
}

struct Unit {
    alg: usize,
    fold: usize,
    rec: RecommendationMatrix,
    seconds: f64,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<AuditReport> {
    run_experiment_with_artifacts(config).map(|(r, _)| r)
}

pub fn run_experiment_with_artifacts(config: &ExperimentConfig) -> Result<(AuditReport, RunArtifacts)> {
    let started = Instant::now();
    config.validate()?;
    let dataset = load_dataset(&config.dataset).map_err(|e| e.in_stage("ingest"))?;
    info!("loaded {} interactions from {}", dataset.n_interactions(), dataset.source);
    let hash = dataset_hash(&dataset);

    let cohort = build_cohort(config, &dataset).map_err(|e| e.in_stage("cohort"))?;
    let stats = cohort_stats(&cohort);
    info!(
        "cohort: {} users, {} items, {} interactions",
        stats.n_users, stats.n_items, stats.n_interactions
    );
    let s = binarize(&cohort.dataset, config.like_threshold).map_err(|e| e.in_stage("cohort"))?;
    let weights = cohort.pair_weights();
    let (sets, extreme_groups) = user_sets(&cohort, &s).map_err(|e| e.in_stage("cohort"))?;

    let mut priors = BTreeMap::new();
    let mut input = Vec::new();
    for (c, label) in weights.labels().iter().enumerate() {
        let prior = crate::metrics::category_prior_of(weights, c).map_err(|e| e.in_stage("metrics"))?;
        priors.insert(label.clone(), prior);
        for set in &sets {
            let pr = preference_ratio(&s, &set.users, c, weights).map_err(|e| e.in_stage("metrics"))?;
            input.push(InputCell {
                scope: set.scope,
                group: set.label.clone(),
                category: label.clone(),
                preference_ratio: pr,
                bias: bias(pr, prior).map_err(|e| e.in_stage("metrics"))?,
            });
        }
    }

    let split = userfixed_kfold(&cohort, config.folds, config.seed).map_err(|e| e.in_stage("split"))?;
    let folds: Vec<_> = split.folds().collect();
    let train_sets: Vec<TrainingData> = folds
        .iter()
        .map(|f| TrainingData::from_fold(&cohort.dataset, f))
        .collect();
    let test_sets: Vec<BinaryMatrix> = folds.iter().map(|f| f.test_matrix(&cohort.dataset)).collect();

    let echo = echo(config);
    let work: Vec<(usize, usize)> = (0..echo.algorithms.len())
        .flat_map(|a| (0..config.folds).map(move |f| (a, f)))
        .collect();
    let mut units: Vec<Unit> = work
        .par_iter()
        .map(|&(a, f)| {
            let entry = &echo.algorithms[a];
            let t = Instant::now();
            let unit_seed = seed::derive(config.seed, &[a as u64, f as u64]);
            let model = recommend::train(entry.algorithm, &train_sets[f], &entry.hyper, unit_seed)
                .map_err(|e| e.in_stage("train"))?;
            let rec = recommend_fold(&model, f, entry.hyper.top_n);
            info!("{} fold {f} done in {:.2}s", entry.label, t.elapsed().as_secs_f64());
            Ok(Unit {
                alg: a,
                fold: f,
                rec,
                seconds: t.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    units.sort_by_key(|u| (u.alg, u.fold));

    let mut algorithms = Vec::with_capacity(echo.algorithms.len());
    let mut recommendations = Vec::with_capacity(echo.algorithms.len());
    let mut timing = Timing::default();
    for (a, entry) in echo.algorithms.iter().enumerate() {
        let mine: Vec<&Unit> = units.iter().filter(|u| u.alg == a).collect();
        let mut fold_metrics = Vec::with_capacity(mine.len());
        // per group: per user, per-fold Σ|BD|
        let mut per_user: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
        for u in &mine {
            timing.units.push(UnitTiming {
                label: entry.label.clone(),
                fold: u.fold,
                seconds: u.seconds,
            });
            let r = u.rec.to_matrix();
            let report = preference_report(&s, &r, weights, &sets).map_err(|e| e.in_stage("metrics"))?;
            let ndcg = mean_ndcg(&u.rec.lists, &test_sets[u.fold], entry.hyper.top_n);
            let mut calibration = Vec::new();
            let mut excluded = 0;
            for set in &sets {
                let kl = user_calibration(&s, &r, weights, &set.users, config.calibration_alpha)
                    .map_err(|e| e.in_stage("metrics"))?;
                let vals: Vec<f64> = kl.into_iter().flatten().collect();
                calibration.push(CalibrationCell {
                    scope: set.scope,
                    group: set.label.clone(),
                    mean_kl: mean_and_std(&vals).0,
                    users: vals.len(),
                });
                if set.scope == Scope::Group {
                    let bd = per_user_abs_bd(&s, &r, weights, &set.users);
                    excluded += bd.excluded_pairs;
                    let slot = per_user
                        .entry(set.label.clone())
                        .or_insert_with(|| vec![Vec::new(); set.users.len()]);
                    for (k, v) in bd.values.into_iter().enumerate() {
                        if let Some(v) = v {
                            slot[k].push(v);
                        }
                    }
                }
            }
            fold_metrics.push(FoldMetrics {
                fold: u.fold,
                cells: report.cells,
                ndcg,
                calibration,
                bd_excluded_pairs: excluded,
            });
        }
        let summary = summarize(&fold_metrics);
        let ndcg_vals: Vec<f64> = fold_metrics.iter().map(|f| f.ndcg.mean).collect();
        let (nm, ns) = mean_and_std(&ndcg_vals);
        let calibration = sets
            .iter()
            .enumerate()
            .map(|(k, set)| {
                let v: Vec<f64> = fold_metrics.iter().map(|f| f.calibration[k].mean_kl).collect();
                let (mean_kl, std_kl) = mean_and_std(&v);
                CalibrationSummary {
                    scope: set.scope,
                    group: set.label.clone(),
                    mean_kl,
                    std_kl,
                }
            })
            .collect();
        let group_labels = cohort.dataset.user_groups.labels();
        let significance = if group_labels.len() == 2 {
            let samples = |g: &str| GroupBdSamples {
                label: g.to_string(),
                group_bd: summary
                    .iter()
                    .filter(|c| c.scope == Scope::Group && c.group == g)
                    .filter_map(|c| c.bd_mean)
                    .collect(),
                per_user: per_user
                    .get(g)
                    .map(|users| {
                        users
                            .iter()
                            .filter(|v| !v.is_empty())
                            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                            .collect()
                    })
                    .unwrap_or_default(),
            };
            Some(
                group_significance(&samples(&group_labels[0]), &samples(&group_labels[1]))
                    .map_err(|e| e.in_stage("significance"))?,
            )
        } else {
            None
        };
        algorithms.push(AlgorithmReport {
            label: entry.label.clone(),
            algorithm: entry.algorithm,
            hyper: entry.hyper.clone(),
            summary,
            ndcg: MeanStd { mean: nm, std: ns },
            calibration,
            significance,
            folds: fold_metrics,
        });
        recommendations.push(AlgorithmRecommendations {
            label: entry.label.clone(),
            folds: mine.iter().map(|u| u.rec.clone()).collect(),
        });
    }
    timing.total_seconds = started.elapsed().as_secs_f64();

    Ok((
        AuditReport {
            config: echo,
            dataset_source: dataset.source.clone(),
            dataset_hash: hash,
            cohort: stats,
            priors,
            input,
            extreme_groups,
            algorithms,
            timing,
        },
        RunArtifacts {
            cohort,
            recommendations,
        },
    ))
}

/// Fold means of every preference cell. Cells appear in the order of the
/// first fold.
pub fn summarize(folds: &[FoldMetrics]) -> Vec<SummaryCell> {
    let Some(first) = folds.first() else {
        return Vec::new();
    };
    first
        .cells
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let pr_out: Vec<f64> = folds.iter().map(|f| f.cells[k].pr_output).collect();
            let b_out: Vec<f64> = folds.iter().map(|f| f.cells[k].bias_output).collect();
            let bd: Vec<f64> = folds.iter().filter_map(|f| f.cells[k].bias_disparity).collect();
            let (pm, ps) = mean_and_std(&pr_out);
            let (bd_mean, bd_std) = if bd.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_and_std(&bd);
                (Some(m), Some(s))
            };
            SummaryCell {
                scope: c.scope,
                group: c.group.clone(),
                category: c.category.clone(),
                pr_input: c.pr_input,
                pr_output_mean: pm,
                pr_output_std: ps,
                bias_input: c.bias_input,
                bias_output_mean: mean_and_std(&b_out).0,
                bd_mean,
                bd_std,
            }
        })
        .collect()
}
