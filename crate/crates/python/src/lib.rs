//! Python bindings: `import bdaudit`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use bdaudit_core::metrics;
use bdaudit_core::recommend::{recommend_fold, train, Algorithm, HyperOverrides, HyperParams, TrainingData};
use bdaudit_core::runner::{self, ExperimentConfig};
use bdaudit_core::{BinaryMatrix, CategoryWeighting, Error};

fn value_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn load(config: &str, out: Option<PathBuf>, seed: Option<u64>) -> PyResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config).map_err(value_err)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Runs the experiment in `config` and returns the report as a dict. With
/// `out`, also writes the report files there.
#[pyfunction]
#[pyo3(signature = (config, out=None, seed=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let write = out.is_some();
    let cfg = load(config, out, seed)?;
    let text = py
        .detach(|| -> bdaudit_core::Result<String> {
            let report = runner::run_experiment(&cfg)?;
            if write {
                runner::emit_report(&report, &cfg.output_dir)?;
            }
            Ok(serde_json::to_string(&report)?)
        })
        .map_err(runtime_err)?;
    json_to_py(py, &text)
}

/// Cohort statistics for the dataset and pair in `config`.
#[pyfunction]
fn cohort_stats<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = load(config, None, None)?;
    let text = py
        .detach(|| -> bdaudit_core::Result<String> {
            let dataset = runner::load_dataset(&cfg.dataset)?;
            let cohort = runner::build_cohort(&cfg, &dataset)?;
            Ok(serde_json::to_string(&bdaudit_core::cohort_stats(&cohort))?)
        })
        .map_err(runtime_err)?;
    json_to_py(py, &text)
}

/// Re-renders `charts/` under `out` from its `metrics.csv`.
#[pyfunction]
fn rerender_charts(out: PathBuf) -> PyResult<Vec<String>> {
    let paths = runner::rerender_charts(&out).map_err(runtime_err)?;
    Ok(paths.into_iter().map(|p| p.display().to_string()).collect())
}

fn selection_matrix(rows: &[Vec<u32>], n_items: usize) -> PyResult<BinaryMatrix> {
    if let Some(&bad) = rows.iter().flatten().find(|&&i| i as usize >= n_items) {
        return Err(PyValueError::new_err(format!("item {bad} out of range for {n_items} items")));
    }
    Ok(BinaryMatrix::from_pairs(
        rows.len(),
        n_items,
        rows.iter()
            .enumerate()
            .flat_map(|(u, r)| r.iter().map(move |&i| (u, i as usize))),
    ))
}

/// Preference ratio of `users` for `category`. `selections[u]` lists the
/// items user `u` selected; `item_labels[i]` lists item `i`'s categories,
/// which share the item's weight equally.
#[pyfunction]
fn preference_ratio(
    selections: Vec<Vec<u32>>,
    item_labels: Vec<Vec<String>>,
    users: Vec<usize>,
    category: &str,
) -> PyResult<f64> {
    let weights = CategoryWeighting::equal_split(&item_labels);
    let cat = weights
        .label_index(category)
        .ok_or_else(|| PyValueError::new_err(format!("unknown category {category:?}")))?;
    if let Some(&bad) = users.iter().find(|&&u| u >= selections.len()) {
        return Err(PyValueError::new_err(format!("user {bad} out of range")));
    }
    let m = selection_matrix(&selections, item_labels.len())?;
    metrics::preference_ratio(&m, &users, cat, &weights).map_err(value_err)
}

#[pyfunction]
fn bias_disparity(input: f64, output: f64) -> PyResult<f64> {
    metrics::bias_disparity(input, output).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (p, q, alpha=metrics::DEFAULT_CALIBRATION_ALPHA))]
fn kl_calibration(p: Vec<f64>, q: Vec<f64>, alpha: f64) -> PyResult<f64> {
    metrics::kl_calibration(&p, &q, alpha).map_err(value_err)
}

/// nDCG@k with binary relevance; `None` when `test` is empty.
#[pyfunction]
fn ndcg_at_k(ranked: Vec<u32>, mut test: Vec<u32>, k: usize) -> PyResult<Option<f64>> {
    if k == 0 {
        return Err(PyValueError::new_err("k must be at least 1"));
    }
    test.sort_unstable();
    test.dedup();
    Ok(metrics::ndcg_at_k(&ranked, &test, k))
}

/// Two-sided Mann–Whitney U test: `(u, p_value, method)`.
#[pyfunction]
fn mann_whitney_u(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, String)> {
    let r = metrics::mann_whitney_u(&a, &b).map_err(value_err)?;
    let method = match r.method {
        metrics::UMethod::Exact => "exact",
        metrics::UMethod::Asymptotic => "asymptotic",
    };
    Ok((r.u, r.p_value, method.to_string()))
}

/// Trains `algorithm` on a dense ratings matrix (`None` = unrated) and
/// returns each user's top-N unrated items. `hyper` takes the same keys as
/// a config file's `hyper` block, as a JSON string.
#[pyfunction]
#[pyo3(signature = (algorithm, ratings, top_n=10, seed=0, hyper=None))]
fn recommend(
    py: Python<'_>,
    algorithm: &str,
    ratings: Vec<Vec<Option<f64>>>,
    top_n: usize,
    seed: u64,
    hyper: Option<&str>,
) -> PyResult<Vec<Vec<u32>>> {
    let alg: Algorithm = algorithm.parse().map_err(value_err)?;
    if ratings.is_empty() || ratings.iter().any(|r| r.len() != ratings[0].len()) {
        return Err(PyValueError::new_err("ratings must be a non-empty rectangular matrix"));
    }
    let overrides: HyperOverrides = match hyper {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => HyperOverrides::default(),
    };
    let params = HyperParams {
        top_n,
        ..HyperParams::defaults_for(alg)
    }
    .with_overrides(&overrides);
    py.detach(|| {
        let data = TrainingData::from_dense(&ratings);
        let model = train(alg, &data, &params, seed)?;
        Ok(recommend_fold(&model, 0, params.top_n).lists)
    })
    .map_err(value_err)
}

#[pymodule]
fn bdaudit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add(
        "ALGORITHMS",
        Algorithm::ALL.iter().map(|a| a.name()).collect::<Vec<_>>(),
    )?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(cohort_stats, m)?)?;
    m.add_function(wrap_pyfunction!(rerender_charts, m)?)?;
    m.add_function(wrap_pyfunction!(preference_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(bias_disparity, m)?)?;
    m.add_function(wrap_pyfunction!(kl_calibration, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    Ok(())
}
