//! Output directory layout:
//!
//! ```text
//! report.json        full audit report (deterministic)
//! provenance.json    tool version, dataset hash, wall-clock timing
//! metrics.csv        per-fold preference cells
//! significance.csv   group |BD| sums and Mann–Whitney p-values
//! ndcg.csv           per-fold nDCG
//! charts/pr_<category>.svg, charts/bd_<category>.svg
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::pipeline::{AuditReport, RunArtifacts};
use crate::error::{Error, Result};
use crate::metrics::Scope;

pub const METRICS_HEADER: &str =
    "experiment,algorithm,fold,scope,group,category,pr_input,pr_output,bias_input,bias_output,bias_disparity";
pub const SIGNIFICANCE_HEADER: &str = "experiment,algorithm,group_a_stat,group_b_stat,p_value,test_name";
pub const NDCG_HEADER: &str = "experiment,algorithm,fold,ndcg,users_evaluated,users_skipped";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub experiment: String,
    pub algorithm: String,
    pub fold: usize,
    pub scope: Scope,
    pub group: String,
    pub category: String,
    pub pr_input: f64,
    pub pr_output: f64,
    pub bias_input: f64,
    pub bias_output: f64,
    pub bias_disparity: Option<f64>,
}

pub fn metrics_rows(report: &AuditReport) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    for alg in &report.algorithms {
        for fold in &alg.folds {
            for c in &fold.cells {
                rows.push(MetricsRow {
                    experiment: report.config.name.clone(),
                    algorithm: alg.label.clone(),
                    fold: fold.fold,
                    scope: c.scope,
                    group: c.group.clone(),
                    category: c.category.clone(),
                    pr_input: c.pr_input,
                    pr_output: c.pr_output,
                    bias_input: c.bias_input,
                    bias_output: c.bias_output,
                    bias_disparity: c.bias_disparity,
                });
            }
        }
    }
    rows
}

pub fn render_metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.experiment),
            csv_field(&r.algorithm),
            r.fold,
            r.scope.as_str(),
            csv_field(&r.group),
            csv_field(&r.category),
            r.pr_input,
            r.pr_output,
            r.bias_input,
            r.bias_output,
            r.bias_disparity.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    out
}

pub fn parse_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serde(format!("{other:?}")),
    })?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header.join(",") != METRICS_HEADER {
        return Err(Error::Malformed {
            file: path.display().to_string(),
            line: 1,
            reason: "unexpected metrics header".into(),
        });
    }
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |reason: &str| Error::Malformed {
            file: path.display().to_string(),
            line: n + 2,
            reason: reason.to_string(),
        };
        let num = |k: usize| -> Result<f64> { rec[k].parse().map_err(|_| bad("bad number")) };
        let scope = match &rec[3] {
            "group" => Scope::Group,
            "general" => Scope::General,
            "extreme" => Scope::Extreme,
            _ => return Err(bad("bad scope")),
        };
        rows.push(MetricsRow {
            experiment: rec[0].to_string(),
            algorithm: rec[1].to_string(),
            fold: rec[2].parse().map_err(|_| bad("bad fold"))?,
            scope,
            group: rec[4].to_string(),
            category: rec[5].to_string(),
            pr_input: num(6)?,
            pr_output: num(7)?,
            bias_input: num(8)?,
            bias_output: num(9)?,
            bias_disparity: if rec[10].is_empty() { None } else { Some(num(10)?) },
        });
    }
    Ok(rows)
}

fn render_significance_csv(report: &AuditReport) -> String {
    let mut out = String::from(SIGNIFICANCE_HEADER);
    out.push('\n');
    for alg in &report.algorithms {
        if let Some(s) = &alg.significance {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&report.config.name),
                csv_field(&alg.label),
                s.group_a_stat,
                s.group_b_stat,
                s.p_value,
                s.test_name
            );
        }
    }
    out
}

fn render_ndcg_csv(report: &AuditReport) -> String {
    let mut out = String::from(NDCG_HEADER);
    out.push('\n');
    for alg in &report.algorithms {
        for f in &alg.folds {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&report.config.name),
                csv_field(&alg.label),
                f.fold,
                f.ndcg.mean,
                f.ndcg.evaluated,
                f.ndcg.skipped
            );
        }
    }
    out
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes every artifact and returns the paths written, sorted.
pub fn emit_report(report: &AuditReport, output_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = output_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        write(&p, body)?;
        written.push(p);
        Ok(())
    };
    put("report.json", serde_json::to_string_pretty(report)? + "\n")?;
    let provenance = json!({
        "tool": "bdaudit",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": report.config.name,
        "dataset_source": report.dataset_source,
        "dataset_hash": report.dataset_hash,
        "seed": report.config.seed,
        "timing": report.timing,
    });
    put("provenance.json", serde_json::to_string_pretty(&provenance)? + "\n")?;
    let rows = metrics_rows(report);
    put("metrics.csv", render_metrics_csv(&rows))?;
    put("significance.csv", render_significance_csv(report))?;
    put("ndcg.csv", render_ndcg_csv(report))?;
    written.extend(super::charts::write_charts(&rows, &dir.join("charts"))?);
    written.sort();
    Ok(written)
}

/// Re-renders `charts/` from an existing `metrics.csv`.
pub fn rerender_charts(output_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = output_dir.as_ref();
    let rows = parse_metrics_csv(&dir.join("metrics.csv"))?;
    super::charts::write_charts(&rows, &dir.join("charts"))
}

/// Per-fold top-N lists as `recommendations/<label>.csv`.
pub fn write_recommendations(artifacts: &RunArtifacts, output_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = output_dir.as_ref().join("recommendations");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut out = Vec::new();
    for r in &artifacts.recommendations {
        let p = dir.join(format!("{}.csv", super::charts::slug(&r.label)));
        crate::recommend::write_recommendations_csv(&r.folds, &artifacts.cohort.dataset, &p)?;
        out.push(p);
    }
    Ok(out)
}
