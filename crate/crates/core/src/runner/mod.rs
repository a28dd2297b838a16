//! Config-driven experiments and report emission.

pub mod charts;
mod config;
mod pipeline;
mod report;

pub use config::{AlgorithmEntry, DatasetSource, ExperimentConfig};
pub use pipeline::{
    build_cohort, load_dataset, run_experiment, run_experiment_with_artifacts, summarize, AlgorithmEcho,
    AlgorithmRecommendations, AlgorithmReport, AuditReport, CalibrationCell, CalibrationSummary, ConfigEcho,
    ExtremeGroup, FoldMetrics, InputCell, MeanStd, RunArtifacts, SummaryCell, Timing, UnitTiming, ALL_USERS,
};
pub use report::{
    emit_report, metrics_rows, parse_metrics_csv, render_metrics_csv, rerender_charts, write_recommendations,
    MetricsRow, METRICS_HEADER, NDCG_HEADER, SIGNIFICANCE_HEADER,
};
