//! Bias-disparity audit toolkit for collaborative-filtering recommenders.
//!
//! The pipeline runs in five stages, one module each:
//!
//! * [`ingest`] parses MovieLens 1M and Yelp files into an [`InteractionDataset`]
//!   with fractional per-item category weights and per-user group labels.
//! * [`cohort`] restricts a dataset to a pair of categories and a minimum
//!   per-user activity level.
//! * [`split`] produces deterministic per-user k-fold splits.
//! * [`recommend`] trains the nine supported algorithms and emits top-N lists.
//! * [`metrics`] computes preference ratios, bias, bias disparity, calibration,
//!   nDCG and group significance.
//!
//! [`runner`] ties the stages together behind a JSON config and writes the
//! CSV/JSON/SVG report set.

pub mod cohort;
pub mod error;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod recommend;
pub mod runner;
pub mod split;

pub(crate) mod seed;

pub use cohort::{
    build_experiment_subset, cohort_stats, select_extreme_users, CohortStats, ExperimentCohort,
};
pub use error::{Error, Result};
pub use ingest::{
    binarize, load_movielens, load_yelp_restaurants, CategoryWeighting, GroupPartition, IdIndex,
    Interaction, InteractionDataset, YelpOptions,
};
pub use matrix::BinaryMatrix;
pub use recommend::{Algorithm, HyperParams, RecModel, Similarity};
pub use split::{userfixed_kfold, FoldSplit};
