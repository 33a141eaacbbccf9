//! Radar frame classification with wavelet scattering features.
//!
//! The processing chain is: [`scattering`] features per channel, per-feature
//! z-scoring, supervised projection to `c - 1` dimensions ([`reduction`]) and
//! a linear discriminant classifier ([`classifier`]). [`pipeline`] ties the
//! stages together and runs stratified cross-validation; [`synthgen`]
//! produces labeled synthetic frames; [`storage`] holds the on-disk formats
//! and [`workflow`] strings everything into the user-facing operations.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod config;
pub mod error;
pub mod filterbank;
mod linalg;
pub mod pipeline;
pub mod reduction;
pub mod scattering;
pub mod storage;
pub mod synthgen;
pub mod timing;
pub mod workflow;

pub use classifier::{fit_lda, LdaModel, Prediction};
pub use error::{Error, Result};
pub use filterbank::{build_filter_bank, littlewood_paley_profile, FilterBank, FilterBankConfig};
pub use pipeline::{
    confusion_stats, cross_validate, fit_pipeline, ConfusionMatrix, ConfusionStats, PipelineModel, PipelineParams,
};
pub use reduction::{fit_sr, LabeledDataset, ProjectionModel};
pub use scattering::{enumerate_paths, ScatteringPath, ScatteringTransform, SignalFrame};
pub use timing::TimingReport;
