//! Training, classification and cross-validation of the full feature chain:
//! z-score normalization → spectral-regression projection → LDA.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{fit_lda, LdaModel, DEFAULT_SHRINKAGE};
use crate::error::{Error, Result};
use crate::filterbank::FilterBankConfig;
use crate::reduction::{check_class_counts, solve_sr, sr_responses, LabeledDataset, ProjectionModel, DEFAULT_RIDGE};
use crate::scattering::{log_compress, ScatteringTransform, SignalFrame};
use crate::timing::{FrameTiming, Stopwatch};

/// Floor applied to per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub ridge: f64,
    pub shrinkage: f64,
    /// When set, order ≥ 1 scattering coefficients are mapped through
    /// `log(1 + x/eps)` before normalization.
    pub log_epsilon: Option<f64>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            ridge: DEFAULT_RIDGE,
            shrinkage: DEFAULT_SHRINKAGE,
            log_epsilon: None,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::Config(format!(
                "ridge must be finite and >= 0, got {}",
                self.ridge
            )));
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::Config(format!(
                "shrinkage must lie in [0, 1], got {}",
                self.shrinkage
            )));
        }
        if let Some(eps) = self.log_epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::Config(format!("log epsilon must be positive, got {eps}")));
            }
        }
        Ok(())
    }
}

/// How a flattened frame feature vector is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub channels: usize,
    /// Paths × samples per path.
    pub channel_len: usize,
    /// Samples per path (`2N/T`).
    pub path_len: usize,
}

impl FeatureLayout {
    pub fn for_transform(transform: &ScatteringTransform, channels: usize) -> Self {
        FeatureLayout {
            channels,
            channel_len: transform.channel_feature_len(),
            path_len: transform.bank().config.output_len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.channels * self.channel_len
    }
}

/// Stable hash of the hyperparameters a model depends on.
pub fn config_digest(filter: &FilterBankConfig, params: &PipelineParams) -> String {
    let doc = serde_json::json!({ "filter": filter, "params": params });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub norm_mean: DVector<f64>,
    pub norm_std: DVector<f64>,
    pub projection: ProjectionModel,
    pub lda: LdaModel,
    pub filter_config: FilterBankConfig,
    pub params: PipelineParams,
    pub layout: FeatureLayout,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub class_index: usize,
    pub class_name: String,
    pub scores: Vec<f64>,
    pub posteriors: Vec<f64>,
}

impl PipelineModel {
    pub fn class_names(&self) -> &[String] {
        &self.lda.class_names
    }

    pub fn input_dim(&self) -> usize {
        self.norm_mean.len()
    }

    pub fn projected_dim(&self) -> usize {
        self.projection.output_dim()
    }

    /// Hash of every fitted number and name in the model.
    pub fn model_digest(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |values: &mut dyn Iterator<Item = f64>| {
            for v in values {
                h.update(v.to_bits().to_le_bytes());
            }
        };
        put(&mut self.norm_mean.iter().copied());
        put(&mut self.norm_std.iter().copied());
        put(&mut self.projection.mean.iter().copied());
        put(&mut self.projection.basis.iter().copied());
        put(&mut self.lda.class_means.iter().copied());
        put(&mut self.lda.pooled_precision.iter().copied());
        put(&mut self.lda.log_priors.iter().copied());
        for name in &self.lda.class_names {
            h.update(name.as_bytes());
            h.update([0]);
        }
        h.update(self.config_digest.as_bytes());
        hex::encode(h.finalize())
    }

    fn apply_log(&self, features: &mut [f64]) {
        if let Some(eps) = self.params.log_epsilon {
            log_compress(features, self.layout.channel_len, self.layout.path_len, eps);
        }
    }

    /// Log-compresses (when enabled) and z-scores a raw feature vector in place.
    pub fn normalize(&self, features: &mut [f64]) -> Result<()> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, frame produced {}",
                self.input_dim(),
                features.len()
            )));
        }
        self.apply_log(features);
        for ((v, &m), &s) in features.iter_mut().zip(self.norm_mean.iter()).zip(self.norm_std.iter()) {
            *v = (*v - m) / s;
        }
        Ok(())
    }

    /// Classifies a raw (un-normalized) scattering feature vector.
    pub fn classify_features(&self, features: &[f64]) -> Result<Decision> {
        let mut v = features.to_vec();
        self.normalize(&mut v)?;
        let projected = self.projection.project(&v)?;
        self.decide(projected.as_slice())
    }

    fn decide(&self, projected: &[f64]) -> Result<Decision> {
        let p = self.lda.predict(projected)?;
        Ok(Decision {
            class_name: self.lda.class_names[p.class_index].clone(),
            class_index: p.class_index,
            scores: p.scores,
            posteriors: p.posteriors,
        })
    }

    pub fn check_transform(&self, transform: &ScatteringTransform) -> Result<()> {
        if transform.bank().config != self.filter_config {
            return Err(Error::DimensionMismatch(format!(
                "model was trained with filter config digest {} but the runtime bank differs",
                self.config_digest
            )));
        }
        Ok(())
    }

    /// Scatter → normalize → project → predict for one frame, timing each stage.
    /// The `acquire` stage is left at zero for the caller to fill in.
    pub fn classify_frame(
        &self,
        frame: &SignalFrame,
        transform: &ScatteringTransform,
    ) -> Result<(Decision, FrameTiming)> {
        self.check_transform(transform)?;
        let n = transform.bank().signal_len();
        if frame.samples > n || frame.channels != self.layout.channels {
            return Err(Error::DimensionMismatch(format!(
                "frame is {}x{} ({}), model expects {} channels of at most {n} samples",
                frame.channels, frame.samples, frame.profile_id, self.layout.channels
            )));
        }
        let mut watch = Stopwatch::start();
        let mut features = transform.scatter_frame(frame)?;
        let wst = watch.lap();
        self.normalize(&mut features)?;
        let normalize = watch.lap();
        let projected = self.projection.project(&features)?;
        let project = watch.lap();
        let decision = self.decide(projected.as_slice())?;
        let classify = watch.lap();
        let timing = FrameTiming {
            acquire: 0.0,
            wst,
            normalize,
            project,
            classify,
            total: watch.elapsed(),
        };
        Ok((decision, timing))
    }
}

pub fn classify_frame(
    model: &PipelineModel,
    frame: &SignalFrame,
    transform: &ScatteringTransform,
) -> Result<(Decision, FrameTiming)> {
    model.classify_frame(frame, transform)
}

/// Fits the model on every row of `data`. `layout` describes how the raw
/// scattering features were produced by `filter_config`.
pub fn fit_pipeline(
    data: &LabeledDataset,
    filter_config: &FilterBankConfig,
    layout: FeatureLayout,
    params: &PipelineParams,
) -> Result<PipelineModel> {
    let rows: Vec<usize> = (0..data.num_samples()).collect();
    fit_rows(data, &rows, filter_config, layout, params)
}

fn fit_rows(
    data: &LabeledDataset,
    rows: &[usize],
    filter_config: &FilterBankConfig,
    layout: FeatureLayout,
    params: &PipelineParams,
) -> Result<PipelineModel> {
    params.validate()?;
    let d = data.num_features();
    if layout.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "feature layout describes {} values, dataset rows have {d}",
            layout.dim()
        )));
    }
    let n = rows.len();
    let labels: Vec<usize> = rows.iter().map(|&i| data.labels()[i]).collect();
    check_class_counts(&labels, data.class_names(), 2)?;
    let c = data.num_classes();

    let x = data.features();
    let mut z = DMatrix::<f64>::zeros(n, d);
    for j in 0..d {
        for (r, &i) in rows.iter().enumerate() {
            z[(r, j)] = x[(i, j)];
        }
    }
    if let Some(eps) = params.log_epsilon {
        for r in 0..n {
            let mut row: Vec<f64> = z.row(r).iter().copied().collect();
            log_compress(&mut row, layout.channel_len, layout.path_len, eps);
            for (j, v) in row.into_iter().enumerate() {
                z[(r, j)] = v;
            }
        }
    }

    let mut norm_mean = DVector::zeros(d);
    let mut norm_std = DVector::zeros(d);
    for (j, mut col) in z.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt().max(STD_FLOOR);
        for v in col.iter_mut() {
            *v = (*v - mean) / std;
        }
        norm_mean[j] = mean;
        norm_std[j] = std;
    }

    let (projection, centered) = fit_sr_centered(z, &labels, c, params.ridge)?;
    let projected = &centered * &projection.basis;
    drop(centered);
    let projected_ds = LabeledDataset::new(projected, labels, data.class_names().to_vec())?;
    let lda = fit_lda(&projected_ds, params.shrinkage)?;

    Ok(PipelineModel {
        norm_mean,
        norm_std,
        projection,
        lda,
        filter_config: filter_config.clone(),
        params: params.clone(),
        layout,
        config_digest: config_digest(filter_config, params),
    })
}

/// Spectral regression on an owned matrix that is centered in place; returns
/// the model together with the centered training matrix.
fn fit_sr_centered(
    mut x: DMatrix<f64>,
    labels: &[usize],
    c: usize,
    ridge: f64,
) -> Result<(ProjectionModel, DMatrix<f64>)> {
    let (n, d) = x.shape();
    let mean = DVector::from_iterator(d, x.column_iter().map(|col| col.sum() / n as f64));
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let responses = sr_responses(labels, c);
    let basis = solve_sr(&x, &responses, ridge)?;
    Ok((ProjectionModel { mean, basis, ridge }, x))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Rows are true classes, columns predicted classes.
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        ConfusionMatrix {
            counts: vec![vec![0; c]; c],
            class_names,
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.row_sums().iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.counts.len()).map(|k| self.counts[k][k]).sum();
        correct as f64 / self.total() as f64
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionStats {
    /// Row-normalized percentages.
    pub percent: Vec<Vec<f64>>,
    /// `percent` rounded to the nearest integer.
    pub rounded: Vec<Vec<i64>>,
    pub diag_mean: f64,
    /// Population standard deviation of the diagonal percentages.
    pub diag_std: f64,
}

pub fn confusion_stats(m: &ConfusionMatrix) -> Result<ConfusionStats> {
    let mut percent = Vec::with_capacity(m.counts.len());
    for (k, row) in m.counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(Error::EmptyRow(k));
        }
        percent.push(
            row.iter()
                .map(|&v| 100.0 * v as f64 / total as f64)
                .collect::<Vec<f64>>(),
        );
    }
    let diag: Vec<f64> = percent.iter().enumerate().map(|(k, r)| r[k]).collect();
    let c = diag.len() as f64;
    let diag_mean = diag.iter().sum::<f64>() / c;
    let diag_std = (diag.iter().map(|v| (v - diag_mean).powi(2)).sum::<f64>() / c).sqrt();
    let rounded = percent
        .iter()
        .map(|r| r.iter().map(|v| v.round() as i64).collect())
        .collect();
    Ok(ConfusionStats {
        percent,
        rounded,
        diag_mean,
        diag_std,
    })
}

/// Per-sample fold index: within each class, samples are shuffled with a
/// ChaCha8 stream seeded by `seed` and dealt round-robin into `k` folds.
pub fn stratified_folds(labels: &[usize], num_classes: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    for class in 0..num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            folds[i] = pos % k;
        }
    }
    folds
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub confusion: ConfusionMatrix,
    pub folds: Vec<usize>,
    pub fold_digests: Vec<String>,
}

pub fn cross_validate(
    data: &LabeledDataset,
    k: usize,
    seed: u64,
    filter_config: &FilterBankConfig,
    layout: FeatureLayout,
    params: &PipelineParams,
) -> Result<ConfusionMatrix> {
    Ok(cross_validate_detailed(data, k, seed, filter_config, layout, params)?.confusion)
}

/// Stratified k-fold cross-validation. Every statistic of a fold model is
/// computed from that fold's training rows only. Folds run sequentially to
/// bound peak memory on wide feature sets.
pub fn cross_validate_detailed(
    data: &LabeledDataset,
    k: usize,
    seed: u64,
    filter_config: &FilterBankConfig,
    layout: FeatureLayout,
    params: &PipelineParams,
) -> Result<CrossValidation> {
    if k < 2 {
        return Err(Error::TooFewSamples(format!("need at least 2 folds, got {k}")));
    }
    for (class, &count) in data.class_counts().iter().enumerate() {
        if count < k {
            return Err(Error::TooFewSamples(format!(
                "class {:?} has {count} samples, fewer than {k} folds",
                data.class_names()[class]
            )));
        }
    }
    let folds = stratified_folds(data.labels(), data.num_classes(), k, seed);
    let mut confusion = ConfusionMatrix::new(data.class_names().to_vec());
    let mut fold_digests = Vec::with_capacity(k);
    for fold in 0..k {
        let train: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != fold).collect();
        let model = fit_rows(data, &train, filter_config, layout, params)?;
        fold_digests.push(model.model_digest());
        for i in (0..folds.len()).filter(|&i| folds[i] == fold) {
            let row: Vec<f64> = data.features().row(i).iter().copied().collect();
            let decision = model.classify_features(&row)?;
            confusion.record(data.labels()[i], decision.class_index);
        }
    }
    Ok(CrossValidation {
        confusion,
        folds,
        fold_digests,
    })
}
