//! Shared-covariance Gaussian (linear discriminant) classifier.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::reduction::LabeledDataset;

pub const DEFAULT_SHRINKAGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// `c × p` class means.
    pub class_means: DMatrix<f64>,
    /// Inverse of the shrunk pooled within-class covariance, `p × p`.
    pub pooled_precision: DMatrix<f64>,
    pub log_priors: DVector<f64>,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub scores: Vec<f64>,
    pub posteriors: Vec<f64>,
}

pub fn fit_lda(data: &LabeledDataset, shrinkage: f64) -> Result<LdaModel> {
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::Config(format!("shrinkage must lie in [0, 1], got {shrinkage}")));
    }
    data.require_per_class(2)?;
    let x = data.features();
    let (n, p) = x.shape();
    let c = data.num_classes();
    if p < 1 {
        return Err(Error::DimensionMismatch("LDA needs at least one feature".into()));
    }
    let counts = data.class_counts();

    let mut means = DMatrix::<f64>::zeros(c, p);
    for (i, &label) in data.labels().iter().enumerate() {
        for j in 0..p {
            means[(label, j)] += x[(i, j)];
        }
    }
    for (k, &count) in counts.iter().enumerate() {
        means.row_mut(k).scale_mut(1.0 / count as f64);
    }

    let mut scatter = DMatrix::<f64>::zeros(p, p);
    let mut diff = DVector::<f64>::zeros(p);
    for (i, &label) in data.labels().iter().enumerate() {
        for j in 0..p {
            diff[j] = x[(i, j)] - means[(label, j)];
        }
        scatter.ger(1.0, &diff, &diff, 1.0);
    }
    if n <= c {
        return Err(Error::TooFewSamples(format!(
            "pooled covariance needs more than {c} samples, got {n}"
        )));
    }
    let mut cov = scatter / (n - c) as f64;
    if shrinkage > 0.0 {
        let target = cov.trace() / p as f64;
        cov.scale_mut(1.0 - shrinkage);
        for j in 0..p {
            cov[(j, j)] += shrinkage * target;
        }
    }

    let chol = linalg::cholesky(cov).ok_or_else(|| {
        Error::NonPositiveDefinite(format!(
            "pooled covariance (shrinkage {shrinkage}) cannot be factorized"
        ))
    })?;
    let mut precision = chol.inverse();
    precision = (&precision + precision.transpose()) * 0.5;

    let log_priors = DVector::from_iterator(c, counts.iter().map(|&k| (k as f64 / n as f64).ln()));

    Ok(LdaModel {
        class_means: means,
        pooled_precision: precision,
        log_priors,
        class_names: data.class_names().to_vec(),
    })
}

impl LdaModel {
    pub fn num_classes(&self) -> usize {
        self.class_means.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.class_means.ncols()
    }

    /// `δ_k(v) = vᵀPμ_k − ½ μ_kᵀPμ_k + log π_k`
    pub fn scores(&self, v: &[f64]) -> Result<Vec<f64>> {
        let p = self.input_dim();
        if v.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                actual: v.len(),
            });
        }
        let v = DVector::from_column_slice(v);
        Ok((0..self.num_classes())
            .map(|k| {
                let mu = self.class_means.row(k).transpose();
                let pmu = &self.pooled_precision * &mu;
                v.dot(&pmu) - 0.5 * mu.dot(&pmu) + self.log_priors[k]
            })
            .collect())
    }

    pub fn predict(&self, v: &[f64]) -> Result<Prediction> {
        let scores = self.scores(v)?;
        let class_index = argmax(&scores);
        let posteriors = softmax(&scores);
        Ok(Prediction {
            class_index,
            scores,
            posteriors,
        })
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn predict(model: &LdaModel, v: &[f64]) -> Result<Prediction> {
    model.predict(v)
}
