//! Supervised projection to `c - 1` dimensions by spectral regression.
//!
//! For the LDA graph (complete within-class graph with weights `1/n_k`) the
//! graph embedding's leading eigenvectors are the class indicators. They are
//! orthogonalized against the constant vector, and each response is regressed
//! on the centered features with a ridge penalty.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_RIDGE: f64 = 0.01;

/// Residual norm below which a Gram-Schmidt response is treated as dependent.
const RESPONSE_NORM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let n = features.nrows();
        let c = class_names.len();
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        if c < 2 {
            return Err(Error::InvalidDataset(format!("need at least two classes, got {c}")));
        }
        if n < c {
            return Err(Error::TooFewSamples(format!("{n} samples for {c} classes")));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidDataset(format!("label {bad} outside 0..{c}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("features contain NaN or infinity".into()));
        }
        let ds = LabeledDataset {
            features,
            labels,
            class_names,
        };
        ds.require_per_class(2)?;
        Ok(ds)
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        let features = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(features, labels, class_names)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    pub(crate) fn require_per_class(&self, required: usize) -> Result<()> {
        check_class_counts(&self.labels, &self.class_names, required)
    }

    /// Rows at `indices`, keeping the class list. Skips the per-class size
    /// check so that held-out folds can be represented.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Same labels and classes with a replacement feature matrix.
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<LabeledDataset> {
        if features.nrows() != self.num_samples() {
            return Err(Error::LengthMismatch {
                expected: self.num_samples(),
                actual: features.nrows(),
            });
        }
        Ok(LabeledDataset {
            features,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        })
    }
}

pub(crate) fn check_class_counts(labels: &[usize], class_names: &[String], required: usize) -> Result<()> {
    let mut counts = vec![0; class_names.len()];
    for &l in labels {
        counts[l] += 1;
    }
    for (k, &count) in counts.iter().enumerate() {
        if count < required {
            return Err(Error::DegenerateClass {
                class: class_names[k].clone(),
                count,
                required,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub mean: DVector<f64>,
    /// `d × (c-1)` matrix of unit-norm projection directions.
    pub basis: DMatrix<f64>,
    pub ridge: f64,
}

/// Class-indicator responses orthogonalized against the constant vector and
/// each other in class-index order; returns an `n × (c-1)` matrix.
pub fn sr_responses(labels: &[usize], num_classes: usize) -> DMatrix<f64> {
    let n = labels.len();
    let mut kept: Vec<DVector<f64>> = vec![DVector::from_element(n, 1.0 / (n as f64).sqrt())];
    for k in 0..num_classes {
        if kept.len() == num_classes {
            break;
        }
        let mut v = DVector::from_iterator(n, labels.iter().map(|&l| if l == k { 1.0 } else { 0.0 }));
        for u in &kept {
            let proj = u.dot(&v);
            v.axpy(-proj, u, 1.0);
        }
        let norm = v.norm();
        if norm > RESPONSE_NORM_FLOOR {
            kept.push(v / norm);
        }
    }
    let responses = &kept[1..];
    DMatrix::from_columns(responses)
}

pub fn fit_sr(data: &LabeledDataset, ridge: f64) -> Result<ProjectionModel> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::Config(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    data.require_per_class(2)?;
    let x = data.features();
    let (n, d) = x.shape();
    let c = data.num_classes();

    let mean = DVector::from_iterator(d, x.column_iter().map(|col| col.sum() / n as f64));
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }

    let responses = sr_responses(data.labels(), c);
    let basis = solve_sr(&centered, &responses, ridge)?;
    Ok(ProjectionModel { mean, basis, ridge })
}

/// Ridge regression of each response on the centered features, followed by
/// column normalization and the sign convention (first nonzero entry positive).
pub(crate) fn solve_sr(centered: &DMatrix<f64>, responses: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let (n, d) = centered.shape();
    let singular = || {
        Error::SingularSystem(format!(
            "regularized normal equations are singular (ridge {ridge}, n {n}, d {d})"
        ))
    };
    // (XᵀX + αI)⁻¹XᵀY = Xᵀ(XXᵀ + αI)⁻¹Y; solve whichever system is smaller.
    let mut basis = if d <= n {
        let mut gram = linalg::gram_cols(centered);
        add_ridge(&mut gram, ridge);
        let rhs = centered.tr_mul(responses);
        linalg::cholesky(gram).ok_or_else(singular)?.solve(&rhs)
    } else {
        let mut gram = linalg::gram_rows(centered);
        add_ridge(&mut gram, ridge);
        let dual = linalg::cholesky(gram).ok_or_else(singular)?.solve(responses);
        centered.tr_mul(&dual)
    };

    for mut col in basis.column_iter_mut() {
        let norm = col.norm();
        if !(norm > 0.0) {
            return Err(singular());
        }
        col /= norm;
        if let Some(first) = col.iter().find(|v| **v != 0.0) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(basis)
}

fn add_ridge(gram: &mut DMatrix<f64>, ridge: f64) {
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
}

impl ProjectionModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `basisᵀ (v - mean)`
    pub fn project(&self, v: &[f64]) -> Result<DVector<f64>> {
        let d = self.input_dim();
        if v.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: v.len(),
            });
        }
        let p = self.output_dim();
        let mut out = DVector::zeros(p);
        for (k, col) in self.basis.column_iter().enumerate() {
            let mut acc = 0.0;
            for ((&x, &m), &b) in v.iter().zip(self.mean.iter()).zip(col.iter()) {
                acc += (x - m) * b;
            }
            out[k] = acc;
        }
        Ok(out)
    }

    /// Row-wise [`ProjectionModel::project`] of an `n × d` matrix into `n × (c-1)`.
    pub fn project_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(x.nrows(), self.output_dim());
        let mut row = vec![0.0; x.ncols()];
        for i in 0..x.nrows() {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = x[(i, j)];
            }
            let p = self.project(&row)?;
            out.row_mut(i).copy_from(&p.transpose());
        }
        Ok(out)
    }
}

pub fn project(model: &ProjectionModel, v: &[f64]) -> Result<DVector<f64>> {
    model.project(v)
}
