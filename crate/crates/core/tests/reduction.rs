use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wst_core::reduction::{sr_responses, DEFAULT_RIDGE};
use wst_core::{fit_sr, Error, LabeledDataset};

fn names(c: usize) -> Vec<String> {
    (0..c).map(|k| format!("c{k}")).collect()
}

/// Gaussian clouds with per-class means and a shared, axis-mixing covariance.
fn clouds(means: &[Vec<f64>], per_class: usize, mix: &DMatrix<f64>, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = means[0].len();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, mu) in means.iter().enumerate() {
        for _ in 0..per_class {
            let z = DVector::from_fn(d, |_, _| normal.sample(&mut rng));
            let x = mix * z;
            rows.push((0..d).map(|j| mu[j] + x[j]).collect());
            labels.push(k);
        }
    }
    LabeledDataset::from_rows(&rows, labels, names(means.len())).unwrap()
}

fn class_means(x: &DMatrix<f64>, labels: &[usize], c: usize) -> Vec<DVector<f64>> {
    let d = x.ncols();
    let mut out = vec![DVector::zeros(d); c];
    let mut counts = vec![0.0; c];
    for (i, &l) in labels.iter().enumerate() {
        out[l] += x.row(i).transpose();
        counts[l] += 1.0;
    }
    for (m, n) in out.iter_mut().zip(counts) {
        *m /= n;
    }
    out
}

fn within_scatter(x: &DMatrix<f64>, labels: &[usize], c: usize) -> DMatrix<f64> {
    let means = class_means(x, labels, c);
    let d = x.ncols();
    let mut s = DMatrix::zeros(d, d);
    for (i, &l) in labels.iter().enumerate() {
        let diff = x.row(i).transpose() - &means[l];
        s += &diff * diff.transpose();
    }
    s
}

#[test]
fn two_class_direction_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 1e-2).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..1000 {
        let class = i % 2;
        let mut row: Vec<f64> = (0..6).map(|_| noise.sample(&mut rng)).collect();
        row[0] += if class == 0 { -3.0 } else { 3.0 };
        rows.push(row);
        labels.push(class);
    }
    let ds = LabeledDataset::from_rows(&rows, labels.clone(), names(2)).unwrap();
    let model = fit_sr(&ds, DEFAULT_RIDGE).unwrap();
    assert_eq!(model.basis.ncols(), 1);
    let w = model.basis.column(0).into_owned();

    let sw = within_scatter(ds.features(), &labels, 2);
    let means = class_means(ds.features(), &labels, 2);
    let oracle = sw.try_inverse().unwrap() * (&means[1] - &means[0]);
    let cos = w.dot(&oracle).abs() / (w.norm() * oracle.norm());
    assert!(cos >= 0.99, "cos {cos}");
    assert!(w[0].abs() >= 0.99);
}

#[test]
fn basis_shape_and_centering() {
    let c = 12;
    let means: Vec<Vec<f64>> = (0..c)
        .map(|k| (0..20).map(|j| if j % c == k { 3.0 } else { 0.0 }).collect())
        .collect();
    let mix = DMatrix::identity(20, 20);
    let ds = clouds(&means, 8, &mix, 1);
    let model = fit_sr(&ds, DEFAULT_RIDGE).unwrap();
    assert_eq!(model.basis.shape(), (20, 11));
    for col in model.basis.column_iter() {
        assert!((col.norm() - 1.0).abs() <= 1e-9);
    }
    let mean: Vec<f64> = model.mean.iter().copied().collect();
    assert!(model.project(&mean).unwrap().norm() <= 1e-9);
    assert!(matches!(model.project(&[0.0; 3]), Err(Error::LengthMismatch { .. })));
}

#[test]
fn wide_data_uses_same_contract() {
    let c = 3;
    let d = 200;
    let means: Vec<Vec<f64>> = (0..c)
        .map(|k| (0..d).map(|j| if j % c == k { 1.0 } else { 0.0 }).collect())
        .collect();
    let ds = clouds(&means, 10, &DMatrix::identity(d, d), 2);
    let model = fit_sr(&ds, DEFAULT_RIDGE).unwrap();
    assert_eq!(model.basis.shape(), (d, 2));
    let projected = model.project_rows(ds.features()).unwrap();
    let centered_sum: f64 = projected.row_sum().iter().map(|v| v.abs()).sum();
    assert!(centered_sum < 1e-8);
}

#[test]
fn responses_are_orthonormal_and_centered() {
    let labels = vec![0, 0, 1, 1, 1, 2, 2, 2, 2, 3, 3];
    let y = sr_responses(&labels, 4);
    assert_eq!(y.shape(), (11, 3));
    let gram = y.transpose() * &y;
    assert!((gram - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    for col in y.column_iter() {
        assert!(col.sum().abs() < 1e-12);
    }
}

/// Discriminant subspace from the generalized eigenproblem `Sb v = λ Sw v`.
fn lda_subspace(x: &DMatrix<f64>, labels: &[usize], c: usize) -> DMatrix<f64> {
    let d = x.ncols();
    let sw = within_scatter(x, labels, c);
    let means = class_means(x, labels, c);
    let overall = DVector::from_fn(d, |j, _| x.column(j).mean());
    let mut sb = DMatrix::zeros(d, d);
    for (k, m) in means.iter().enumerate() {
        let nk = labels.iter().filter(|&&l| l == k).count() as f64;
        let diff = m - &overall;
        sb += nk * &diff * diff.transpose();
    }
    let l = sw.cholesky().unwrap().l();
    let l_inv = l.clone().try_inverse().unwrap();
    let m = &l_inv * sb * l_inv.transpose();
    let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let u = DMatrix::from_fn(d, c - 1, |i, j| eig.eigenvectors[(i, order[j])]);
    l_inv.transpose() * u
}

/// Pairwise Mahalanobis distances between projected class centroids under
/// the projected pooled covariance. Invariant to any invertible change of
/// basis within the subspace.
fn centroid_geometry(x: &DMatrix<f64>, labels: &[usize], c: usize, basis: &DMatrix<f64>) -> Vec<f64> {
    let p = x * basis;
    let sw = within_scatter(&p, labels, c) / (labels.len() - c) as f64;
    let prec = sw.try_inverse().unwrap();
    let means = class_means(&p, labels, c);
    let mut out = Vec::new();
    for a in 0..c {
        for b in (a + 1)..c {
            let diff = &means[a] - &means[b];
            out.push((diff.transpose() * &prec * &diff)[(0, 0)].sqrt());
        }
    }
    out
}

#[test]
fn subspace_geometry_matches_generalized_eigen_lda() {
    let c = 4;
    let d = 6;
    let means: Vec<Vec<f64>> = vec![
        vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![2.0, 0.5, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 2.5, 1.0, 0.0, 0.0, 0.0],
        vec![1.0, 1.0, 0.0, 2.0, 0.0, 0.0],
    ];
    let mix = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.3 / (1.0 + (i + j) as f64) });
    let ds = clouds(&means, 50, &mix, 9);
    let sr = fit_sr(&ds, 1e-6).unwrap();
    let oracle = lda_subspace(ds.features(), ds.labels(), c);
    let got = centroid_geometry(ds.features(), ds.labels(), c, &sr.basis);
    let want = centroid_geometry(ds.features(), ds.labels(), c, &oracle);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() / w <= 0.05, "{g} vs {w}");
    }
}

#[test]
fn degenerate_inputs() {
    let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
    assert!(matches!(
        LabeledDataset::from_rows(&rows, vec![0, 0, 1], names(2)),
        Err(Error::DegenerateClass { .. })
    ));
    let rows = vec![vec![1.0, 1.0]; 4];
    let ds = LabeledDataset::from_rows(&rows, vec![0, 0, 1, 1], names(2)).unwrap();
    assert!(matches!(fit_sr(&ds, 0.0), Err(Error::SingularSystem(_))));
    // No direction carries any variance, so no unit-norm basis exists.
    assert!(matches!(fit_sr(&ds, DEFAULT_RIDGE), Err(Error::SingularSystem(_))));
    assert!(LabeledDataset::from_rows(
        &[vec![f64::NAN], vec![0.0], vec![1.0], vec![2.0]],
        vec![0, 0, 1, 1],
        names(2)
    )
    .is_err());
}
