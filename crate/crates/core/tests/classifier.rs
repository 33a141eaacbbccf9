use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wst_core::classifier::DEFAULT_SHRINKAGE;
use wst_core::{fit_lda, LabeledDataset};

fn names(c: usize) -> Vec<String> {
    (0..c).map(|k| format!("c{k}")).collect()
}

fn gaussians(means: &[[f64; 2]], per_class: usize, sigma: f64, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, m) in means.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(vec![m[0] + n.sample(&mut rng), m[1] + n.sample(&mut rng)]);
            labels.push(k);
        }
    }
    LabeledDataset::from_rows(&rows, labels, names(means.len())).unwrap()
}

/// Bayes discriminant of a shared-covariance Gaussian model, written out densely.
fn oracle_scores(ds: &LabeledDataset, shrinkage: f64, v: &[f64]) -> Vec<f64> {
    let x = ds.features();
    let (n, p) = x.shape();
    let c = ds.num_classes();
    let mut means = vec![DVector::<f64>::zeros(p); c];
    let mut counts = vec![0usize; c];
    for i in 0..n {
        means[ds.labels()[i]] += x.row(i).transpose();
        counts[ds.labels()[i]] += 1;
    }
    for k in 0..c {
        means[k] /= counts[k] as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        let d = x.row(i).transpose() - &means[ds.labels()[i]];
        cov += &d * d.transpose();
    }
    cov /= (n - c) as f64;
    let nu = cov.trace() / p as f64;
    let cov = cov * (1.0 - shrinkage) + DMatrix::identity(p, p) * (shrinkage * nu);
    let prec = cov.try_inverse().unwrap();
    let v = DVector::from_column_slice(v);
    (0..c)
        .map(|k| {
            let a = &prec * &means[k];
            v.dot(&a) - 0.5 * means[k].dot(&a) + (counts[k] as f64 / n as f64).ln()
        })
        .collect()
}

#[test]
fn scores_match_dense_oracle() {
    let ds = gaussians(&[[0.0, 0.0], [2.0, 1.0], [-1.0, 3.0]], 40, 1.0, 4);
    for shrink in [0.0, DEFAULT_SHRINKAGE, 0.3] {
        let model = fit_lda(&ds, shrink).unwrap();
        for probe in [[0.0, 0.0], [1.5, -2.0], [10.0, 4.0]] {
            let got = model.scores(&probe).unwrap();
            let want = oracle_scores(&ds, shrink, &probe);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-9, "{g} vs {w}");
            }
        }
    }
}

#[test]
fn six_sigma_holdout() {
    let sigma = 1.0;
    let r = 6.0 * sigma / 3f64.sqrt();
    let means: Vec<[f64; 2]> = (0..3)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let train = gaussians(&means, 200, sigma, 10);
    let test = gaussians(&means, 200, sigma, 11);
    let model = fit_lda(&train, DEFAULT_SHRINKAGE).unwrap();
    let correct = (0..test.num_samples())
        .filter(|&i| {
            let row: Vec<f64> = test.row(i).iter().copied().collect();
            model.predict(&row).unwrap().class_index == test.labels()[i]
        })
        .count();
    assert!(correct as f64 / 600.0 >= 0.99, "{correct}/600");
}

#[test]
fn shared_translation_leaves_argmax_unchanged() {
    let ds = gaussians(&[[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]], 30, 1.0, 5);
    let shift = [7.5, -4.25];
    let rows: Vec<Vec<f64>> = (0..ds.num_samples())
        .map(|i| vec![ds.row(i)[0] + shift[0], ds.row(i)[1] + shift[1]])
        .collect();
    let shifted = LabeledDataset::from_rows(&rows, ds.labels().to_vec(), names(3)).unwrap();
    let a = fit_lda(&ds, DEFAULT_SHRINKAGE).unwrap();
    let b = fit_lda(&shifted, DEFAULT_SHRINKAGE).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = Normal::new(1.0, 3.0).unwrap();
    for _ in 0..200 {
        let v = [u.sample(&mut rng), u.sample(&mut rng)];
        let w = [v[0] + shift[0], v[1] + shift[1]];
        assert_eq!(a.predict(&v).unwrap().class_index, b.predict(&w).unwrap().class_index);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posteriors_form_a_distribution(seed in any::<u64>(), x in -50.0f64..50.0, y in -50.0f64..50.0) {
        let ds = gaussians(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]], 10, 0.7, seed);
        let model = fit_lda(&ds, DEFAULT_SHRINKAGE).unwrap();
        let p = model.predict(&[x, y]).unwrap();
        let total: f64 = p.posteriors.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert!(p.posteriors.iter().all(|&q| (0.0..=1.0).contains(&q)));
        let best = p.posteriors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(p.posteriors[p.class_index], best);
    }
}
