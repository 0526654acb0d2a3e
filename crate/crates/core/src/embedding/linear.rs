use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{EmbeddingMethod, EmbeddingModel};
use crate::datamodel::{Dataset, Split};
use crate::error::{Error, Result};

/// Fits a linear projection keeping the fewest leading components whose
/// cumulative explained-variance ratio reaches `variance_target`.
///
/// PCA and SVD are fitted on every row of the dataset (PCA on centered data,
/// SVD on the raw matrix). LDA is fitted on the training rows with their
/// labels (σ-buckets for regression) and keeps at most `classes − 1`
/// discriminant directions, orthonormalized.
pub fn fit_linear(
    dataset: &Dataset,
    method: EmbeddingMethod,
    variance_target: f64,
) -> Result<EmbeddingModel> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "variance target {variance_target} not in (0, 1]"
        )));
    }
    if dataset.n_rows() < 2 {
        return Err(Error::InvalidInput("at least two rows are required".into()));
    }
    match method {
        EmbeddingMethod::Pca => {
            let x = dataset.features().view();
            let center = x.mean_axis(Axis(0)).expect("non-empty");
            fit_svd(x, center, EmbeddingMethod::Pca, variance_target)
        }
        EmbeddingMethod::Svd => {
            let x = dataset.features().view();
            let center = Array1::zeros(x.ncols());
            fit_svd(x, center, EmbeddingMethod::Svd, variance_target)
        }
        EmbeddingMethod::Lda => fit_lda(dataset, variance_target),
        other => Err(Error::InvalidInput(format!("{other} is not a linear method"))),
    }
}

fn to_dmatrix(x: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

/// Smallest prefix of `ratios` whose sum reaches `target`; `None` if the
/// whole slice falls short.
fn kept_count(ratios: &[f64], target: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        acc += r;
        if acc >= target {
            return Some(i + 1);
        }
    }
    None
}

/// Flips each row so that its largest-magnitude entry is positive.
pub(crate) fn normalize_signs(components: &mut Array2<f64>) {
    for mut row in components.rows_mut() {
        let mut best = 0.0f64;
        for &v in row.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
}

fn fit_svd(
    x: ArrayView2<'_, f64>,
    center: Array1<f64>,
    method: EmbeddingMethod,
    variance_target: f64,
) -> Result<EmbeddingModel> {
    let centered = &x - &center;
    let svd = to_dmatrix(centered.view()).svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let s_max = order
        .first()
        .map(|&i| svd.singular_values[i])
        .unwrap_or(0.0);
    let tol = s_max * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    let nonzero: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    if nonzero.is_empty() {
        return Err(Error::InvalidInput(
            "data has zero variance; nothing to project".into(),
        ));
    }
    let energy: Vec<f64> = nonzero
        .iter()
        .map(|&i| svd.singular_values[i].powi(2))
        .collect();
    let total: f64 = energy.iter().sum();
    let ratios: Vec<f64> = energy.iter().map(|e| e / total).collect();

    let (keep, target_unreached) = match kept_count(&ratios, variance_target) {
        Some(m) => (m, false),
        None => (ratios.len(), true),
    };
    let mut components = Array2::from_shape_fn((keep, x.ncols()), |(r, c)| v_t[(nonzero[r], c)]);
    normalize_signs(&mut components);
    Ok(EmbeddingModel {
        method,
        components,
        center,
        out_dim: keep,
        explained_variance_ratio: ratios[..keep].to_vec(),
        target_unreached,
    })
}

fn fit_lda(dataset: &Dataset, variance_target: f64) -> Result<EmbeddingModel> {
    let (labels, _) = dataset.categorical_labels()?;
    let train = dataset.rows_in(Split::Train);
    let x = dataset.select_rows(&train);
    let y: Vec<usize> = train.iter().map(|&r| labels[r]).collect();
    let d = x.ncols();

    let mut classes: Vec<usize> = y.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidInput(
            "lda requires at least two classes among the training rows".into(),
        ));
    }

    let mean = x.mean_axis(Axis(0)).expect("train split is non-empty");
    let mut within = Array2::<f64>::zeros((d, d));
    let mut between = Array2::<f64>::zeros((d, d));
    for &c in &classes {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        let xc = x.select(Axis(0), &members);
        let mc = xc.mean_axis(Axis(0)).expect("class is non-empty");
        let dev = &xc - &mc;
        within = within + dev.t().dot(&dev);
        let diff = (&mc - &mean).insert_axis(Axis(1));
        between = between + diff.dot(&diff.t()) * members.len() as f64;
    }

    let trace: f64 = within.diag().sum();
    let ridge = if trace > 0.0 { 1e-6 * trace / d as f64 } else { 1e-6 };
    for i in 0..d {
        within[[i, i]] += ridge;
    }

    // Whiten the within-class scatter, then diagonalize the whitened
    // between-class scatter.
    let sw = SymmetricEigen::new(to_dmatrix(within.view()));
    let whiten = DMatrix::from_fn(d, d, |i, j| {
        sw.eigenvectors[(i, j)] / sw.eigenvalues[j].max(ridge).sqrt()
    });
    let sb = to_dmatrix(between.view());
    let mut m = whiten.transpose() * sb * &whiten;
    m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let g_max = eig.eigenvalues[order[0]].max(0.0);
    let tol = g_max * d as f64 * f64::EPSILON;
    let cap = classes.len() - 1;
    let kept_dirs: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > tol)
        .take(cap)
        .collect();
    if kept_dirs.is_empty() {
        return Err(Error::InvalidInput(
            "class means coincide; no discriminant direction".into(),
        ));
    }
    let total: f64 = kept_dirs.iter().map(|&i| eig.eigenvalues[i]).sum();
    let ratios: Vec<f64> = kept_dirs.iter().map(|&i| eig.eigenvalues[i] / total).collect();
    let (keep, target_unreached) = match kept_count(&ratios, variance_target) {
        Some(m) => (m, false),
        None => (ratios.len(), true),
    };

    let mut components = Array2::<f64>::zeros((keep, d));
    for (r, &i) in kept_dirs[..keep].iter().enumerate() {
        let dir = &whiten * eig.eigenvectors.column(i);
        for c in 0..d {
            components[[r, c]] = dir[c];
        }
    }
    gram_schmidt(&mut components)?;
    normalize_signs(&mut components);

    Ok(EmbeddingModel {
        method: EmbeddingMethod::Lda,
        components,
        center: mean,
        out_dim: keep,
        explained_variance_ratio: ratios[..keep].to_vec(),
        target_unreached,
    })
}

/// Orthonormalizes rows in order (modified Gram–Schmidt, two passes).
fn gram_schmidt(rows: &mut Array2<f64>) -> Result<()> {
    for i in 0..rows.nrows() {
        for _ in 0..2 {
            for j in 0..i {
                let proj = rows.row(i).dot(&rows.row(j));
                let prev = rows.row(j).to_owned();
                rows.row_mut(i).scaled_add(-proj, &prev);
            }
        }
        let norm = rows.row(i).dot(&rows.row(i)).sqrt();
        if !(norm > 1e-12) {
            return Err(Error::InvalidInput(
                "discriminant directions are linearly dependent".into(),
            ));
        }
        rows.row_mut(i).mapv_inplace(|v| v / norm);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Labels, Task};
    use crate::embedding::transform;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unsupervised(x: Array2<f64>) -> Dataset {
        let n = x.nrows();
        let split = (0..n)
            .map(|i| if i + 1 == n { Split::Test } else { Split::Train })
            .collect();
        Dataset::new(x, Labels::Categorical(vec![0; n]), split, Task::Classification, Some(1))
            .unwrap()
    }

    /// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
    fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
        let n = a.nrows();
        let mut a = a.clone();
        let mut v = Array2::<f64>::eye(n);
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[[k, p]];
                        let akq = a[[k, q]];
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[[p, k]];
                        let aqk = a[[q, k]];
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[[k, p]];
                        let vkq = v[[k, q]];
                        v[[k, p]] = c * vkp - s * vkq;
                        v[[k, q]] = s * vkp + c * vkq;
                    }
                }
            }
        }
        ((0..n).map(|i| a[[i, i]]).collect(), v)
    }

    #[test]
    fn pca_matches_jacobi_eigenvectors_of_covariance() {
        let x = array![
            [2.0, 0.5, -1.0],
            [0.3, 1.7, 2.2],
            [-1.1, 0.4, 0.9],
            [3.3, -2.0, 0.1],
            [0.8, 0.6, -0.7]
        ];
        let model = fit_linear(&unsupervised(x.clone()), EmbeddingMethod::Pca, 1.0).unwrap();

        let mean = x.mean_axis(Axis(0)).unwrap();
        let c = &x - &mean;
        let cov = c.t().dot(&c) / 4.0;
        let (vals, vecs) = jacobi_eigen(&cov);
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

        assert_eq!(model.out_dim, 3);
        let total: f64 = vals.iter().sum();
        for (r, &i) in order.iter().enumerate() {
            let oracle = vecs.column(i);
            let got = model.components.row(r);
            let same = (0..3).all(|k| (got[k] - oracle[k]).abs() < 1e-8);
            let flipped = (0..3).all(|k| (got[k] + oracle[k]).abs() < 1e-8);
            assert!(same || flipped, "component {r}: {got} vs {oracle}");
            assert!((model.explained_variance_ratio[r] - vals[i] / total).abs() < 1e-10);
        }
    }

    #[test]
    fn two_equal_axes_give_two_components() {
        let x = array![
            [1.0, 0.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0]
        ];
        let m = fit_linear(&unsupervised(x), EmbeddingMethod::Pca, 0.9).unwrap();
        assert_eq!(m.out_dim, 2);
        for r in &m.explained_variance_ratio {
            assert!((r - 0.5).abs() < 1e-12);
        }
        assert!(!m.target_unreached);
    }

    #[test]
    fn largest_entry_of_each_component_is_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((30, 6), |_| rng.random_range(-1.0..1.0));
        for method in [EmbeddingMethod::Pca, EmbeddingMethod::Svd] {
            let m = fit_linear(&unsupervised(x.clone()), method, 0.9).unwrap();
            for row in m.components.rows() {
                let big = row.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
                assert!(big > 0.0);
            }
        }
    }

    #[test]
    fn svd_does_not_center() {
        let x = array![[10.0, 10.0], [11.0, 10.0], [10.0, 11.0], [11.0, 11.0]];
        let m = fit_linear(&unsupervised(x), EmbeddingMethod::Svd, 0.9).unwrap();
        assert!(m.center.iter().all(|&v| v == 0.0));
        // The mean direction dominates an uncentered factorization.
        let first = m.components.row(0);
        assert!((first[0] - first[1]).abs() < 1e-9);
    }

    #[test]
    fn reconstruction_error_is_within_the_dropped_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let latent = Array2::from_shape_fn((60, 3), |_| rng.random_range(-3.0..3.0));
        let mix = Array2::from_shape_fn((3, 8), |_| rng.random_range(-1.0..1.0));
        let noise = Array2::from_shape_fn((60, 8), |_| rng.random_range(-0.2..0.2));
        let x = latent.dot(&mix) + noise;
        let d = unsupervised(x.clone());
        let m = fit_linear(&d, EmbeddingMethod::Pca, 0.9).unwrap();
        let z = transform(&m, x.view()).unwrap();
        let back = m.inverse_transform(z.matrix.view()).unwrap();
        let err: f64 = (&x - &back).mapv(|v| v * v).sum();
        let mean = x.mean_axis(Axis(0)).unwrap();
        let total: f64 = (&x - &mean).mapv(|v| v * v).sum();
        assert!(err <= 0.1 * total, "{err} > 0.1 * {total}");
    }

    #[test]
    fn constant_data_is_rejected() {
        let x = Array2::from_elem((5, 3), 2.0);
        assert!(fit_linear(&unsupervised(x), EmbeddingMethod::Pca, 0.9).is_err());
    }

    fn three_class_lda() -> (Dataset, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 90;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let x = Array2::from_shape_fn((n, 5), |(i, j)| {
            let shift = if j == labels[i] { 4.0 } else { 0.0 };
            shift + rng.random_range(-1.0..1.0)
        });
        let split = (0..n)
            .map(|i| if i < 60 { Split::Train } else { Split::Test })
            .collect();
        let d = Dataset::new(x.clone(), Labels::Categorical(labels), split, Task::Classification, Some(3))
            .unwrap();
        (d, x)
    }

    #[test]
    fn lda_is_capped_and_orthonormal() {
        let (d, _) = three_class_lda();
        let m = fit_linear(&d, EmbeddingMethod::Lda, 1.0).unwrap();
        assert!(m.out_dim <= 2);
        let gram = m.components.dot(&m.components.t());
        for i in 0..m.out_dim {
            for j in 0..m.out_dim {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lda_separates_classes() {
        let (d, x) = three_class_lda();
        let m = fit_linear(&d, EmbeddingMethod::Lda, 1.0).unwrap();
        let z = transform(&m, x.view()).unwrap().matrix;
        let (labels, _) = d.categorical_labels().unwrap();
        // nearest class mean in the projection recovers the label
        let mut means = Array2::<f64>::zeros((3, m.out_dim));
        for c in 0..3 {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            means.row_mut(c).assign(&z.select(Axis(0), &rows).mean_axis(Axis(0)).unwrap());
        }
        let correct = (0..labels.len())
            .filter(|&i| {
                let best = (0..3)
                    .min_by(|&a, &b| {
                        let da = (&z.row(i) - &means.row(a)).mapv(|v| v * v).sum();
                        let db = (&z.row(i) - &means.row(b)).mapv(|v| v * v).sum();
                        da.total_cmp(&db)
                    })
                    .unwrap();
                best == labels[i]
            })
            .count();
        assert!(correct as f64 / labels.len() as f64 > 0.95);
    }

    #[test]
    fn lda_needs_two_classes() {
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64);
        assert!(fit_linear(&unsupervised(x), EmbeddingMethod::Lda, 0.9).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pca_kept_components_are_minimal(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((40, 10), |_| rng.random_range(-1.0..1.0));
            let m = fit_linear(&unsupervised(x), EmbeddingMethod::Pca, 0.9).unwrap();
            let total: f64 = m.explained_variance_ratio.iter().sum();
            prop_assert!(total >= 0.9);
            prop_assert!(total - m.explained_variance_ratio[m.out_dim - 1] < 0.9);
        }

        #[test]
        fn transform_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((20, 4), |_| rng.random_range(-1.0..1.0));
            let m = fit_linear(&unsupervised(x.clone()), EmbeddingMethod::Pca, 0.95).unwrap();
            let u = x.row(0).insert_axis(Axis(0)).to_owned();
            let v = x.row(1).insert_axis(Axis(0)).to_owned();
            let c = m.center.clone().insert_axis(Axis(0));
            // affine correction: T(au + bv) = aT(u) + bT(v) + (a + b − 1)·T'(c) where T'(c) = c·Cᵀ
            let lhs = transform(&m, (&u * a + &v * b).view()).unwrap().matrix;
            let rhs = transform(&m, u.view()).unwrap().matrix * a
                + transform(&m, v.view()).unwrap().matrix * b
                - c.dot(&m.components.t()) * (1.0 - a - b);
            for (l, r) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((l - r).abs() < 1e-9);
            }
        }
    }
}
