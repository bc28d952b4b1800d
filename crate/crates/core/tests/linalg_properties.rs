use epgpr::gpr::{Hyperparameters, KernelKind};
use epgpr::linalg::{cholesky_spd, eigendecompose, symmetric_eigenvalues, ComplexMatrix};
use epgpr::Complex64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn complex_matrix(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * dim * dim).prop_map(move |v| {
        let entries: Vec<Complex64> = v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        ComplexMatrix::from_row_slice(dim, &entries).unwrap()
    })
}

fn real_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

/// Largest distance after greedily pairing each value with its nearest unused partner.
fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) =
            b.iter().enumerate().filter(|(j, _)| !used[*j]).map(|(j, y)| (j, (x - y).norm())).min_by(|p, q| p.1.total_cmp(&q.1)).unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn min_separation(v: &[Complex64]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            m = m.min((v[i] - v[j]).norm());
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_survive_basis_permutation(m in (2usize..9).prop_flat_map(complex_matrix), seed in any::<u64>()) {
        let n = m.dim();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let mut p = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                p.set(i, j, m.get(perm[i], perm[j]));
            }
        }
        let a = eigendecompose(&m, false).unwrap().eigenvalues;
        let b = eigendecompose(&p, false).unwrap().eigenvalues;
        prop_assume!(min_separation(&a) > 1e-3);
        prop_assert!(multiset_distance(&a, &b) <= 1e-10 * m.frobenius_norm().max(1.0));
    }

    #[test]
    fn eigenvalue_sum_is_trace(m in (2usize..12).prop_flat_map(complex_matrix)) {
        let d = eigendecompose(&m, false).unwrap();
        let sum: Complex64 = d.eigenvalues.iter().sum();
        prop_assert_eq!(d.eigenvalues.len(), m.dim());
        prop_assert!((sum - m.trace()).norm() <= 1e-10 * m.frobenius_norm().max(1.0));
    }

    #[test]
    fn eigenvector_residual_contract(m in (2usize..10).prop_flat_map(complex_matrix)) {
        let d = eigendecompose(&m, true).unwrap();
        prop_assert!(d.residual_norm <= 1e-10 * m.frobenius_norm());
        let v = d.eigenvectors.unwrap();
        let a = m.as_matrix();
        for (j, lambda) in d.eigenvalues.iter().enumerate() {
            let col = v.column(j).into_owned();
            let r = (a * &col - col.map(|z| z * lambda)).norm() / col.norm();
            prop_assert!(r <= 1e-10 * m.frobenius_norm());
        }
    }

    #[test]
    fn cholesky_reconstructs_spd_input(g in (2usize..8).prop_flat_map(|n| real_matrix(n + 2, n))) {
        let n = g.ncols();
        let a = g.transpose() * &g + DMatrix::<f64>::identity(n, n) * 1e-3;
        let l = cholesky_spd(&a, 0.0).unwrap();
        let err = (&l * l.transpose() - &a).amax();
        prop_assert!(err <= 1e-12 * a.amax());
        for i in 0..n {
            for j in i + 1..n {
                prop_assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn gram_of_any_factor_is_psd(l in (1usize..10).prop_flat_map(|n| real_matrix(n, n))) {
        let a = &l * l.transpose();
        let ev = symmetric_eigenvalues(&a).unwrap();
        prop_assert!(ev.iter().all(|&e| e >= -1e-12));
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        let sum: f64 = ev.iter().sum();
        prop_assert!((sum - a.trace()).abs() <= 1e-10 * a.trace().abs().max(1.0));
    }
}

#[test]
fn matern_gram_on_unit_circle_is_positive() {
    let h = Hyperparameters { signal_variance: 1.0, length_scales: [0.7, 0.7], noise_variance: 0.0, kernel: KernelKind::Matern52 };
    let pts: Vec<[f64; 2]> = (0..10)
        .map(|i| {
            let phi = std::f64::consts::TAU * i as f64 / 10.0;
            [phi.cos(), phi.sin()]
        })
        .collect();
    let k = DMatrix::from_fn(10, 10, |i, j| h.covariance(&pts[i], &pts[j]));
    let ev = symmetric_eigenvalues(&k).unwrap();
    assert!(ev[0] > 0.0, "{ev:?}");
}

#[test]
fn symmetric_eigenvalues_of_identity() {
    assert_eq!(symmetric_eigenvalues(&DMatrix::identity(4, 4)).unwrap(), vec![1.0; 4]);
}
