use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use irls_core::eval::{affinity_from_z, clustering_accuracy, spectral_cluster};
use irls_core::io::{read_binary, read_csv, write_binary, write_csv};
use irls_core::linalg::{solve_sylvester, sylvester_residual, sym_matrix_power};
use irls_core::lrr::{irls_step, lrr_gradient, stationarity_residual, update_weights};
use irls_core::norms::{lrr_objective, PenaltyFamily};
use irls_core::synth::{gen_subspaces, SubspaceParams};
use irls_core::DenseMatrix;

fn gaussian(seed: u64, rows: usize, cols: usize) -> DenseMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(64)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn affinity_is_symmetric_and_nonnegative(seed in any::<u64>(), n in 1usize..12) {
        let w = affinity_from_z(&gaussian(seed, n, n)).unwrap();
        prop_assert_eq!(&w, &w.transpose());
        prop_assert!(w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn accuracy_ignores_label_names(
        truth in proptest::collection::vec(0usize..4, 1..40),
        noise in proptest::collection::vec(0usize..4, 40),
        perm in Just([2usize, 0, 3, 1]).prop_shuffle(),
    ) {
        let pred: Vec<usize> = truth.iter().zip(&noise).map(|(&t, &n)| if n == 0 { (t + 1) % 4 } else { t }).collect();
        let base = clustering_accuracy(&pred, &truth).unwrap();
        let renamed: Vec<usize> = pred.iter().map(|&l| perm[l] + 10).collect();
        let renamed_truth: Vec<usize> = truth.iter().map(|&l| perm[l]).collect();
        prop_assert_eq!(base, clustering_accuracy(&renamed, &truth).unwrap());
        prop_assert_eq!(base, clustering_accuracy(&pred, &renamed_truth).unwrap());
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn matrix_files_round_trip_exactly(
        rows in 0usize..6,
        cols in 0usize..6,
        values in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO | proptest::num::f64::SUBNORMAL, 36),
    ) {
        let m = DenseMatrix::from_fn(rows, cols, |i, j| values[i * 6 + j]);
        let mut text = Vec::new();
        write_csv(&mut text, &m).unwrap();
        let back = read_csv(&text[..]).unwrap();
        prop_assert!(back.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut bin = Vec::new();
        write_binary(&mut bin, &m).unwrap();
        let back = read_binary(&bin[..]).unwrap();
        prop_assert!(back.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn matrix_powers_compose(seed in any::<u64>(), n in 1usize..8, a in -1.5f64..1.5, b in -1.5f64..1.5) {
        let g = gaussian(seed, n, n);
        let s = &g * g.transpose() + DenseMatrix::identity(n, n);
        let lhs = sym_matrix_power(&s, 0.0, a).unwrap() * sym_matrix_power(&s, 0.0, b).unwrap();
        let rhs = sym_matrix_power(&s, 0.0, a + b).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-8 * rhs.norm().max(1.0));
    }

    #[test]
    fn sylvester_meets_residual_bound(seed in any::<u64>(), m in 1usize..15, n in 1usize..15) {
        let a = gaussian(seed, m, m) + DenseMatrix::identity(m, m) * (2.0 * m as f64).sqrt() * 2.0;
        let b = gaussian(seed ^ 1, n, n) + DenseMatrix::identity(n, n) * (2.0 * n as f64).sqrt() * 2.0;
        let c = gaussian(seed ^ 2, m, n);
        let z = solve_sylvester(&a, &b, &c).unwrap();
        prop_assert!(sylvester_residual(&a, &b, &c, &z) <= 1e-8 * (a.norm() + b.norm()) * z.norm() + 1e-12);
    }

    #[test]
    fn smoothing_majorizes_with_bounded_gap(
        seed in any::<u64>(),
        d in 1usize..6,
        n in 1usize..6,
        p in 0.1f64..=1.0,
        q in 0.1f64..=1.0,
        lambda in 0.1f64..3.0,
        mu in 1e-6f64..1.0,
    ) {
        let x = gaussian(seed, d, n);
        let z = gaussian(seed ^ 7, n, n);
        let smooth = lrr_objective(&z, &x, p, q, lambda, mu).unwrap();
        let exact = lrr_objective(&z, &x, p, q, lambda, 0.0).unwrap();
        prop_assert!(smooth > exact);
        let bound = n as f64 * mu.powf(p) + lambda * n as f64 * mu.powf(q);
        prop_assert!(smooth - exact <= bound * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn objective_is_convex_for_large_exponents(
        seed in any::<u64>(),
        p in 1.0f64..=2.0,
        q in 1.0f64..=2.0,
        theta in 0.0f64..=1.0,
        mu in 0.01f64..1.0,
    ) {
        let x = gaussian(seed, 4, 5);
        let z1 = gaussian(seed ^ 3, 5, 5);
        let z2 = gaussian(seed ^ 4, 5, 5);
        let mix = &z1 * theta + &z2 * (1.0 - theta);
        let j = |z: &DenseMatrix| lrr_objective(z, &x, p, q, 0.7, mu).unwrap();
        prop_assert!(j(&mix) <= theta * j(&z1) + (1.0 - theta) * j(&z2) + 1e-9);
    }

    #[test]
    fn step_satisfies_weighted_first_order_condition(
        seed in any::<u64>(),
        d in 1usize..6,
        n in 1usize..6,
        p in 0.2f64..=2.0,
        q in 0.2f64..=2.0,
        mu in 0.05f64..1.0,
    ) {
        let x = gaussian(seed, d, n);
        let z0 = gaussian(seed ^ 5, n, n);
        let lambda = 0.8;
        let w = update_weights(&z0, &x, p, q, mu, PenaltyFamily::Power).unwrap();
        let z = irls_step(&x, &w, p, q, lambda).unwrap();
        let gram = x.transpose() * &x;
        let mut data = &gram * &z - &gram;
        for j in 0..n {
            let mut col = data.column_mut(j);
            col *= lambda * q * w.n_diag[j];
        }
        let residual = (&z * &w.m * p + data).norm();
        let scale = (p * w.m.norm() + lambda * q * gram.norm() * w.n_matrix().norm()) * z.norm().max(1.0);
        prop_assert!(residual <= 1e-7 * scale + 1e-12);
    }

    #[test]
    fn stationarity_is_normalized_gradient(seed in any::<u64>(), n in 1usize..6, mu in 0.1f64..1.0) {
        let x = gaussian(seed, 3, n);
        let z = gaussian(seed ^ 9, n, n);
        let g = lrr_gradient(&z, &x, 1.0, 1.0, 0.5, mu).unwrap();
        let s = stationarity_residual(&z, &x, 1.0, 1.0, 0.5, mu).unwrap();
        prop_assert!((s - g.norm() / z.norm().max(1.0)).abs() <= 1e-12 * g.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn generation_and_clustering_are_deterministic(seed in any::<u64>()) {
        let params = SubspaceParams { k: 3, r: 2, d: 12, n_i: 6, ..SubspaceParams::reference(seed) };
        let a = gen_subspaces(&params).unwrap();
        let b = gen_subspaces(&params).unwrap();
        prop_assert_eq!(&a, &b);
        let w = affinity_from_z(&(a.x.transpose() * &a.x)).unwrap();
        prop_assert_eq!(spectral_cluster(&w, 3, seed).unwrap(), spectral_cluster(&w, 3, seed).unwrap());
    }
}
