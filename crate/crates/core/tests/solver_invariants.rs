use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use irls_core::irpca::{apply_projection, irpca_stationarity, solve_irpca, IrpcaConfig};
use irls_core::lrr::{solve_smoothed_lrr, weight_floor, SolverConfig};
use irls_core::norms::schatten_p;
use irls_core::schedule::SmoothingSchedule;
use irls_core::synth::{gen_row_corrupted, RowCorruptionParams};
use irls_core::DenseMatrix;

fn gaussian(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn fixed(p: f64, q: f64, lambda: f64, mu: f64, max_iter: usize) -> SolverConfig {
    SolverConfig {
        p,
        q,
        lambda,
        schedule: SmoothingSchedule {
            epsilon: Some(1e-12),
            max_iter,
            ..SmoothingSchedule::fixed(mu)
        },
        ..Default::default()
    }
}

#[test]
fn iterates_stay_bounded_and_weights_respect_floor() {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    for _ in 0..20 {
        let d = rng.random_range(2..8);
        let n = rng.random_range(2..8);
        let x = gaussian(&mut rng, d, n);
        let p = rng.random_range(0.3..1.9);
        let q = rng.random_range(0.3..1.9);
        let lambda = rng.random_range(0.2..2.0);
        let mu = rng.random_range(0.05..0.5);
        let cfg = fixed(p, q, lambda, mu, 80);
        let mut solver = irls_core::lrr::LrrSolver::new(&x, &cfg).unwrap();
        let first = solver.step().unwrap().j_smoothed;
        let mut sum_sq = 0.0;
        let (theta, _) = weight_floor(p, q, lambda, first);
        while !solver.is_converged() && solver.trace().len() < 80 {
            let before = solver.z().clone();
            let rec = solver.step().unwrap().clone();
            sum_sq += (solver.z() - &before).norm_squared();
            assert!(schatten_p(solver.z(), p).unwrap() <= first * (1.0 + 1e-9));
            let (m_floor, n_floor) = weight_floor(p, q, lambda, rec.j_smoothed);
            assert!(rec.min_weight_m >= m_floor * (1.0 - 1e-9), "{} < {m_floor}", rec.min_weight_m);
            assert!(rec.min_weight_n >= n_floor * (1.0 - 1e-9), "{} < {n_floor}", rec.min_weight_n);
        }
        assert!(sum_sq <= 2.0 * first / (theta * p) * (1.0 + 1e-9));
    }
}

#[test]
fn scalar_problem_matches_golden_section() {
    let (lambda, mu) = (2.0, 0.01);
    let f = |z: f64| (z * z + mu * mu).sqrt() + lambda * ((z - 1.0).powi(2) + mu * mu).sqrt();
    let (mut a, mut b) = (-1.0f64, 2.0f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-12 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let oracle = 0.5 * (a + b);
    let x = DenseMatrix::from_element(1, 1, 1.0);
    let sol = solve_smoothed_lrr(&x, &fixed(1.0, 1.0, lambda, mu, 1000)).unwrap();
    assert!(sol.converged());
    assert!((sol.z[(0, 0)] - oracle).abs() <= 1e-6, "{} vs {oracle}", sol.z[(0, 0)]);
}

#[test]
fn stationarity_trends_down_under_fixed_mu() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let x = gaussian(&mut rng, 6, 9);
    let sol = solve_smoothed_lrr(&x, &fixed(1.0, 1.0, 0.5, 0.05, 400)).unwrap();
    let first = sol.trace.records[0].stationarity;
    let last = sol.trace.last().unwrap().stationarity;
    assert!(last < 1e-6 * first.max(1.0), "{first} -> {last}");
    assert!(sol.trace.log_residual_slope(20).unwrap() < 0.0);
}

#[test]
fn irpca_large_lambda_keeps_subspace() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let basis = gaussian(&mut rng, 12, 3).qr().q();
    let x = &basis * gaussian(&mut rng, 3, 3).qr().q();
    let cfg = IrpcaConfig {
        lambda: 50.0,
        ..Default::default()
    };
    let sol = solve_irpca(&x, &cfg).unwrap();
    assert!(sol.converged());
    assert!((&sol.p * &x - &x).norm() / x.norm() <= 1e-3);
}

#[test]
fn irpca_converges_to_small_residual_at_fixed_mu() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let x = gaussian(&mut rng, 5, 12);
    let cfg = IrpcaConfig {
        lambda: 0.3,
        schedule: SmoothingSchedule {
            epsilon: Some(1e-12),
            max_iter: 500,
            ..SmoothingSchedule::fixed(0.1)
        },
    };
    let sol = solve_irpca(&x, &cfg).unwrap();
    assert!(irpca_stationarity(&sol.p, &x, 0.3, 0.1).unwrap() <= 1e-8);
    assert!(sol.trace.descent_violations(1e-8).is_empty());
}

#[test]
fn projection_cleans_held_out_columns() {
    let params = RowCorruptionParams {
        n: 160,
        ..RowCorruptionParams::reference(21)
    };
    let ds = gen_row_corrupted(&params).unwrap();
    let train = ds.x.columns(0, 100).into_owned();
    let test = ds.x.columns(100, 60).into_owned();
    let test_clean = ds.clean_x.columns(100, 60).into_owned();
    let cfg = IrpcaConfig {
        lambda: 0.1,
        ..Default::default()
    };
    let p = solve_irpca(&train, &cfg).unwrap().p;
    let cleaned = apply_projection(&p, &test).unwrap();
    assert!((&cleaned - &test_clean).norm() < (&test - &test_clean).norm());
}

#[test]
fn ridge_instances_solve_quickly() {
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let start = std::time::Instant::now();
    for _ in 0..50 {
        let x = gaussian(&mut rng, 30, 30);
        let cfg = SolverConfig { p: 2.0, q: 2.0, ..Default::default() };
        assert!(solve_smoothed_lrr(&x, &cfg).unwrap().iterations() <= 2);
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "{:?}", start.elapsed());
}
