//! Smoothed low-rank representation solved by iteratively reweighted least
//! squares.
//!
//! The model is
//!
//! ```text
//! J(Z, μ) = Tr g_p(ZᵀZ + μ²I) + λ Σ_i g_q(‖(XZ − X)_i‖² + μ²)
//! ```
//!
//! with `g_p(s) = s^{p/2}` (Schatten-p / `ℓ2,q`) or `g(s) = log s`. Each
//! iteration freezes the weights `M = (ZᵀZ+μ²I)^{p/2−1}` and
//! `N = diag((‖E_i‖²+μ²)^{q/2−1})`, solves the stationarity condition
//! `pZM + λqXᵀ(XZ−X)N = 0` for `Z` as the Sylvester equation
//! `λqXᵀX·Z + Z·(pMN⁻¹) = λqXᵀX`, then rebuilds the weights from the new
//! iterate and shrinks μ.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{IrlsError, Result};
use crate::linalg::{max_abs, sym_eig, symmetrize, DenseMatrix, SylvesterSolver};
use crate::norms::{check_exponent, Penalty, PenaltyFamily};
use crate::parallel::{self, Execution};
use crate::schedule::{ResolvedSchedule, SmoothingSchedule};
use crate::trace::{IterationRecord, SolveTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    #[serde(flatten)]
    pub schedule: SmoothingSchedule,
    pub penalty: PenaltyFamily,
    /// Ratio `μ₂/μ₁` between the smoothing of the sparse term and the
    /// low-rank term. `1.0` ties them.
    pub sparse_mu_ratio: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            p: 1.0,
            q: 1.0,
            lambda: 0.5,
            schedule: SmoothingSchedule::default(),
            penalty: PenaltyFamily::Power,
            sparse_mu_ratio: 1.0,
        }
    }
}

/// The penalties and trade-off of one LRR model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrrModel {
    pub low_rank: Penalty,
    pub sparse: Penalty,
    pub lambda: f64,
    pub sparse_mu_ratio: f64,
}

impl LrrModel {
    pub fn power(p: f64, q: f64, lambda: f64) -> Result<Self> {
        check_exponent(p)?;
        check_exponent(q)?;
        check_lambda(lambda)?;
        Ok(LrrModel {
            low_rank: Penalty::Power(p),
            sparse: Penalty::Power(q),
            lambda,
            sparse_mu_ratio: 1.0,
        })
    }

    pub fn from_config(config: &SolverConfig) -> Result<Self> {
        check_lambda(config.lambda)?;
        if !(config.sparse_mu_ratio.is_finite() && config.sparse_mu_ratio > 0.0) {
            return Err(IrlsError::InvalidParams(format!(
                "sparse_mu_ratio must be positive, got {}",
                config.sparse_mu_ratio
            )));
        }
        Ok(LrrModel {
            low_rank: Penalty::new(config.penalty, config.p)?,
            sparse: Penalty::new(config.penalty, config.q)?,
            lambda: config.lambda,
            sparse_mu_ratio: config.sparse_mu_ratio,
        })
    }

    fn grad_p(&self) -> f64 {
        self.low_rank.gradient_scale()
    }

    fn grad_q(&self) -> f64 {
        self.sparse.gradient_scale()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(IrlsError::InvalidParams(format!("lambda must be positive, got {lambda}")))
    }
}

/// IRLS weights: symmetric positive definite `M` and diagonal `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    pub m: DenseMatrix,
    pub n_diag: DVector<f64>,
}

impl WeightState {
    pub fn identity(n: usize) -> Self {
        WeightState {
            m: DenseMatrix::identity(n, n),
            n_diag: DVector::from_element(n, 1.0),
        }
    }

    pub fn n_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_diagonal(&self.n_diag)
    }
}

/// Everything derived from one iterate at one μ.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub weights: WeightState,
    pub j_smoothed: f64,
    pub j_exact: f64,
    pub stationarity: f64,
    pub min_weight_m: f64,
    pub min_weight_n: f64,
}

fn check_dims(z: &DenseMatrix, x: &DenseMatrix) -> Result<()> {
    let n = x.ncols();
    if z.nrows() != n || z.ncols() != n {
        return Err(IrlsError::DimensionMismatch(format!(
            "Z is {}x{} but X has {n} columns",
            z.nrows(),
            z.ncols()
        )));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(IrlsError::NonPositiveMu(mu))
    }
}

/// Weights, objectives and stationarity residual at `(Z, μ)`.
///
/// `gram` is `XᵀX`.
pub(crate) fn evaluate(
    z: &DenseMatrix,
    x: &DenseMatrix,
    gram: &DenseMatrix,
    model: &LrrModel,
    mu: f64,
) -> Result<Evaluation> {
    check_mu(mu)?;
    let mu_lr2 = mu * mu;
    let mu_sp = mu * model.sparse_mu_ratio;
    let mu_sp2 = mu_sp * mu_sp;

    let eig = sym_eig(&symmetrize(z.transpose() * z))?;
    let lr_eigs: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    // p = 2 makes M exactly I; rebuilding it from eigenvectors would leave
    // round-off that the Schur iteration handles poorly
    let m = if model.low_rank == Penalty::Power(2.0) {
        DenseMatrix::identity(z.ncols(), z.ncols())
    } else {
        eig.map_eigenvalues(|l| model.low_rank.weight(l.max(0.0) + mu_lr2))
    };
    let min_weight_m = lr_eigs
        .iter()
        .map(|&l| model.low_rank.weight(l + mu_lr2))
        .fold(f64::INFINITY, f64::min);
    let lr_smoothed: f64 = lr_eigs.iter().map(|&l| model.low_rank.value(l + mu_lr2)).sum();
    let lr_exact: f64 = lr_eigs.iter().map(|&l| model.low_rank.value(l)).sum();

    let e = x * z - x;
    let col_sq: Vec<f64> = e.column_iter().map(|c| c.norm_squared()).collect();
    let n_diag = DVector::from_iterator(col_sq.len(), col_sq.iter().map(|&s| model.sparse.weight(s + mu_sp2)));
    let min_weight_n = n_diag.iter().copied().fold(f64::INFINITY, f64::min);
    let sp_smoothed: f64 = col_sq.iter().map(|&s| model.sparse.value(s + mu_sp2)).sum();
    let sp_exact: f64 = col_sq.iter().map(|&s| model.sparse.value(s)).sum();

    let weights = WeightState { m, n_diag };
    let stationarity = stationarity_from_weights(z, gram, &weights, model)?;

    Ok(Evaluation {
        weights,
        j_smoothed: lr_smoothed + model.lambda * sp_smoothed,
        j_exact: lr_exact + model.lambda * sp_exact,
        stationarity,
        min_weight_m,
        min_weight_n,
    })
}

/// `‖c_p·Z·M + λ·c_q·Xᵀ(XZ−X)·N‖_F / max(‖Z‖_F, 1)`.
fn stationarity_from_weights(
    z: &DenseMatrix,
    gram: &DenseMatrix,
    weights: &WeightState,
    model: &LrrModel,
) -> Result<f64> {
    let grad = gradient_from_weights(z, gram, weights, model);
    Ok(grad.norm() / z.norm().max(1.0))
}

fn gradient_from_weights(z: &DenseMatrix, gram: &DenseMatrix, weights: &WeightState, model: &LrrModel) -> DenseMatrix {
    let mut data_term = gram * z - gram;
    for (j, mut col) in data_term.column_iter_mut().enumerate() {
        col *= model.lambda * model.grad_q() * weights.n_diag[j];
    }
    z * &weights.m * model.grad_p() + data_term
}

/// Rebuilds `M = (ZᵀZ+μ²I)^{p/2−1}` and `N_ii = (‖(XZ−X)_i‖²+μ²)^{q/2−1}`.
///
/// For the logarithm family the weights are `(·+μ²)^{-1}` instead.
pub fn update_weights(
    z: &DenseMatrix,
    x: &DenseMatrix,
    p: f64,
    q: f64,
    mu: f64,
    penalty: PenaltyFamily,
) -> Result<WeightState> {
    check_mu(mu)?;
    check_dims(z, x)?;
    let model = LrrModel {
        low_rank: Penalty::new(penalty, p)?,
        sparse: Penalty::new(penalty, q)?,
        lambda: 1.0,
        sparse_mu_ratio: 1.0,
    };
    let gram = x.transpose() * x;
    Ok(evaluate(z, x, &gram, &model, mu)?.weights)
}

/// Gradient `∂J/∂Z = pZM + λqXᵀ(XZ−X)N` at `(Z, μ)` for the power family.
pub fn lrr_gradient(z: &DenseMatrix, x: &DenseMatrix, p: f64, q: f64, lambda: f64, mu: f64) -> Result<DenseMatrix> {
    check_dims(z, x)?;
    let model = LrrModel::power(p, q, lambda)?;
    let gram = x.transpose() * x;
    let ev = evaluate(z, x, &gram, &model, mu)?;
    Ok(gradient_from_weights(z, &gram, &ev.weights, &model))
}

/// First-order residual `‖pZM + λqXᵀ(XZ−X)N‖_F / max(‖Z‖_F, 1)` with the
/// weights rebuilt from `Z` at `μ`.
pub fn stationarity_residual(z: &DenseMatrix, x: &DenseMatrix, p: f64, q: f64, lambda: f64, mu: f64) -> Result<f64> {
    check_dims(z, x)?;
    let model = LrrModel::power(p, q, lambda)?;
    let gram = x.transpose() * x;
    Ok(evaluate(z, x, &gram, &model, mu)?.stationarity)
}

/// Solves `λq·XᵀX·Z + Z·(p·M·N⁻¹) = λq·XᵀX` for fixed weights.
///
/// `p` and `q` are the gradient multipliers of the two penalties, i.e. the
/// exponents for the power family and 2 for the logarithm.
pub fn irls_step(x: &DenseMatrix, weights: &WeightState, p: f64, q: f64, lambda: f64) -> Result<DenseMatrix> {
    let n = x.ncols();
    if weights.m.nrows() != n || weights.m.ncols() != n || weights.n_diag.len() != n {
        return Err(IrlsError::DimensionMismatch(format!(
            "weights do not match {n} columns of X"
        )));
    }
    let rhs = x.transpose() * x * (lambda * q);
    let solver = SylvesterSolver::new(rhs.clone())?;
    step_with(&solver, &rhs, weights, p)
}

fn right_coefficient(weights: &WeightState, p: f64) -> DenseMatrix {
    let mut b = weights.m.clone();
    for (j, mut col) in b.column_iter_mut().enumerate() {
        col *= p / weights.n_diag[j];
    }
    b
}

fn step_with(solver: &SylvesterSolver, rhs: &DenseMatrix, weights: &WeightState, p: f64) -> Result<DenseMatrix> {
    if weights.n_diag.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(IrlsError::InvalidParams("sparse weights must be positive and finite".into()));
    }
    let b = right_coefficient(weights, p);
    solver.solve(&b, rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `‖Z_{t+1} − Z_t‖_∞ ≤ ε`.
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LrrSolution {
    pub z: DenseMatrix,
    pub trace: SolveTrace,
    pub stop: StopReason,
    pub schedule: ResolvedSchedule,
}

impl LrrSolution {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Solves the same data under several configurations, e.g. a λ or schedule
/// sweep. Each solve is sequential in its own iterations; `exec` decides
/// whether the solves run concurrently. Results come back in input order.
pub fn solve_many(x: &DenseMatrix, configs: &[SolverConfig], exec: Execution) -> Vec<Result<LrrSolution>> {
    parallel::map(exec, configs, |cfg| solve_smoothed_lrr(x, cfg))
}

/// Step-by-step driver for the smoothed LRR iteration.
///
/// Starts from `M = N = I`; every [`step`](LrrSolver::step) solves for the
/// next iterate, rebuilds the weights at the current μ, then anneals μ.
#[derive(Debug)]
pub struct LrrSolver<'a> {
    x: &'a DenseMatrix,
    gram: DenseMatrix,
    rhs: DenseMatrix,
    sylvester: SylvesterSolver,
    model: LrrModel,
    schedule: ResolvedSchedule,
    mu: f64,
    z: DenseMatrix,
    weights: WeightState,
    trace: SolveTrace,
    started: Instant,
    converged: bool,
}

impl<'a> LrrSolver<'a> {
    pub fn new(x: &'a DenseMatrix, config: &SolverConfig) -> Result<Self> {
        let model = LrrModel::from_config(config)?;
        let schedule = config.schedule.resolve(x)?;
        Self::with_model(x, model, schedule)
    }

    pub fn with_model(x: &'a DenseMatrix, model: LrrModel, schedule: ResolvedSchedule) -> Result<Self> {
        if x.is_empty() {
            return Err(IrlsError::EmptyMatrix);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(IrlsError::InvalidParams("data matrix has non-finite entries".into()));
        }
        let n = x.ncols();
        let gram = symmetrize(x.transpose() * x);
        let rhs = &gram * (model.lambda * model.grad_q());
        let sylvester = SylvesterSolver::new(rhs.clone())?;
        Ok(LrrSolver {
            x,
            gram,
            rhs,
            sylvester,
            model,
            mu: schedule.mu0,
            schedule,
            z: DenseMatrix::zeros(n, n),
            weights: WeightState::identity(n),
            trace: SolveTrace::default(),
            started: Instant::now(),
            converged: false,
        })
    }

    /// Current iterate (zero before the first step).
    pub fn z(&self) -> &DenseMatrix {
        &self.z
    }

    /// Weights built from the current iterate (identity before the first step).
    pub fn weights(&self) -> &WeightState {
        &self.weights
    }

    /// Smoothing parameter the next step will build its weights with.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn model(&self) -> &LrrModel {
        &self.model
    }

    pub fn schedule(&self) -> &ResolvedSchedule {
        &self.schedule
    }

    pub fn trace(&self) -> &SolveTrace {
        &self.trace
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    /// Smoothed objective of `z` at `mu` under this solver's model.
    pub fn objective(&self, z: &DenseMatrix, mu: f64) -> Result<f64> {
        Ok(evaluate(z, self.x, &self.gram, &self.model, mu)?.j_smoothed)
    }

    pub fn step(&mut self) -> Result<&IterationRecord> {
        let t = self.trace.len() + 1;
        let z_next = step_with(&self.sylvester, &self.rhs, &self.weights, self.model.grad_p())
            .map_err(|e| e.at_iteration(t))?;
        let dz = &z_next - &self.z;
        let dz_inf = max_abs(&dz);
        let dz_fro = dz.norm();

        let mu = self.mu;
        let ev = evaluate(&z_next, self.x, &self.gram, &self.model, mu).map_err(|e| e.at_iteration(t))?;
        if !ev.j_smoothed.is_finite() {
            return Err(IrlsError::InvalidParams("objective became non-finite".into()).at_iteration(t));
        }

        self.trace.records.push(IterationRecord {
            t,
            mu,
            j_smoothed: ev.j_smoothed,
            j_exact: ev.j_exact,
            dz_inf,
            dz_fro,
            stationarity: ev.stationarity,
            seconds: self.started.elapsed().as_secs_f64(),
            min_weight_m: ev.min_weight_m,
            min_weight_n: ev.min_weight_n,
        });
        self.z = z_next;
        self.weights = ev.weights;
        self.mu = self.schedule.next_mu(mu);
        self.converged = dz_inf <= self.schedule.epsilon;
        Ok(self.trace.records.last().expect("record just pushed"))
    }

    /// Iterates until the ε-stop or `max_iter`.
    pub fn run(mut self) -> Result<LrrSolution> {
        while !self.converged && self.trace.len() < self.schedule.max_iter {
            self.step()?;
        }
        let stop = if self.converged {
            StopReason::Converged
        } else {
            log::warn!(
                "smoothed LRR stopped after {} iterations without meeting epsilon = {:e}",
                self.trace.len(),
                self.schedule.epsilon
            );
            StopReason::MaxIterations
        };
        Ok(LrrSolution {
            z: self.z,
            trace: self.trace,
            stop,
            schedule: self.schedule,
        })
    }
}

/// Solves the smoothed LRR problem for data `X` (columns are samples).
pub fn solve_smoothed_lrr(x: &DenseMatrix, config: &SolverConfig) -> Result<LrrSolution> {
    LrrSolver::new(x, config)?.run()
}

/// Lower bounds on the smallest eigenvalues of `M` and `N` implied by an
/// objective value `d ≥ J(Z, μ)` for the power family.
pub fn weight_floor(p: f64, q: f64, lambda: f64, d: f64) -> (f64, f64) {
    let m_floor = d.powf(-(2.0 - p) / p);
    let n_floor = (d / lambda).powf(-(2.0 - q) / q);
    (m_floor, n_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::lrr_objective;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn ridge(x: &DenseMatrix, lambda: f64) -> DenseMatrix {
        let n = x.ncols();
        let g = x.transpose() * x;
        let lhs = DenseMatrix::identity(n, n) + &g * lambda;
        lhs.lu().solve(&(g * lambda)).unwrap()
    }

    #[test]
    fn quadratic_exponents_give_identity_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random(3, 4, &mut rng);
        let z = random(4, 4, &mut rng);
        let w = update_weights(&z, &x, 2.0, 2.0, 0.3, PenaltyFamily::Power).unwrap();
        assert!((w.m - DenseMatrix::identity(4, 4)).norm() < 1e-12);
        assert!(w.n_diag.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn zero_iterate_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x = random(3, 4, &mut rng);
        let w = update_weights(&DenseMatrix::zeros(4, 4), &x, 1.0, 1.0, 0.25, PenaltyFamily::Power).unwrap();
        assert!((w.m - DenseMatrix::identity(4, 4) * 4.0).norm() < 1e-12);
        assert!(matches!(
            update_weights(&DenseMatrix::zeros(4, 4), &x, 1.0, 1.0, 0.0, PenaltyFamily::Power),
            Err(IrlsError::NonPositiveMu(_))
        ));
        assert!(matches!(
            update_weights(&DenseMatrix::zeros(3, 3), &x, 1.0, 1.0, 0.1, PenaltyFamily::Power),
            Err(IrlsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = random(4, 5, &mut rng);
        let z = random(5, 5, &mut rng);
        let (p, q, lambda, mu) = (0.7, 1.3, 0.8, 0.2);
        let g = lrr_gradient(&z, &x, p, q, lambda, mu).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            for j in 0..5 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[(i, j)] += h;
                zm[(i, j)] -= h;
                let fd = (lrr_objective(&zp, &x, p, q, lambda, mu).unwrap()
                    - lrr_objective(&zm, &x, p, q, lambda, mu).unwrap())
                    / (2.0 * h);
                assert!((fd - g[(i, j)]).abs() <= 1e-6 * g.norm().max(1.0));
            }
        }
    }

    #[test]
    fn step_with_identity_weights_is_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let x = random(6, 8, &mut rng);
        let z = irls_step(&x, &WeightState::identity(8), 2.0, 2.0, 0.7).unwrap();
        let oracle = ridge(&x, 0.7);
        assert!((z - &oracle).norm() <= 1e-10 * oracle.norm());
    }

    #[test]
    fn step_identity_data() {
        let x = DenseMatrix::identity(3, 3);
        let z = irls_step(&x, &WeightState::identity(3), 1.0, 1.0, 2.0).unwrap();
        let expect = DenseMatrix::identity(3, 3) * (2.0 / 3.0);
        assert!((z - expect).norm() < 1e-13);
    }

    #[test]
    fn step_scalar_closed_form() {
        let (x, m, nu, p, q, lambda) = (1.7, 0.4, 2.5, 0.8, 1.2, 0.9);
        let w = WeightState {
            m: DenseMatrix::from_element(1, 1, m),
            n_diag: DVector::from_element(1, nu),
        };
        let z = irls_step(&DenseMatrix::from_element(1, 1, x), &w, p, q, lambda).unwrap();
        let expect = lambda * q * x * x / (lambda * q * x * x + p * m / nu);
        assert!((z[(0, 0)] - expect).abs() < 1e-14);
    }

    #[test]
    fn step_satisfies_first_order_condition_for_given_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let x = random(5, 7, &mut rng);
        let z0 = random(7, 7, &mut rng);
        let (p, q, lambda) = (0.5, 1.5, 1.3);
        let w = update_weights(&z0, &x, p, q, 0.1, PenaltyFamily::Power).unwrap();
        let z = irls_step(&x, &w, p, q, lambda).unwrap();
        let g = x.transpose() * &x;
        let n = w.n_matrix();
        let res = (&z * &w.m * p + (&g * &z - &g) * &n * (lambda * q)).norm();
        let bound = 1e-7 * (p * w.m.norm() + lambda * q * g.norm() * n.norm()) * z.norm().max(1.0);
        assert!(res <= bound, "{res} > {bound}");
    }

    #[test]
    fn ridge_solve_converges_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let x = random(5, 9, &mut rng);
        let config = SolverConfig {
            p: 2.0,
            q: 2.0,
            lambda: 1.5,
            schedule: SmoothingSchedule { rho: 1.0, ..Default::default() },
            ..Default::default()
        };
        let sol = solve_smoothed_lrr(&x, &config).unwrap();
        assert!(sol.converged());
        assert!(sol.iterations() <= 2);
        let oracle = ridge(&x, 1.5);
        assert!((&sol.z - &oracle).norm() <= 1e-8 * oracle.norm());
        assert!(stationarity_residual(&sol.z, &x, 2.0, 2.0, 1.5, 0.3).unwrap() <= 1e-10);
    }

    #[test]
    fn stationarity_positive_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let x = random(4, 6, &mut rng);
        assert!(stationarity_residual(&DenseMatrix::zeros(6, 6), &x, 1.0, 1.0, 1.0, 0.1).unwrap() > 0.0);
    }

    #[test]
    fn logarithm_penalty_descends() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let x = random(6, 8, &mut rng);
        let config = SolverConfig {
            penalty: PenaltyFamily::Logarithm,
            lambda: 1.0,
            schedule: SmoothingSchedule {
                max_iter: 60,
                ..SmoothingSchedule::fixed(0.2)
            },
            ..Default::default()
        };
        let sol = solve_smoothed_lrr(&x, &config).unwrap();
        assert!(sol.trace.descent_violations(1e-9).is_empty());
    }

    #[test]
    fn rejects_bad_config() {
        let x = DenseMatrix::identity(3, 3);
        let bad = SolverConfig { lambda: 0.0, ..Default::default() };
        assert!(solve_smoothed_lrr(&x, &bad).is_err());
        let bad = SolverConfig { p: 3.0, ..Default::default() };
        assert!(matches!(solve_smoothed_lrr(&x, &bad), Err(IrlsError::InvalidExponent(_))));
        assert!(solve_smoothed_lrr(&DenseMatrix::zeros(0, 0), &SolverConfig::default()).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = SolverConfig {
            p: 0.5,
            schedule: SmoothingSchedule { mu_floor: Some(1e-6), ..Default::default() },
            ..Default::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        let back: SolverConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
    }
}
