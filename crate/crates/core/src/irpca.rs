//! Inductive robust PCA: learn a projection `P` minimizing
//! `‖P‖_* + λ‖PX − X‖_{1,2}` (row-wise `ℓ1,2`), smoothed as
//! `Tr(PPᵀ+μ²I)^{1/2} + λ Σ_i (‖(PX−X)^i‖² + μ²)^{1/2}`.
//!
//! Each step solves `M·P + λ·N·(PX − X)·Xᵀ = 0` with
//! `M = (PPᵀ+μ²I)^{-1/2}` and `N = diag((‖(PX−X)^i‖²+μ²)^{-1/2})`. Left
//! multiplying by `N⁻¹` gives the Sylvester equation
//! `(N⁻¹M)·P + P·(λXXᵀ) = λXXᵀ`, whose right coefficient is fixed across
//! iterations.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{IrlsError, Result};
use crate::linalg::{max_abs, sym_eig, symmetrize, DenseMatrix, RightSylvesterSolver};
use crate::lrr::{StopReason, WeightState};
use crate::schedule::{ResolvedSchedule, SmoothingSchedule};
use crate::trace::{IterationRecord, SolveTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrpcaConfig {
    pub lambda: f64,
    #[serde(flatten)]
    pub schedule: SmoothingSchedule,
}

impl Default for IrpcaConfig {
    fn default() -> Self {
        IrpcaConfig {
            lambda: 0.5,
            schedule: SmoothingSchedule::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IrpcaSolution {
    pub p: DenseMatrix,
    pub trace: SolveTrace,
    pub stop: StopReason,
    pub schedule: ResolvedSchedule,
}

impl IrpcaSolution {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(IrlsError::NonPositiveMu(mu))
    }
}

fn check_projection_dims(p: &DenseMatrix, x: &DenseMatrix) -> Result<()> {
    let d = x.nrows();
    if p.nrows() != d || p.ncols() != d {
        return Err(IrlsError::DimensionMismatch(format!(
            "P is {}x{} but X has {d} rows",
            p.nrows(),
            p.ncols()
        )));
    }
    Ok(())
}

struct Evaluation {
    weights: WeightState,
    j_smoothed: f64,
    j_exact: f64,
    stationarity: f64,
    min_weight_m: f64,
    min_weight_n: f64,
}

/// `xxt` is `XXᵀ`.
fn evaluate(p: &DenseMatrix, x: &DenseMatrix, xxt: &DenseMatrix, lambda: f64, mu: f64) -> Result<Evaluation> {
    check_mu(mu)?;
    let mu2 = mu * mu;
    let eig = sym_eig(&symmetrize(p * p.transpose()))?;
    let eigs: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let m = eig.map_eigenvalues(|l| 1.0 / (l.max(0.0) + mu2).sqrt());
    let min_weight_m = eigs.iter().map(|&l| 1.0 / (l + mu2).sqrt()).fold(f64::INFINITY, f64::min);
    let nuc_smoothed: f64 = eigs.iter().map(|&l| (l + mu2).sqrt()).sum();
    let nuc_exact: f64 = eigs.iter().map(|&l| l.sqrt()).sum();

    let e = p * x - x;
    let row_sq: Vec<f64> = e.row_iter().map(|r| r.norm_squared()).collect();
    let n_diag = DVector::from_iterator(row_sq.len(), row_sq.iter().map(|&s| 1.0 / (s + mu2).sqrt()));
    let min_weight_n = n_diag.iter().copied().fold(f64::INFINITY, f64::min);
    let rows_smoothed: f64 = row_sq.iter().map(|&s| (s + mu2).sqrt()).sum();
    let rows_exact: f64 = row_sq.iter().map(|&s| s.sqrt()).sum();

    let weights = WeightState { m, n_diag };
    let grad = gradient_from_weights(p, xxt, &weights, lambda);
    Ok(Evaluation {
        stationarity: grad.norm() / p.norm().max(1.0),
        weights,
        j_smoothed: nuc_smoothed + lambda * rows_smoothed,
        j_exact: nuc_exact + lambda * rows_exact,
        min_weight_m,
        min_weight_n,
    })
}

/// `M·P + λ·N·(PX − X)·Xᵀ`, with `(PX−X)Xᵀ = P·XXᵀ − XXᵀ`.
fn gradient_from_weights(p: &DenseMatrix, xxt: &DenseMatrix, weights: &WeightState, lambda: f64) -> DenseMatrix {
    let mut data_term = p * xxt - xxt;
    for (i, mut row) in data_term.row_iter_mut().enumerate() {
        row *= lambda * weights.n_diag[i];
    }
    &weights.m * p + data_term
}

/// IRPCA weights `M = (PPᵀ+μ²I)^{-1/2}` and `N_ii = (‖(PX−X)^i‖²+μ²)^{-1/2}`.
pub fn update_irpca_weights(p: &DenseMatrix, x: &DenseMatrix, mu: f64) -> Result<WeightState> {
    check_mu(mu)?;
    check_projection_dims(p, x)?;
    let xxt = x * x.transpose();
    Ok(evaluate(p, x, &xxt, 1.0, mu)?.weights)
}

/// Smoothed IRPCA objective at `(P, μ)`; `μ = 0` gives the exact objective.
pub fn irpca_objective(p: &DenseMatrix, x: &DenseMatrix, lambda: f64, mu: f64) -> Result<f64> {
    check_projection_dims(p, x)?;
    if mu == 0.0 {
        let e = p * x - x;
        let nuc: f64 = p.clone().svd(false, false).singular_values.iter().sum();
        let rows: f64 = e.row_iter().map(|r| r.norm()).sum();
        return Ok(nuc + lambda * rows);
    }
    let xxt = x * x.transpose();
    Ok(evaluate(p, x, &xxt, lambda, mu)?.j_smoothed)
}

/// Gradient `M·P + λ·N·(PX−X)·Xᵀ` of the smoothed objective.
pub fn irpca_gradient(p: &DenseMatrix, x: &DenseMatrix, lambda: f64, mu: f64) -> Result<DenseMatrix> {
    check_projection_dims(p, x)?;
    let xxt = x * x.transpose();
    let ev = evaluate(p, x, &xxt, lambda, mu)?;
    Ok(gradient_from_weights(p, &xxt, &ev.weights, lambda))
}

/// `‖M·P + λ·N·(PX−X)·Xᵀ‖_F / max(‖P‖_F, 1)` with weights rebuilt at `μ`.
pub fn irpca_stationarity(p: &DenseMatrix, x: &DenseMatrix, lambda: f64, mu: f64) -> Result<f64> {
    check_projection_dims(p, x)?;
    let xxt = x * x.transpose();
    Ok(evaluate(p, x, &xxt, lambda, mu)?.stationarity)
}

fn left_coefficient(weights: &WeightState) -> Result<DenseMatrix> {
    if weights.n_diag.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(IrlsError::InvalidParams("sparse weights must be positive and finite".into()));
    }
    let mut a = weights.m.clone();
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row /= weights.n_diag[i];
    }
    Ok(a)
}

/// Solves `M·P + λ·N·(PX − X)·Xᵀ = 0` for fixed weights.
pub fn irpca_step(x: &DenseMatrix, weights: &WeightState, lambda: f64) -> Result<DenseMatrix> {
    let d = x.nrows();
    if weights.m.nrows() != d || weights.m.ncols() != d || weights.n_diag.len() != d {
        return Err(IrlsError::DimensionMismatch(format!("weights do not match {d} rows of X")));
    }
    let rhs = symmetrize(x * x.transpose()) * lambda;
    let solver = RightSylvesterSolver::new(rhs.clone())?;
    solver.solve(&left_coefficient(weights)?, &rhs)
}

/// `P·X_test`.
pub fn apply_projection(p: &DenseMatrix, x_test: &DenseMatrix) -> Result<DenseMatrix> {
    if p.nrows() != p.ncols() || p.ncols() != x_test.nrows() {
        return Err(IrlsError::DimensionMismatch(format!(
            "projection is {}x{} but test data has {} rows",
            p.nrows(),
            p.ncols(),
            x_test.nrows()
        )));
    }
    Ok(p * x_test)
}

/// Step-by-step IRPCA driver, mirroring [`crate::lrr::LrrSolver`].
#[derive(Debug)]
pub struct IrpcaSolver<'a> {
    x: &'a DenseMatrix,
    xxt: DenseMatrix,
    rhs: DenseMatrix,
    sylvester: RightSylvesterSolver,
    lambda: f64,
    schedule: ResolvedSchedule,
    mu: f64,
    p: DenseMatrix,
    weights: WeightState,
    trace: SolveTrace,
    started: Instant,
    converged: bool,
}

impl<'a> IrpcaSolver<'a> {
    pub fn new(x: &'a DenseMatrix, config: &IrpcaConfig) -> Result<Self> {
        if !(config.lambda.is_finite() && config.lambda > 0.0) {
            return Err(IrlsError::InvalidParams(format!(
                "lambda must be positive, got {}",
                config.lambda
            )));
        }
        let schedule = config.schedule.resolve(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(IrlsError::InvalidParams("data matrix has non-finite entries".into()));
        }
        let d = x.nrows();
        let xxt = symmetrize(x * x.transpose());
        let rhs = &xxt * config.lambda;
        let sylvester = RightSylvesterSolver::new(rhs.clone())?;
        Ok(IrpcaSolver {
            x,
            xxt,
            rhs,
            sylvester,
            lambda: config.lambda,
            mu: schedule.mu0,
            schedule,
            p: DenseMatrix::zeros(d, d),
            weights: WeightState::identity(d),
            trace: SolveTrace::default(),
            started: Instant::now(),
            converged: false,
        })
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn weights(&self) -> &WeightState {
        &self.weights
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn trace(&self) -> &SolveTrace {
        &self.trace
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    pub fn objective(&self, p: &DenseMatrix, mu: f64) -> Result<f64> {
        Ok(evaluate(p, self.x, &self.xxt, self.lambda, mu)?.j_smoothed)
    }

    pub fn step(&mut self) -> Result<&IterationRecord> {
        let t = self.trace.len() + 1;
        let p_next = left_coefficient(&self.weights)
            .and_then(|a| self.sylvester.solve(&a, &self.rhs))
            .map_err(|e| e.at_iteration(t))?;
        let dp = &p_next - &self.p;
        let dz_inf = max_abs(&dp);
        let dz_fro = dp.norm();
        let mu = self.mu;
        let ev = evaluate(&p_next, self.x, &self.xxt, self.lambda, mu).map_err(|e| e.at_iteration(t))?;
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
        self.p = p_next;
        self.weights = ev.weights;
        self.mu = self.schedule.next_mu(mu);
        self.converged = dz_inf <= self.schedule.epsilon;
        Ok(self.trace.records.last().expect("record just pushed"))
    }

    pub fn run(mut self) -> Result<IrpcaSolution> {
        while !self.converged && self.trace.len() < self.schedule.max_iter {
            self.step()?;
        }
        let stop = if self.converged {
            StopReason::Converged
        } else {
            log::warn!("IRPCA stopped after {} iterations without meeting epsilon", self.trace.len());
            StopReason::MaxIterations
        };
        Ok(IrpcaSolution {
            p: self.p,
            trace: self.trace,
            stop,
            schedule: self.schedule,
        })
    }
}

/// Learns the robust projection for training data `X` (columns are samples).
pub fn solve_irpca(x: &DenseMatrix, config: &IrpcaConfig) -> Result<IrpcaSolution> {
    IrpcaSolver::new(x, config)?.run()
}
