use serde::{Deserialize, Serialize};

/// One solver iteration. `j_smoothed` is the objective of the new iterate at
/// the μ its weights were built with; `j_exact` is the same at μ = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub mu: f64,
    pub j_smoothed: f64,
    pub j_exact: f64,
    pub dz_inf: f64,
    pub dz_fro: f64,
    pub stationarity: f64,
    pub seconds: f64,
    /// Smallest eigenvalue of the low-rank weight matrix built from the iterate.
    pub min_weight_m: f64,
    /// Smallest diagonal entry of the sparse weight matrix.
    pub min_weight_n: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Indices `t` at which `j_smoothed` increased by more than
    /// `rel_tol·|J|` relative to the previous record.
    ///
    /// Each record is evaluated at a μ no larger than its predecessor's, so
    /// the sequence is non-increasing under annealing as well as at fixed μ.
    pub fn descent_violations(&self, rel_tol: f64) -> Vec<usize> {
        self.records
            .windows(2)
            .filter(|w| w[1].j_smoothed > w[0].j_smoothed + rel_tol * w[0].j_smoothed.abs())
            .map(|w| w[1].t)
            .collect()
    }

    /// Least-squares slope of `ln(stationarity)` against `t` over the last
    /// `window` records; a negative slope indicates linear convergence.
    pub fn log_residual_slope(&self, window: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .rev()
            .take(window)
            .filter(|r| r.stationarity > 0.0 && r.stationarity.is_finite())
            .map(|r| (r.t as f64, r.stationarity.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}
