//! Exact and smoothed sparsity / low-rank penalties and their IRLS weights.
//!
//! Every smoothed penalty has the form `Σ g(s_i + μ²)` where `s_i` is a
//! squared magnitude (an entry, a group, a column, or an eigenvalue of a Gram
//! matrix) and `g` is concave on `(0, ∞)`. The IRLS weight attached to `s_i`
//! is `g'(s_i + μ²)` rescaled so that, for the power family, the gradient of
//! the penalty reads `p·W·z`.

use serde::{Deserialize, Serialize};

use crate::error::{IrlsError, Result};
use crate::linalg::{sym_eig, symmetrize, DenseMatrix};

/// Which concave function is applied to the squared magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    /// `g(x) = x^{p/2}`, i.e. `ℓp` / Schatten-p / `ℓ2,q` penalties.
    #[default]
    Power,
    /// `g(x) = log(x)`.
    Logarithm,
}

/// A concave penalty on squared magnitudes, with its exponent resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Power(f64),
    Logarithm,
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(IrlsError::InvalidExponent(p))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(IrlsError::NonPositiveMu(mu))
    }
}

impl Penalty {
    pub fn new(family: PenaltyFamily, exponent: f64) -> Result<Self> {
        match family {
            PenaltyFamily::Power => {
                check_exponent(exponent)?;
                Ok(Penalty::Power(exponent))
            }
            PenaltyFamily::Logarithm => Ok(Penalty::Logarithm),
        }
    }

    /// `g(s)` for a shifted squared magnitude `s`.
    pub fn value(self, s: f64) -> f64 {
        match self {
            Penalty::Power(p) => {
                if s <= 0.0 {
                    0.0
                } else {
                    s.powf(0.5 * p)
                }
            }
            Penalty::Logarithm => s.ln(),
        }
    }

    /// `g'(s)`.
    pub fn derivative(self, s: f64) -> f64 {
        match self {
            Penalty::Power(p) => 0.5 * p * s.powf(0.5 * p - 1.0),
            Penalty::Logarithm => 1.0 / s,
        }
    }

    /// Multiplier `c` in `gradient = c·W·z`; `p` for the power family and 2
    /// for the logarithm.
    pub fn gradient_scale(self) -> f64 {
        match self {
            Penalty::Power(p) => p,
            Penalty::Logarithm => 2.0,
        }
    }

    /// IRLS weight `2·g'(s)/c`; equals `s^{p/2−1}` for the power family.
    pub fn weight(self, s: f64) -> f64 {
        match self {
            Penalty::Power(p) => s.powf(0.5 * p - 1.0),
            Penalty::Logarithm => 1.0 / s,
        }
    }
}

/// Partition of `0..len` into disjoint nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    len: usize,
}

impl GroupStructure {
    pub fn new(groups: Vec<Vec<usize>>, len: usize) -> Result<Self> {
        let mut seen = vec![false; len];
        for g in &groups {
            if g.is_empty() {
                return Err(IrlsError::InvalidGroups {
                    len,
                    reason: "empty group".into(),
                });
            }
            for &i in g {
                if i >= len {
                    return Err(IrlsError::InvalidGroups {
                        len,
                        reason: format!("index {i} out of range"),
                    });
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(IrlsError::InvalidGroups {
                        len,
                        reason: format!("index {i} appears twice"),
                    });
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(IrlsError::InvalidGroups {
                len,
                reason: format!("index {missing} not covered"),
            });
        }
        Ok(GroupStructure { groups, len })
    }

    pub fn singletons(len: usize) -> Self {
        GroupStructure {
            groups: (0..len).map(|i| vec![i]).collect(),
            len,
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn nonempty(m: &DenseMatrix) -> Result<()> {
    if m.is_empty() {
        Err(IrlsError::EmptyMatrix)
    } else {
        Ok(())
    }
}

/// Eigenvalues of `ZᵀZ`, clamped at zero.
fn gram_eigenvalues(z: &DenseMatrix) -> Result<Vec<f64>> {
    let gram = symmetrize(z.transpose() * z);
    let eig = sym_eig(&gram)?;
    Ok(eig.eigenvalues.iter().map(|l| l.max(0.0)).collect())
}

/// `Σ σ_i(Z)^p`, evaluated as `Tr((ZᵀZ)^{p/2})` on the smaller Gram side.
pub fn schatten_p(z: &DenseMatrix, p: f64) -> Result<f64> {
    nonempty(z)?;
    check_exponent(p)?;
    let gram = if z.nrows() < z.ncols() {
        symmetrize(z * z.transpose())
    } else {
        symmetrize(z.transpose() * z)
    };
    let eig = sym_eig(&gram)?;
    Ok(eig.eigenvalues.iter().map(|l| Penalty::Power(p).value(l.max(0.0))).sum())
}

/// `Σ_j ‖E_j‖₂^q` over columns.
pub fn l2q_norm(e: &DenseMatrix, q: f64) -> Result<f64> {
    nonempty(e)?;
    check_exponent(q)?;
    Ok(e.column_iter()
        .map(|c| Penalty::Power(q).value(c.norm_squared()))
        .sum())
}

/// `Σ_i ‖E^i‖₂` over rows.
pub fn l12_norm(e: &DenseMatrix) -> Result<f64> {
    nonempty(e)?;
    Ok(e.row_iter().map(|r| r.norm()).sum())
}

/// `Tr((ZᵀZ + μ²I)^{p/2})`.
pub fn smoothed_schatten(z: &DenseMatrix, p: f64, mu: f64) -> Result<f64> {
    check_exponent(p)?;
    smoothed_low_rank(z, Penalty::Power(p), mu)
}

/// `Tr g(ZᵀZ + μ²I)` for any penalty.
pub fn smoothed_low_rank(z: &DenseMatrix, penalty: Penalty, mu: f64) -> Result<f64> {
    nonempty(z)?;
    check_mu(mu)?;
    let shift = mu * mu;
    Ok(gram_eigenvalues(z)?
        .into_iter()
        .map(|l| penalty.value(l + shift))
        .sum())
}

/// `Σ_i (‖E_i‖₂² + μ²)^{q/2}` over columns.
pub fn smoothed_l2q(e: &DenseMatrix, q: f64, mu: f64) -> Result<f64> {
    check_exponent(q)?;
    smoothed_column_sparse(e, Penalty::Power(q), mu)
}

pub fn smoothed_column_sparse(e: &DenseMatrix, penalty: Penalty, mu: f64) -> Result<f64> {
    nonempty(e)?;
    check_mu(mu)?;
    let shift = mu * mu;
    Ok(e.column_iter()
        .map(|c| penalty.value(c.norm_squared() + shift))
        .sum())
}

/// `Σ_i (‖E^i‖₂² + μ²)^{1/2}` over rows.
pub fn smoothed_l12(e: &DenseMatrix, mu: f64) -> Result<f64> {
    nonempty(e)?;
    check_mu(mu)?;
    let shift = mu * mu;
    Ok(e.row_iter().map(|r| (r.norm_squared() + shift).sqrt()).sum())
}

fn check_lrr_dims(z: &DenseMatrix, x: &DenseMatrix) -> Result<()> {
    let n = x.ncols();
    if z.nrows() != n || z.ncols() != n {
        return Err(IrlsError::DimensionMismatch(format!(
            "Z is {}x{} but X has {} columns",
            z.nrows(),
            z.ncols(),
            n
        )));
    }
    Ok(())
}

/// Smoothed LRR objective `Tr g_p(ZᵀZ+μ²I) + λ Σ_i g_q(‖(XZ−X)_i‖²+μ²)`.
///
/// At `μ = 0` the exact (unsmoothed) penalties are used.
pub fn lrr_objective_with(
    z: &DenseMatrix,
    x: &DenseMatrix,
    low_rank: Penalty,
    sparse: Penalty,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    check_lrr_dims(z, x)?;
    nonempty(z)?;
    if mu < 0.0 || !mu.is_finite() {
        return Err(IrlsError::NonPositiveMu(mu));
    }
    let e = x * z - x;
    let shift = mu * mu;
    let lr: f64 = gram_eigenvalues(z)?
        .into_iter()
        .map(|l| low_rank.value(l + shift))
        .sum();
    let sp: f64 = e
        .column_iter()
        .map(|c| sparse.value(c.norm_squared() + shift))
        .sum();
    Ok(lr + lambda * sp)
}

/// `J(Z, μ)` for the Schatten-p / `ℓ2,q` model.
pub fn lrr_objective(z: &DenseMatrix, x: &DenseMatrix, p: f64, q: f64, lambda: f64, mu: f64) -> Result<f64> {
    check_exponent(p)?;
    check_exponent(q)?;
    if mu == 0.0 {
        check_lrr_dims(z, x)?;
        let e = x * z - x;
        return Ok(schatten_p(z, p)? + lambda * l2q_norm(&e, q)?);
    }
    lrr_objective_with(z, x, Penalty::Power(p), Penalty::Power(q), lambda, mu)
}

/// `Σ_i (z_i² + μ²)^{p/2}`.
pub fn smoothed_lp_vector(z: &[f64], p: f64, mu: f64) -> Result<f64> {
    check_exponent(p)?;
    check_mu(mu)?;
    Ok(z.iter().map(|v| (v * v + mu * mu).powf(0.5 * p)).sum())
}

/// Diagonal of `W` with `W_ii = (z_i² + μ²)^{p/2−1}`.
pub fn weight_lp_vector(z: &[f64], p: f64, mu: f64) -> Result<Vec<f64>> {
    check_exponent(p)?;
    check_mu(mu)?;
    Ok(z.iter().map(|v| (v * v + mu * mu).powf(0.5 * p - 1.0)).collect())
}

fn check_group_len(z: &[f64], groups: &GroupStructure) -> Result<()> {
    if z.len() != groups.len() {
        return Err(IrlsError::InvalidGroups {
            len: groups.len(),
            reason: format!("vector has length {}", z.len()),
        });
    }
    Ok(())
}

fn group_sq_norm(z: &[f64], g: &[usize]) -> f64 {
    g.iter().map(|&i| z[i] * z[i]).sum()
}

/// `Σ_i (‖z_{g_i}‖₂² + μ²)^{p/2}` for nonoverlapping groups.
pub fn smoothed_group_lasso(z: &[f64], groups: &GroupStructure, p: f64, mu: f64) -> Result<f64> {
    check_exponent(p)?;
    check_mu(mu)?;
    check_group_len(z, groups)?;
    Ok(groups
        .groups()
        .iter()
        .map(|g| (group_sq_norm(z, g) + mu * mu).powf(0.5 * p))
        .sum())
}

/// Block-constant diagonal weights `(‖z_{g}‖₂² + μ²)^{p/2−1}` for every index
/// of group `g`.
pub fn weight_group_lasso(z: &[f64], groups: &GroupStructure, p: f64, mu: f64) -> Result<Vec<f64>> {
    check_exponent(p)?;
    check_mu(mu)?;
    check_group_len(z, groups)?;
    let mut w = vec![0.0; z.len()];
    for g in groups.groups() {
        let wg = (group_sq_norm(z, g) + mu * mu).powf(0.5 * p - 1.0);
        for &i in g {
            w[i] = wg;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn schatten_cases() {
        let z = DenseMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]));
        assert!(close(schatten_p(&z, 1.0).unwrap(), 7.0, 1e-12));
        assert_eq!(schatten_p(&DenseMatrix::zeros(3, 3), 0.5).unwrap(), 0.0);
        assert!(matches!(schatten_p(&z, 2.5), Err(IrlsError::InvalidExponent(_))));
        assert!(matches!(schatten_p(&z, 0.0), Err(IrlsError::InvalidExponent(_))));
        assert!(matches!(
            schatten_p(&DenseMatrix::zeros(0, 0), 1.0),
            Err(IrlsError::EmptyMatrix)
        ));
    }

    #[test]
    fn schatten_matches_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = random(5, 5, &mut rng);
        let oracle: f64 = z.clone().svd(false, false).singular_values.iter().map(|s| s.powf(0.5)).sum();
        assert!(close(schatten_p(&z, 0.5).unwrap(), oracle, 1e-9));
    }

    #[test]
    fn l2q_cases() {
        let e = DenseMatrix::from_column_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
        assert!(close(l2q_norm(&e, 1.0).unwrap(), 5.0, 1e-14));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let e = random(4, 6, &mut rng);
        assert!(close(l2q_norm(&e, 2.0).unwrap(), e.norm_squared(), 1e-12));
        let mut oracle = 0.0;
        for j in 0..6 {
            let mut s = 0.0;
            for i in 0..4 {
                s += e[(i, j)] * e[(i, j)];
            }
            oracle += s.sqrt().powf(0.7);
        }
        assert!(close(l2q_norm(&e, 0.7).unwrap(), oracle, 1e-12));
        assert!(l2q_norm(&e, -1.0).is_err());
    }

    #[test]
    fn l12_cases() {
        let e = DenseMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
        assert!(close(l12_norm(&e).unwrap(), 5.0, 1e-14));
        assert!(close(l12_norm(&DenseMatrix::identity(2, 2)).unwrap(), 2.0, 1e-14));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let e = random(5, 5, &mut rng);
        assert!(close(l12_norm(&e).unwrap(), l2q_norm(&e.transpose(), 1.0).unwrap(), 1e-13));
    }

    #[test]
    fn smoothed_schatten_cases() {
        let z = DenseMatrix::from_element(1, 1, 3.0);
        assert!(close(smoothed_schatten(&z, 1.0, 4.0).unwrap(), 5.0, 1e-13));
        let n = 4;
        let v = smoothed_schatten(&DenseMatrix::zeros(n, n), 0.6, 0.5).unwrap();
        assert!(close(v, n as f64 * 0.5f64.powf(0.6), 1e-13));
        assert!(matches!(smoothed_schatten(&z, 1.0, 0.0), Err(IrlsError::NonPositiveMu(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let z = random(5, 5, &mut rng);
        for p in [0.5, 1.0, 1.5] {
            let exact = schatten_p(&z, p).unwrap();
            assert!(smoothed_schatten(&z, p, 0.1).unwrap() >= exact);
            assert!(close(smoothed_schatten(&z, p, 1e-8).unwrap(), exact, 1e-6));
        }
    }

    #[test]
    fn smoothed_l2q_cases() {
        let e = DenseMatrix::zeros(3, 4);
        assert!(close(smoothed_l2q(&e, 1.0, 0.2).unwrap(), 4.0 * 0.2, 1e-14));
        let col = DenseMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        assert!(close(smoothed_l2q(&col, 1.0, 1e-12).unwrap(), 5.0, 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let e = random(4, 6, &mut rng);
        assert!(smoothed_l2q(&e, 0.8, 0.05).unwrap() >= l2q_norm(&e, 0.8).unwrap());
    }

    #[test]
    fn lrr_objective_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let x = random(4, 5, &mut rng);
        let i = DenseMatrix::identity(5, 5);
        assert!(close(lrr_objective(&i, &x, 1.0, 1.0, 0.7, 0.0).unwrap(), 5.0, 1e-12));
        let zero = DenseMatrix::zeros(5, 5);
        let expect = 0.7 * l2q_norm(&x, 0.6).unwrap();
        assert!(close(lrr_objective(&zero, &x, 1.0, 0.6, 0.7, 0.0).unwrap(), expect, 1e-12));

        let z = random(5, 5, &mut rng);
        let e = &x * &z - &x;
        let parts = smoothed_schatten(&z, 0.8, 0.3).unwrap() + 0.7 * smoothed_l2q(&e, 1.2, 0.3).unwrap();
        assert!(close(lrr_objective(&z, &x, 0.8, 1.2, 0.7, 0.3).unwrap(), parts, 1e-12));

        let bad = DenseMatrix::zeros(4, 4);
        assert!(matches!(
            lrr_objective(&bad, &x, 1.0, 1.0, 1.0, 0.1),
            Err(IrlsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn lp_vector_cases() {
        let z = [0.0; 4];
        assert!(close(smoothed_lp_vector(&z, 1.0, 0.3).unwrap(), 1.2, 1e-14));
        for w in weight_lp_vector(&z, 1.0, 0.3).unwrap() {
            assert!(close(w, 1.0 / 0.3, 1e-14));
        }
        assert!(close(smoothed_lp_vector(&[3.0], 1.0, 4.0).unwrap(), 5.0, 1e-14));
        assert!(close(weight_lp_vector(&[3.0], 1.0, 4.0).unwrap()[0], 0.2, 1e-14));
    }

    fn central_diff(f: impl Fn(&[f64]) -> f64, z: &[f64], i: usize, h: f64) -> f64 {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[i] += h;
        zm[i] -= h;
        (f(&zp) - f(&zm)) / (2.0 * h)
    }

    #[test]
    fn lp_vector_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for p in [0.5, 1.0, 1.5] {
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mu = 0.3;
            let w = weight_lp_vector(&z, p, mu).unwrap();
            for i in 0..z.len() {
                let fd = central_diff(|v| smoothed_lp_vector(v, p, mu).unwrap(), &z, i, 1e-5);
                let an = p * w[i] * z[i];
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "p={p} i={i}");
            }
        }
    }

    #[test]
    fn group_lasso_reductions() {
        let z = [1.0, -2.0, 0.5, 3.0];
        let whole = GroupStructure::new(vec![vec![0, 1, 2, 3]], 4).unwrap();
        let sq: f64 = z.iter().map(|v| v * v).sum();
        let v = smoothed_group_lasso(&z, &whole, 1.0, 0.2).unwrap();
        assert!(close(v, (sq + 0.04).sqrt(), 1e-14));

        let single = GroupStructure::singletons(4);
        for p in [0.5, 1.0, 1.7] {
            assert!(close(
                smoothed_group_lasso(&z, &single, p, 0.2).unwrap(),
                smoothed_lp_vector(&z, p, 0.2).unwrap(),
                1e-14
            ));
            assert_eq!(
                weight_group_lasso(&z, &single, p, 0.2).unwrap(),
                weight_lp_vector(&z, p, 0.2).unwrap()
            );
        }
    }

    #[test]
    fn group_lasso_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let groups = GroupStructure::new(vec![vec![0, 3], vec![1], vec![2, 4, 5]], 6).unwrap();
        for p in [0.5, 1.0, 1.5] {
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mu = 0.2;
            let w = weight_group_lasso(&z, &groups, p, mu).unwrap();
            for i in 0..6 {
                let fd = central_diff(|v| smoothed_group_lasso(v, &groups, p, mu).unwrap(), &z, i, 1e-5);
                let an = p * w[i] * z[i];
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0));
            }
        }
    }

    #[test]
    fn invalid_groups_rejected() {
        assert!(GroupStructure::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(GroupStructure::new(vec![vec![0, 1]], 3).is_err());
        assert!(GroupStructure::new(vec![vec![0, 1], vec![]], 2).is_err());
        assert!(GroupStructure::new(vec![vec![0, 5]], 2).is_err());
        let g = GroupStructure::singletons(3);
        assert!(smoothed_group_lasso(&[1.0, 2.0], &g, 1.0, 0.1).is_err());
    }

    #[test]
    fn log_penalty_weight_is_scaled_derivative() {
        let pen = Penalty::Logarithm;
        for s in [0.1, 1.0, 7.0] {
            let w = pen.weight(s);
            assert!(close(2.0 * pen.derivative(s) / pen.gradient_scale(), w, 1e-14));
        }
        let pen = Penalty::Power(0.8);
        for s in [0.1, 1.0, 7.0] {
            assert!(close(2.0 * pen.derivative(s) / pen.gradient_scale(), pen.weight(s), 1e-14));
        }
    }
}
