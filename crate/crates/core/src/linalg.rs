//! Dense kernels used by every solver step: symmetric eigendecomposition,
//! spectral functions of symmetric matrices, the spectral norm, and a
//! Bartels–Stewart Sylvester solver built on the real Schur form.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, stored column-major.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{IrlsError, Result};
use crate::parallel::{self, Execution};

/// Real dense matrix, column-major.
pub type DenseMatrix = DMatrix<f64>;

const EIG_EPS: f64 = f64::EPSILON;
const EIG_MAX_ITER: usize = 1_000_000;
const SCHUR_MAX_ITER: usize = 100_000;
const SCHUR_DEFLATION_EPS: [f64; 4] = [f64::EPSILON, 1e-15, 1e-14, 1e-13];
pub(crate) const SYMMETRY_RTOL: f64 = 1e-8;
// trailing updates smaller than this many entries stay on the calling thread
const PARALLEL_UPDATE_MIN: usize = 1 << 15;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Orthogonal matrix whose columns are the eigenvectors.
    pub eigenvectors: DenseMatrix,
}

impl SymEigDecomposition {
    /// Builds `V · diag(f(λ)) · Vᵀ`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        let out = scaled * v.transpose();
        symmetrize(out)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.map_eigenvalues(|l| l)
    }
}

pub fn ensure_square(m: &DenseMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(IrlsError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Largest absolute entry, i.e. the entrywise ∞-norm.
pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn symmetrize(m: DenseMatrix) -> DenseMatrix {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input must be symmetric to `1e-8·‖S‖_F`; it is symmetrized before
/// decomposition so round-off asymmetry never leaks into the eigenvectors.
pub fn sym_eig(s: &DenseMatrix) -> Result<SymEigDecomposition> {
    ensure_square(s)?;
    let n = s.nrows();
    if n == 0 {
        return Ok(SymEigDecomposition {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DenseMatrix::zeros(0, 0),
        });
    }
    let asym = (s - s.transpose()).norm();
    let tol = SYMMETRY_RTOL * s.norm();
    if asym > tol {
        return Err(IrlsError::NotSymmetric {
            asymmetry: asym,
            tolerance: tol,
        });
    }
    let sym = symmetrize(s.clone());
    let eig = SymmetricEigen::try_new(sym, EIG_EPS, EIG_MAX_ITER)
        .ok_or(IrlsError::EigFailedToConverge)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DenseMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `(S + μ²I)^α` for symmetric positive semidefinite `S`.
///
/// Eigenvalues of `S` are clamped to be nonnegative before the shift.
pub fn sym_matrix_power(s: &DenseMatrix, mu: f64, alpha: f64) -> Result<DenseMatrix> {
    let eig = sym_eig(s)?;
    sym_matrix_power_from(&eig, mu, alpha)
}

/// Same as [`sym_matrix_power`] but reuses an existing decomposition of `S`.
pub fn sym_matrix_power_from(eig: &SymEigDecomposition, mu: f64, alpha: f64) -> Result<DenseMatrix> {
    let shift = mu * mu;
    if alpha < 0.0 && shift == 0.0 {
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(IrlsError::SingularShift { min_eigenvalue: min });
        }
    }
    Ok(eig.map_eigenvalues(|l| (l.max(0.0) + shift).powf(alpha)))
}

/// Largest singular value, from the smaller of the two Gram matrices.
pub fn spectral_norm(x: &DenseMatrix) -> Result<f64> {
    if x.is_empty() {
        return Err(IrlsError::EmptyMatrix);
    }
    let gram = if x.nrows() <= x.ncols() {
        x * x.transpose()
    } else {
        x.transpose() * x
    };
    let gram = symmetrize(gram);
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    Ok(top.max(0.0).sqrt())
}

/// Real Schur factorization `A = Q·T·Qᵀ` with `T` upper quasi-triangular,
/// plus the diagonal block layout of `T` (1×1 or 2×2 blocks).
#[derive(Debug, Clone)]
pub struct RealSchur {
    q: DenseMatrix,
    t: DenseMatrix,
    blocks: Vec<(usize, usize)>,
}

impl RealSchur {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        ensure_square(a)?;
        let n = a.nrows();
        if n == 0 {
            return Ok(RealSchur {
                q: DenseMatrix::zeros(0, 0),
                t: DenseMatrix::zeros(0, 0),
                blocks: Vec::new(),
            });
        }
        let triangular = (0..n).all(|c| (c + 1..n).all(|r| a[(r, c)] == 0.0));
        let (q, mut t) = if triangular {
            (DenseMatrix::identity(n, n), a.clone())
        } else {
            // nalgebra's deflation test can stall at machine epsilon on nearly
            // scalar matrices; loosen it a few notches before giving up.
            SCHUR_DEFLATION_EPS
                .iter()
                .find_map(|&eps| Schur::try_new(a.clone(), eps, SCHUR_MAX_ITER))
                .ok_or(IrlsError::SchurFailedToConverge)?
                .unpack()
        };

        let mut blocks = Vec::with_capacity(n);
        let mut k = 0;
        while k < n {
            if k + 1 < n && t[(k + 1, k)] != 0.0 {
                blocks.push((k, 2));
                k += 2;
            } else {
                blocks.push((k, 1));
                k += 1;
            }
        }
        // zero everything below the block diagonal so later products are exact
        for &(start, size) in &blocks {
            for c in start..start + size {
                for r in start + size..n {
                    t[(r, c)] = 0.0;
                }
            }
        }
        Ok(RealSchur { q, t, blocks })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn t(&self) -> &DenseMatrix {
        &self.t
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }
}

/// Solves `A·Z + Z·B = C` by Bartels–Stewart.
pub fn solve_sylvester(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    solve_sylvester_with(a, b, c, Execution::Parallel)
}

/// [`solve_sylvester`] with an explicit execution mode for the trailing
/// updates. `Parallel` only fans out once the update is large enough.
pub fn solve_sylvester_with(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix, exec: Execution) -> Result<DenseMatrix> {
    check_sylvester_dims(a, b, c)?;
    let sa = RealSchur::new(a)?;
    let sb = RealSchur::new(b)?;
    let z = solve_sylvester_schur(&sa, &sb, c, exec)?;
    check_sylvester_residual(a, b, c, &z)?;
    Ok(z)
}

/// Sylvester solver that keeps the Schur form of the left coefficient, for
/// repeated solves where only `B` and `C` change.
#[derive(Debug, Clone)]
pub struct SylvesterSolver {
    a: DenseMatrix,
    schur_a: RealSchur,
}

impl SylvesterSolver {
    pub fn new(a: DenseMatrix) -> Result<Self> {
        let schur_a = RealSchur::new(&a)?;
        Ok(SylvesterSolver { a, schur_a })
    }

    /// Solves `A·Z + Z·B = C`, verifying the residual postcondition.
    pub fn solve(&self, b: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
        check_sylvester_dims(&self.a, b, c)?;
        let sb = RealSchur::new(b)?;
        let z = solve_sylvester_schur(&self.schur_a, &sb, c, Execution::Parallel)?;
        check_sylvester_residual(&self.a, b, c, &z)?;
        Ok(z)
    }
}

/// Same solver with the right coefficient fixed: `A·Z + Z·B = C` where only
/// `A` and `C` change between calls.
#[derive(Debug, Clone)]
pub struct RightSylvesterSolver {
    b: DenseMatrix,
    schur_b: RealSchur,
}

impl RightSylvesterSolver {
    pub fn new(b: DenseMatrix) -> Result<Self> {
        let schur_b = RealSchur::new(&b)?;
        Ok(RightSylvesterSolver { b, schur_b })
    }

    pub fn solve(&self, a: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
        check_sylvester_dims(a, &self.b, c)?;
        let sa = RealSchur::new(a)?;
        let z = solve_sylvester_schur(&sa, &self.schur_b, c, Execution::Parallel)?;
        check_sylvester_residual(a, &self.b, c, &z)?;
        Ok(z)
    }
}

fn check_sylvester_dims(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<()> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() {
        return Err(IrlsError::DimensionMismatch(format!(
            "Sylvester coefficients must be square, got A {}x{} and B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if c.nrows() != a.nrows() || c.ncols() != b.nrows() {
        return Err(IrlsError::DimensionMismatch(format!(
            "right-hand side is {}x{}, expected {}x{}",
            c.nrows(),
            c.ncols(),
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(())
}

/// `‖AZ+ZB−C‖_F`.
pub fn sylvester_residual(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix, z: &DenseMatrix) -> f64 {
    (a * z + z * b - c).norm()
}

fn check_sylvester_residual(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix, z: &DenseMatrix) -> Result<()> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(IrlsError::NearSingularPencil("solution is not finite".into()));
    }
    let res = sylvester_residual(a, b, c, z);
    let bound = 1e-8 * (a.norm() + b.norm()) * z.norm() + 1e-12;
    if res > bound {
        return Err(IrlsError::NearSingularPencil(format!(
            "residual {res:e} exceeds {bound:e}"
        )));
    }
    Ok(())
}

/// Back-substitution on `T_A·Y + Y·T_B = Q_Aᵀ·C·Q_B`, then `Z = Q_A·Y·Q_Bᵀ`.
fn solve_sylvester_schur(sa: &RealSchur, sb: &RealSchur, c: &DenseMatrix, exec: Execution) -> Result<DenseMatrix> {
    let m = sa.dim();
    let n = sb.dim();
    if m == 0 || n == 0 {
        return Ok(DenseMatrix::zeros(m, n));
    }
    let ta = &sa.t;
    let tb = &sb.t;
    let scale = max_abs(ta).max(max_abs(tb)).max(f64::MIN_POSITIVE);
    let pivot_floor = 64.0 * f64::EPSILON * scale;

    // F holds the right-hand side and is overwritten by Y block by block.
    let mut f = sa.q.transpose() * c * &sb.q;

    for (jb, &(cj, sj)) in sb.blocks.iter().enumerate() {
        // Column block j: T_A·Y_j + Y_j·S_jj = F_j (F_j already updated).
        for &(rk, sk) in sa.blocks.iter().rev() {
            let w = solve_small_block(ta, rk, sk, tb, cj, sj, &f, pivot_floor)?;
            for (dc, col) in (cj..cj + sj).enumerate() {
                for (dr, row) in (rk..rk + sk).enumerate() {
                    f[(row, col)] = w[dr + sk * dc];
                }
                // rows above this block: F[0..rk, col] -= T_A[0..rk, rk..rk+sk] · w
                for (dr, tcol) in (rk..rk + sk).enumerate() {
                    let wv = w[dr + sk * dc];
                    if wv == 0.0 {
                        continue;
                    }
                    for row in 0..rk {
                        f[(row, col)] -= ta[(row, tcol)] * wv;
                    }
                }
            }
        }
        // Remaining column blocks: F[:, later] -= Y_j · T_B[j, later]
        if jb + 1 < sb.blocks.len() {
            let next = cj + sj;
            let exec = if m * (n - next) >= PARALLEL_UPDATE_MIN {
                exec
            } else {
                Execution::Sequential
            };
            let (left, right) = f.as_mut_slice().split_at_mut(next * m);
            let solved = &left[cj * m..];
            parallel::for_each_chunk_mut(exec, right, m, |i, col| {
                let later = next + i;
                for (s, y) in solved.chunks(m).enumerate() {
                    let coeff = tb[(cj + s, later)];
                    if coeff == 0.0 {
                        continue;
                    }
                    for (dst, v) in col.iter_mut().zip(y) {
                        *dst -= v * coeff;
                    }
                }
            });
        }
    }

    Ok(&sa.q * f * sb.q.transpose())
}

/// Solves `T_kk·W + W·S_jj = G` for a block of size at most 2×2, returning
/// `vec(W)` in column-major order.
#[allow(clippy::too_many_arguments)]
fn solve_small_block(
    ta: &DenseMatrix,
    rk: usize,
    sk: usize,
    tb: &DenseMatrix,
    cj: usize,
    sj: usize,
    g: &DenseMatrix,
    pivot_floor: f64,
) -> Result<[f64; 4]> {
    if sk == 1 && sj == 1 {
        let denom = ta[(rk, rk)] + tb[(cj, cj)];
        if denom.abs() <= pivot_floor {
            return Err(IrlsError::NearSingularPencil(format!(
                "eigenvalues {} and {} of A and -B coincide",
                ta[(rk, rk)],
                -tb[(cj, cj)]
            )));
        }
        return Ok([g[(rk, cj)] / denom, 0.0, 0.0, 0.0]);
    }
    // (I_s ⊗ T + Sᵀ ⊗ I_r) vec(W) = vec(G)
    let dim = sk * sj;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for c in 0..sj {
        for r in 0..sk {
            let row = r + sk * c;
            rhs[row] = g[(rk + r, cj + c)];
            for r2 in 0..sk {
                k[(row, r2 + sk * c)] += ta[(rk + r, rk + r2)];
            }
            for c2 in 0..sj {
                k[(row, r + sk * c2)] += tb[(cj + c2, cj + c)];
            }
        }
    }
    let lu = k.full_piv_lu();
    let u = lu.u();
    let min_pivot = (0..dim).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if min_pivot <= pivot_floor {
        return Err(IrlsError::NearSingularPencil(format!(
            "{sk}x{sj} diagonal block system has pivot {min_pivot:e}"
        )));
    }
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| IrlsError::NearSingularPencil("block solve failed".into()))?;
    let mut out = [0.0; 4];
    out[..dim].copy_from_slice(sol.as_slice());
    Ok(out)
}
