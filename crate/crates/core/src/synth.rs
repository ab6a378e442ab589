//! Synthetic ground-truth datasets.
//!
//! All randomness comes from ChaCha20 seeded with the user seed; bases,
//! coefficients, the corruption mask and the noise each draw from their own
//! stream, so changing the noise level leaves the clean data untouched.

use log::warn;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{IrlsError, Result};
use crate::linalg::DenseMatrix;

const STREAM_BASES: u64 = 0;
const STREAM_COEFFS: u64 = 1;
const STREAM_MASK: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Name of the generator, recorded in dataset sidecars.
pub const RNG_ALGORITHM: &str = "ChaCha20";

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    // fill column-major explicitly so the draw order is part of the format
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_vec(rows, cols, data)
}

fn haar_rotation<R: Rng>(rng: &mut R, d: usize) -> DenseMatrix {
    let g = gaussian_matrix(rng, d, d);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

/// Haar-distributed rotation: orthogonal with determinant +1.
pub fn random_rotation(d: usize, seed: u64) -> Result<DenseMatrix> {
    if d == 0 {
        return Err(IrlsError::InvalidParams("rotation dimension must be at least 1".into()));
    }
    Ok(haar_rotation(&mut stream(seed, STREAM_BASES), d))
}

/// How the corruption standard deviation relates to the column norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Per-entry std `noise_scale·‖x‖₂/√d`: the perturbation norm is about
    /// `noise_scale·‖x‖₂`.
    #[default]
    ColumnNorm,
    /// Per-entry std `noise_scale·‖x‖₂`.
    PerEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceParams {
    pub k: usize,
    pub r: usize,
    pub d: usize,
    pub n_i: usize,
    pub corruption_frac: f64,
    pub noise_scale: f64,
    pub seed: u64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
}

impl SubspaceParams {
    /// `k = 15` subspaces of rank 5 in 200 dimensions, 20 points each, 20%
    /// of the columns corrupted at noise level 0.1.
    pub fn reference(seed: u64) -> Self {
        SubspaceParams {
            k: 15,
            r: 5,
            d: 200,
            n_i: 20,
            corruption_frac: 0.2,
            noise_scale: 0.1,
            seed,
            noise_mode: NoiseMode::ColumnNorm,
        }
    }

    pub fn n(&self) -> usize {
        self.k * self.n_i
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.r == 0 || self.d == 0 || self.n_i == 0 {
            return Err(IrlsError::InvalidParams("k, r, d and n_i must be positive".into()));
        }
        if self.r > self.d {
            return Err(IrlsError::InvalidParams(format!("rank {} exceeds dimension {}", self.r, self.d)));
        }
        if !(0.0..=1.0).contains(&self.corruption_frac) {
            return Err(IrlsError::InvalidParams(format!(
                "corruption_frac must lie in [0, 1], got {}",
                self.corruption_frac
            )));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(IrlsError::InvalidParams(format!(
                "noise_scale must be finite and nonnegative, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceDataset {
    pub x: DenseMatrix,
    /// Subspace index of each column, `0..k`.
    pub labels: Vec<usize>,
    /// Columns selected for corruption.
    pub corrupted: Vec<bool>,
    pub clean_x: DenseMatrix,
    pub params: SubspaceParams,
}

impl SubspaceDataset {
    /// Columns that actually differ from the clean data; empty when the
    /// noise level is zero.
    pub fn effective_corrupted(&self) -> Vec<usize> {
        if self.params.noise_scale == 0.0 {
            return Vec::new();
        }
        (0..self.corrupted.len()).filter(|&j| self.corrupted[j]).collect()
    }
}

fn corruption_count(frac: f64, n: usize) -> usize {
    ((frac * n as f64).round() as usize).min(n)
}

fn choose_mask(seed: u64, n: usize, count: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    let mut picked = index::sample(&mut stream(seed, STREAM_MASK), n, count).into_vec();
    picked.sort_unstable();
    for j in picked {
        mask[j] = true;
    }
    mask
}

/// Union of `k` rank-`r` subspaces with bases `U₁` (random orthonormal) and
/// `U_{i+1} = T·U_i` for a random rotation `T`; block `i` is `U_i·Q_i` with
/// standard-normal `Q_i`.
pub fn gen_subspaces(params: &SubspaceParams) -> Result<SubspaceDataset> {
    params.validate()?;
    let SubspaceParams { k, r, d, n_i, .. } = *params;
    if k * r > d {
        warn!("k·r = {} exceeds d = {}; subspaces cannot be independent", k * r, d);
    }
    let n = params.n();

    let mut bases = stream(params.seed, STREAM_BASES);
    let t = haar_rotation(&mut bases, d);
    let mut u = haar_rotation(&mut bases, d).columns(0, r).into_owned();

    let mut coeffs = stream(params.seed, STREAM_COEFFS);
    let mut clean_x = DenseMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..k {
        let q = gaussian_matrix(&mut coeffs, r, n_i);
        clean_x.columns_mut(i * n_i, n_i).copy_from(&(&u * q));
        labels.extend(std::iter::repeat_n(i, n_i));
        u = &t * u;
    }

    let corrupted = choose_mask(params.seed, n, corruption_count(params.corruption_frac, n));
    let mut x = clean_x.clone();
    if params.noise_scale > 0.0 {
        let mut noise = stream(params.seed, STREAM_NOISE);
        for j in (0..n).filter(|&j| corrupted[j]) {
            let norm = clean_x.column(j).norm();
            let std = match params.noise_mode {
                NoiseMode::ColumnNorm => params.noise_scale * norm / (d as f64).sqrt(),
                NoiseMode::PerEntry => params.noise_scale * norm,
            };
            for i in 0..d {
                let g: f64 = noise.sample(StandardNormal);
                x[(i, j)] += std * g;
            }
        }
    }

    Ok(SubspaceDataset {
        x,
        labels,
        corrupted,
        clean_x,
        params: params.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCorruptionParams {
    pub d: usize,
    pub n: usize,
    pub rank: usize,
    pub corruption_frac: f64,
    /// Per-entry noise std on corrupted rows, relative to the RMS entry of
    /// the clean matrix.
    pub noise_scale: f64,
    pub seed: u64,
}

impl RowCorruptionParams {
    /// Rank 5, 40×100, a fifth of the rows corrupted.
    pub fn reference(seed: u64) -> Self {
        RowCorruptionParams {
            d: 40,
            n: 100,
            rank: 5,
            corruption_frac: 0.2,
            noise_scale: 1.0,
            seed,
        }
    }
}

/// Low-rank data with whole rows (features) corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct RowCorruptedDataset {
    pub x: DenseMatrix,
    pub clean_x: DenseMatrix,
    pub corrupted_rows: Vec<bool>,
    pub params: RowCorruptionParams,
}

/// `X = U·V + E` with `U` d×rank orthonormal, `V` standard normal, and `E`
/// Gaussian on a random subset of rows.
pub fn gen_row_corrupted(params: &RowCorruptionParams) -> Result<RowCorruptedDataset> {
    let RowCorruptionParams { d, n, rank, .. } = *params;
    if d == 0 || n == 0 || rank == 0 || rank > d {
        return Err(IrlsError::InvalidParams(format!(
            "need 0 < rank <= d and n > 0, got d={d}, n={n}, rank={rank}"
        )));
    }
    if !(0.0..=1.0).contains(&params.corruption_frac) || !(params.noise_scale.is_finite() && params.noise_scale >= 0.0) {
        return Err(IrlsError::InvalidParams("corruption_frac must lie in [0, 1] and noise_scale be nonnegative".into()));
    }
    let u = haar_rotation(&mut stream(params.seed, STREAM_BASES), d).columns(0, rank).into_owned();
    let v = gaussian_matrix(&mut stream(params.seed, STREAM_COEFFS), rank, n);
    let clean_x = u * v;
    let corrupted_rows = choose_mask(params.seed, d, corruption_count(params.corruption_frac, d));

    let rms = clean_x.norm() / ((d * n) as f64).sqrt();
    let std = params.noise_scale * rms;
    let mut noise = stream(params.seed, STREAM_NOISE);
    let mut x = clean_x.clone();
    for j in 0..n {
        for i in (0..d).filter(|&i| corrupted_rows[i]) {
            let g: f64 = noise.sample(StandardNormal);
            x[(i, j)] += std * g;
        }
    }
    Ok(RowCorruptedDataset {
        x,
        clean_x,
        corrupted_rows,
        params: params.clone(),
    })
}
