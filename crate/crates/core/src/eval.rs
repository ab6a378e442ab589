//! Segmentation from a representation matrix: affinity, normalized spectral
//! clustering, and permutation-matched accuracy.

use std::collections::BTreeMap;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{IrlsError, Result};
use crate::linalg::{ensure_square, sym_eig, DenseMatrix, SYMMETRY_RTOL};
use crate::parallel::{self, Execution};

/// `W = (|Z| + |Zᵀ|)/2`.
pub fn affinity_from_z(z: &DenseMatrix) -> Result<DenseMatrix> {
    ensure_square(z)?;
    let n = z.nrows();
    Ok(DenseMatrix::from_fn(n, n, |i, j| 0.5 * (z[(i, j)].abs() + z[(j, i)].abs())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Lloyd iterations stop once the inertia drops by no more than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 20,
            max_iter: 300,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// k×dim, one centroid per row.
    pub centroids: DenseMatrix,
    pub inertia: f64,
    /// Restart that produced this result.
    pub restart: usize,
}

fn sq_dist(points: &DenseMatrix, i: usize, centroids: &DenseMatrix, c: usize) -> f64 {
    (0..points.ncols()).map(|j| (points[(i, j)] - centroids[(c, j)]).powi(2)).sum()
}

fn nearest(points: &DenseMatrix, i: usize, centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist(points, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds(points: &DenseMatrix, k: usize, rng: &mut ChaCha20Rng) -> DenseMatrix {
    let n = points.nrows();
    let mut centroids = DenseMatrix::zeros(k, points.ncols());
    centroids.row_mut(0).copy_from(&points.row(rng.random_range(0..n)));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from(&points.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &centroids, c));
        }
    }
    centroids
}

fn lloyd(points: &DenseMatrix, mut centroids: DenseMatrix, config: &KMeansConfig) -> (Vec<usize>, DenseMatrix, f64) {
    let (n, dim, k) = (points.nrows(), points.ncols(), centroids.nrows());
    let mut labels = vec![0; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..config.max_iter.max(1) {
        let mut next = 0.0;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points, i, &centroids);
            labels[i] = c;
            dists[i] = d;
            next += d;
        }
        let mut sums = DenseMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut row = sums.row_mut(labels[i]);
            row += points.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).copy_from(&mean);
            } else {
                // move an empty centroid onto the worst-served point
                let far = (0..n).fold(0, |b, i| if dists[i] > dists[b] { i } else { b });
                centroids.row_mut(c).copy_from(&points.row(far));
                dists[far] = 0.0;
            }
        }
        let done = inertia - next <= config.tol;
        inertia = next;
        if done {
            break;
        }
    }
    let mut final_inertia = 0.0;
    for i in 0..n {
        let (c, d) = nearest(points, i, &centroids);
        labels[i] = c;
        final_inertia += d;
    }
    (labels, centroids, final_inertia)
}

/// k-means++ with independent restarts; each restart `r` uses ChaCha20
/// stream `r` of `seed`. The lowest inertia wins, ties going to the earliest
/// restart, so the result does not depend on `exec`.
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64, config: &KMeansConfig, exec: Execution) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(IrlsError::InvalidParams(format!("k = {k} must lie in 1..={n}")));
    }
    if config.restarts == 0 {
        return Err(IrlsError::InvalidParams("k-means needs at least one restart".into()));
    }
    let runs = parallel::map_range(exec, config.restarts, |r| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let seeds = plus_plus_seeds(points, k, &mut rng);
        lloyd(points, seeds, config)
    });
    let (restart, (labels, centroids, inertia)) = runs
        .into_iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 .2 < best.1 .2 { cur } else { best })
        .expect("at least one restart");
    Ok(KMeansResult {
        labels,
        centroids,
        inertia,
        restart,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub kmeans: KMeansConfig,
    /// Floor applied to node degrees so isolated nodes stay finite.
    pub degree_eps: f64,
    pub exec: Execution,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            kmeans: KMeansConfig::default(),
            degree_eps: 1e-12,
            exec: Execution::Parallel,
        }
    }
}

/// Row-normalized bottom-`k` eigenvectors of `I − D^{-1/2}WD^{-1/2}`.
pub fn spectral_embedding(w: &DenseMatrix, k: usize, degree_eps: f64) -> Result<DenseMatrix> {
    ensure_square(w)?;
    let n = w.nrows();
    if n == 0 {
        return Err(IrlsError::EmptyMatrix);
    }
    if k == 0 || k > n {
        return Err(IrlsError::InvalidParams(format!("k = {k} must lie in 1..={n}")));
    }
    if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(IrlsError::InvalidParams(format!("affinity entries must be finite and nonnegative, found {v}")));
    }
    let scale = w.amax().max(f64::MIN_POSITIVE);
    let asym = (w - w.transpose()).amax();
    if asym > SYMMETRY_RTOL * scale {
        return Err(IrlsError::NotSymmetric {
            asymmetry: asym,
            tolerance: SYMMETRY_RTOL * scale,
        });
    }
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / w.row(i).sum().max(degree_eps).sqrt()).collect();
    let lap = DenseMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - inv_sqrt[i] * 0.5 * (w[(i, j)] + w[(j, i)]) * inv_sqrt[j]
    });
    // eigenvalues come back in descending order
    let eig = sym_eig(&lap)?;
    let mut emb = eig.eigenvectors.columns(n - k, k).into_owned();
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(emb)
}

/// Normalized spectral clustering of an affinity matrix into `k` groups.
/// Labels are `0..k`.
pub fn spectral_cluster(w: &DenseMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    spectral_cluster_with(w, k, seed, &SpectralConfig::default())
}

pub fn spectral_cluster_with(w: &DenseMatrix, k: usize, seed: u64, config: &SpectralConfig) -> Result<Vec<usize>> {
    let emb = spectral_embedding(w, k, config.degree_eps)?;
    if k == 1 {
        return Ok(vec![0; w.nrows()]);
    }
    Ok(kmeans(&emb, k, seed, &config.kmeans, config.exec)?.labels)
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

/// Best agreement rate over all one-to-one matchings of predicted to true
/// labels, found by Hungarian assignment on the contingency table.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(IrlsError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(IrlsError::InvalidParams("cannot score an empty labeling".into()));
    }
    let (p, kp) = dense_ids(pred);
    let (t, kt) = dense_ids(truth);
    let size = kp.max(kt);
    let mut table = Matrix::new(size, size, 0i64);
    for (&a, &b) in p.iter().zip(&t) {
        table[(a, b)] += 1;
    }
    let (matched, _) = kuhn_munkres(&table);
    Ok(matched as f64 / pred.len() as f64)
}

pub fn segmentation_error(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(1.0 - clustering_accuracy(pred, truth)?)
}
