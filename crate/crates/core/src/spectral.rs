//! Spectral clustering of a neighborhood graph.
//!
//! The graph is symmetrized as `Z = W + W^T`. The cluster count can be
//! estimated from the largest gap between consecutive singular values of `Z`.
//! The default embedding takes the top eigenvectors of the normalized
//! adjacency `D^{-1/2} Z D^{-1/2}` and scales each row to unit length; the
//! rows are then grouped by k-means with k-means++ seeding and several
//! replicates.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Labeling;
use crate::nsn::NeighborhoodMatrix;

pub const DEFAULT_REPLICATES: usize = 10;
pub const MAX_LLOYD_ITERATIONS: usize = 100;
/// Upper end of the knee search when no bound is given.
pub const DEFAULT_MAX_CLUSTERS: usize = 20;

/// Symmetric nonnegative `N x N` affinity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    z: DMatrix<f64>,
}

impl AffinityGraph {
    pub fn from_matrix(z: DMatrix<f64>) -> Result<Self> {
        if !z.is_square() {
            return Err(Error::InvalidDims(format!(
                "affinity matrix must be square, got {}x{}",
                z.nrows(),
                z.ncols()
            )));
        }
        if z.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::BadParams("affinity entries must be nonnegative".into()));
        }
        if z != z.transpose() {
            return Err(Error::BadParams("affinity matrix must be symmetric".into()));
        }
        Ok(AffinityGraph { z })
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.z.clone());
        let mut s: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

pub fn build_affinity(w: &NeighborhoodMatrix) -> AffinityGraph {
    let n = w.len();
    let z = DMatrix::from_fn(n, n, |i, j| (w.get(i, j) as u8 + w.get(j, i) as u8) as f64);
    AffinityGraph { z }
}

/// Index `i` in `1..=max_clusters` with the largest gap `s_i - s_{i+1}` between
/// consecutive singular values (1-based, decreasing order). Ties go to the
/// smallest `i`.
pub fn estimate_clusters(z: &AffinityGraph, max_clusters: usize) -> Result<usize> {
    let n = z.len();
    if max_clusters < 1 || max_clusters + 1 > n {
        return Err(Error::BadParams(format!(
            "max_clusters must lie in 1..={}, got {max_clusters}",
            n.saturating_sub(1)
        )));
    }
    let s = z.singular_values();
    let mut best = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 1..=max_clusters {
        let gap = s[i - 1] - s[i];
        if gap > best_gap {
            best = i;
            best_gap = gap;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// Top eigenvectors of `D^{-1/2} Z D^{-1/2}`, rows scaled to unit length.
    #[default]
    Normalized,
    /// Bottom eigenvectors of the Laplacian `D - Z`, rows left as is.
    Unnormalized,
}

/// Eigenvector indices of `eig` ordered by eigenvalue, largest first when
/// `descending`. Equal eigenvalues keep the solver's order.
fn sorted_indices(eig: &SymmetricEigen<f64, nalgebra::Dyn>, descending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]);
        if descending {
            ord.reverse()
        } else {
            ord
        }
    });
    idx
}

/// `N x L` spectral embedding of the graph.
pub fn spectral_embed(z: &AffinityGraph, l: usize, kind: EmbeddingKind) -> Result<DMatrix<f64>> {
    let n = z.len();
    if l < 1 || l > n {
        return Err(Error::BadParams(format!("cluster count must lie in 1..={n}, got {l}")));
    }
    let degree: Vec<f64> = z.z.row_iter().map(|r| r.sum()).collect();
    if let Some(i) = degree.iter().position(|&d| d <= 0.0) {
        return Err(Error::BadParams(format!("vertex {i} is isolated")));
    }
    match kind {
        EmbeddingKind::Normalized => {
            let scale: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
            let m = DMatrix::from_fn(n, n, |i, j| scale[i] * z.z[(i, j)] * scale[j]);
            let eig = SymmetricEigen::new(m);
            let idx = sorted_indices(&eig, true);
            let mut emb = DMatrix::from_fn(n, l, |i, c| eig.eigenvectors[(i, idx[c])]);
            for mut row in emb.row_iter_mut() {
                let norm = row.norm();
                if norm > 0.0 {
                    row /= norm;
                }
            }
            Ok(emb)
        }
        EmbeddingKind::Unnormalized => {
            let lap = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(degree)) - &z.z;
            let eig = SymmetricEigen::new(lap);
            let idx = sorted_indices(&eig, false);
            Ok(DMatrix::from_fn(n, l, |i, c| eig.eigenvectors[(i, idx[c])]))
        }
    }
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Run {
    labels: Vec<usize>,
    objective: f64,
}

fn kmeans_pp_seeds(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sqdist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[next].clone());
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sqdist(r, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn nearest(r: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let dist = sqdist(r, center);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn lloyd(rows: &[Vec<f64>], k: usize, seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp_seeds(rows, k, &mut rng);
    let dim = rows[0].len();
    let mut labels: Vec<usize> = rows.iter().map(|r| nearest(r, &centers).0).collect();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &c) in rows.iter().zip(&labels) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(r) {
                *s += v;
            }
        }
        // an emptied cluster keeps its previous center
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = rows.iter().map(|r| nearest(r, &centers).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let objective = rows.iter().zip(&labels).map(|(r, &c)| sqdist(r, &centers[c])).sum();
    Run { labels, objective }
}

/// Best-of-`replicates` Lloyd's algorithm on the rows of `data`.
///
/// Each replicate gets its own seed drawn from `rng` up front, so the result
/// does not depend on how replicates are scheduled. The replicate with the
/// smallest within-cluster sum of squares wins, ties to the earliest.
pub fn kmeans<R: Rng + ?Sized>(data: &DMatrix<f64>, k: usize, replicates: usize, rng: &mut R) -> Result<Labeling> {
    let n = data.nrows();
    if n == 0 {
        return Err(Error::InvalidDims("k-means needs at least one point".into()));
    }
    if k < 1 || k > n {
        return Err(Error::BadParams(format!("cluster count must lie in 1..={n}, got {k}")));
    }
    if replicates < 1 {
        return Err(Error::BadParams("at least one replicate is required".into()));
    }
    let rows: Vec<Vec<f64>> = data.row_iter().map(|r| r.iter().copied().collect()).collect();
    let seeds: Vec<u64> = (0..replicates).map(|_| rng.random()).collect();
    let runs: Vec<Run> = seeds.par_iter().map(|&s| lloyd(&rows, k, s)).collect();
    let mut best = &runs[0];
    for run in &runs[1..] {
        if run.objective < best.objective {
            best = run;
        }
    }
    Labeling::compact(&best.labels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub replicates: usize,
    /// Upper end of the knee search; `min(N - 1, 20)` when unset.
    pub max_clusters: Option<usize>,
    pub embedding: EmbeddingKind,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            replicates: DEFAULT_REPLICATES,
            max_clusters: None,
            embedding: EmbeddingKind::Normalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub labels: Labeling,
    /// The cluster count used, given or estimated.
    pub num_clusters: usize,
    pub estimated: bool,
}

/// Spectral clustering of `W + W^T`. Estimates the cluster count when `l` is
/// `None`.
pub fn spectral_cluster<R: Rng + ?Sized>(
    w: &NeighborhoodMatrix,
    l: Option<usize>,
    opts: &SpectralOptions,
    rng: &mut R,
) -> Result<SpectralResult> {
    let z = build_affinity(w);
    let n = z.len();
    if n == 0 {
        return Err(Error::InvalidDims("empty neighborhood matrix".into()));
    }
    let (num_clusters, estimated) = match l {
        Some(l) => (l, false),
        None if n == 1 => (1, true),
        None => {
            let max = opts.max_clusters.unwrap_or(DEFAULT_MAX_CLUSTERS.min(n - 1));
            (estimate_clusters(&z, max)?, true)
        }
    };
    let emb = spectral_embed(&z, num_clusters, opts.embedding)?;
    let labels = kmeans(&emb, num_clusters, opts.replicates, rng)?;
    Ok(SpectralResult {
        labels,
        num_clusters,
        estimated,
    })
}
