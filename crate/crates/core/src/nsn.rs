//! Nearest Subspace Neighbor (NSN) neighborhood selection.
//!
//! For each query point a subspace is grown from the point itself. At every
//! step the point with the largest projection onto the current subspace is
//! collected; while fewer than `max_dim` axes have been built the collected
//! point also extends the subspace. After `neighbors` steps, every point lying
//! on the final subspace is added to the neighborhood as well.
//!
//! Two implementations are provided. [`nsn`] recomputes the subspace and all
//! projections from scratch at every step, `O(p K^2 N^2)` overall. [`fnsn`]
//! keeps a running squared projection per point and adds only the contribution
//! of the newest axis, `O(p K N^2)`. Both share the same Gram-Schmidt step and
//! summation order, so on identical inputs they return identical matrices.
//!
//! Ties in every argmax go to the smallest index.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dot, push_axis, PointSet};
use crate::metrics::Labeling;

/// Default tolerance for the "point lies on the final subspace" test.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsnParams {
    /// Number of neighbors collected per point (`K`).
    pub neighbors: usize,
    /// Largest dimension of the selection subspace (`k_max`).
    pub max_dim: usize,
    /// A point with squared projection at least `1 - membership_tol` onto the
    /// final subspace counts as lying on it.
    pub membership_tol: f64,
}

impl NsnParams {
    pub fn new(neighbors: usize, max_dim: usize) -> Self {
        NsnParams {
            neighbors,
            max_dim,
            membership_tol: DEFAULT_MEMBERSHIP_TOL,
        }
    }

    pub fn with_membership_tol(mut self, tol: f64) -> Self {
        self.membership_tol = tol;
        self
    }

    /// Checks `1 <= max_dim <= neighbors <= n_points - 1` and a positive tolerance.
    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.max_dim < 1 {
            return Err(Error::BadParams("max_dim must be at least 1".into()));
        }
        if self.max_dim > self.neighbors {
            return Err(Error::BadParams(format!(
                "max_dim ({}) must not exceed neighbors ({})",
                self.max_dim, self.neighbors
            )));
        }
        if self.neighbors + 1 > n_points {
            return Err(Error::BadParams(format!(
                "neighbors ({}) must be at most N - 1 = {}",
                self.neighbors,
                n_points.saturating_sub(1)
            )));
        }
        if self.membership_tol.is_nan() || self.membership_tol <= 0.0 {
            return Err(Error::BadParams("membership_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Binary `N x N` neighborhood relation. Entry `(i, j)` is set when `j` was
/// selected as a neighbor of `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodMatrix {
    n: usize,
    entries: Vec<bool>,
}

impl NeighborhoodMatrix {
    pub fn empty(n: usize) -> Self {
        NeighborhoodMatrix {
            n,
            entries: vec![false; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut w = Self::empty(n);
        for i in 0..n {
            w.set(i, i);
        }
        w
    }

    /// The ideal neighborhood: `i` and `j` are neighbors iff they share a label.
    pub fn from_labels(truth: &Labeling) -> Self {
        let n = truth.len();
        let mut w = Self::empty(n);
        for i in 0..n {
            for j in 0..n {
                if truth.get(i) == truth.get(j) {
                    w.set(i, j);
                }
            }
        }
        w
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut w = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidDims(format!(
                    "edge ({i}, {j}) out of range for {n} points"
                )));
            }
            w.set(i, j);
        }
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.entries[i * self.n + j] = true;
    }

    /// Columns set in row `i`, ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.entries[i * self.n..(i + 1) * self.n]
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.row(i).count()
    }

    /// All set entries in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |j| (i, j)))
            .collect()
    }
}

/// The greedy trace of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySelection {
    pub query: usize,
    /// Collected neighbors in selection order.
    pub picked: Vec<usize>,
    /// Squared projection of every point onto the final subspace.
    pub scores: Vec<f64>,
}

impl QuerySelection {
    fn neighborhood_row(&self, tol: f64) -> Vec<usize> {
        let mut row: Vec<usize> = self
            .scores
            .iter()
            .enumerate()
            .filter_map(|(j, &s)| (s >= 1.0 - tol).then_some(j))
            .collect();
        row.push(self.query);
        row.extend_from_slice(&self.picked);
        row.sort_unstable();
        row.dedup();
        row
    }
}

fn argmax_excluding(scores: &[f64], taken: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for (j, &s) in scores.iter().enumerate() {
        if !taken[j] && (best == usize::MAX || s > best_score) {
            best = j;
            best_score = s;
        }
    }
    best
}

/// Incremental selection for one query on unit-norm points.
pub fn fnsn_query(points: &PointSet, query: usize, params: &NsnParams) -> QuerySelection {
    let (n, p) = (points.len(), points.dim());
    let mut axes: Vec<f64> = Vec::with_capacity(p * params.max_dim);
    let mut scores = vec![0.0; n];
    let mut taken = vec![false; n];
    taken[query] = true;
    let mut picked = Vec::with_capacity(params.neighbors);

    let mut fresh_axis = push_axis(&mut axes, p, points.point(query)).1;
    for k in 1..=params.neighbors {
        if k <= params.max_dim && fresh_axis {
            let u = &axes[axes.len() - p..];
            for (s, y) in scores.iter_mut().zip(points.iter()) {
                let c = dot(u, y);
                *s += c * c;
            }
        }
        let j = argmax_excluding(&scores, &taken);
        taken[j] = true;
        picked.push(j);
        // a pick already in the span leaves the subspace unchanged
        fresh_axis = k < params.max_dim && push_axis(&mut axes, p, points.point(j)).1;
    }
    QuerySelection {
        query,
        picked,
        scores,
    }
}

/// Reference selection for one query: the subspace is rebuilt from the
/// collected points and every projection recomputed at each step.
pub fn nsn_query(points: &PointSet, query: usize, params: &NsnParams) -> QuerySelection {
    let (n, p) = (points.len(), points.dim());
    let mut taken = vec![false; n];
    taken[query] = true;
    let mut picked: Vec<usize> = Vec::with_capacity(params.neighbors);
    let mut axes: Vec<f64> = Vec::new();
    let mut scores = vec![0.0; n];

    for k in 1..=params.neighbors {
        if k <= params.max_dim {
            axes.clear();
            for &j in std::iter::once(&query).chain(&picked) {
                push_axis(&mut axes, p, points.point(j));
            }
        }
        for (s, y) in scores.iter_mut().zip(points.iter()) {
            *s = 0.0;
            for u in axes.chunks_exact(p) {
                let c = dot(u, y);
                *s += c * c;
            }
        }
        let j = argmax_excluding(&scores, &taken);
        taken[j] = true;
        picked.push(j);
    }
    QuerySelection {
        query,
        picked,
        scores,
    }
}

fn assemble<F>(points: &PointSet, params: &NsnParams, select: F) -> Result<NeighborhoodMatrix>
where
    F: Fn(&PointSet, usize, &NsnParams) -> QuerySelection + Sync,
{
    params.validate(points.len())?;
    let points = points.normalize()?;
    let rows: Vec<Vec<usize>> = (0..points.len())
        .into_par_iter()
        .map(|i| select(&points, i, params).neighborhood_row(params.membership_tol))
        .collect();
    let mut w = NeighborhoodMatrix::empty(points.len());
    for (i, row) in rows.iter().enumerate() {
        for &j in row {
            w.set(i, j);
        }
    }
    Ok(w)
}

/// Neighborhood matrix by the from-scratch reference implementation.
pub fn nsn(points: &PointSet, params: &NsnParams) -> Result<NeighborhoodMatrix> {
    assemble(points, params, nsn_query)
}

/// Neighborhood matrix by the incremental implementation.
pub fn fnsn(points: &PointSet, params: &NsnParams) -> Result<NeighborhoodMatrix> {
    assemble(points, params, fnsn_query)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleOutcome {
    Success,
    /// The best same-class candidate did not beat every other-class point at
    /// this (1-based) step.
    Failure { step: usize },
}

/// Label-aware selection for `query`: it only ever collects points of the
/// query's own class, and fails as soon as the best such point is not strictly
/// closer to the subspace than every point of another class. It succeeds
/// exactly when the label-blind selection collects only same-class points.
pub fn nsn_oracle(
    points: &PointSet,
    truth: &Labeling,
    query: usize,
    params: &NsnParams,
) -> Result<OracleOutcome> {
    if truth.len() != points.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            found: truth.len(),
        });
    }
    params.validate(points.len())?;
    let class = truth.get(query);
    let size = truth.as_slice().iter().filter(|&&l| l == class).count();
    if size < params.neighbors + 1 {
        return Err(Error::ClassTooSmall {
            class,
            size,
            required: params.neighbors + 1,
        });
    }
    let points = points.normalize()?;
    let (n, p) = (points.len(), points.dim());
    let mut axes: Vec<f64> = Vec::with_capacity(p * params.max_dim);
    let mut scores = vec![0.0; n];
    let mut taken = vec![false; n];
    taken[query] = true;

    let mut fresh_axis = push_axis(&mut axes, p, points.point(query)).1;
    for k in 1..=params.neighbors {
        if k <= params.max_dim && fresh_axis {
            let u = &axes[axes.len() - p..];
            for (s, y) in scores.iter_mut().zip(points.iter()) {
                let c = dot(u, y);
                *s += c * c;
            }
        }
        let mut best_same: Option<(usize, f64)> = None;
        let mut best_other = f64::NEG_INFINITY;
        for (j, &s) in scores.iter().enumerate() {
            if truth.get(j) == class {
                if !taken[j] && best_same.is_none_or(|(_, b)| s > b) {
                    best_same = Some((j, s));
                }
            } else {
                best_other = best_other.max(s);
            }
        }
        let (j, s) = best_same.expect("class size checked above");
        if s <= best_other {
            return Ok(OracleOutcome::Failure { step: k });
        }
        taken[j] = true;
        fresh_axis = k < params.max_dim && push_axis(&mut axes, p, points.point(j)).1;
    }
    Ok(OracleOutcome::Success)
}
