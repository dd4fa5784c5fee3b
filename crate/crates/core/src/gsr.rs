//! Greedy Subspace Recovery (GSR).
//!
//! Every point proposes the principal `d`-dimensional subspace of its
//! neighborhood. Candidates are then picked greedily by how many points lie on
//! them (projection norm at least `1 - eps`); points lying on a picked subspace
//! leave the pool of uncovered points. Finally every point is labeled with the
//! picked subspace it projects onto most strongly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{top_d_principal, Basis, PointSet};
use crate::metrics::Labeling;
use crate::nsn::NeighborhoodMatrix;

pub const DEFAULT_EPS: f64 = 1e-6;

/// Which points count toward a candidate's coverage when ranking candidates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageCount {
    /// Every point, covered or not.
    #[default]
    AllPoints,
    /// Only points not yet covered by a picked subspace.
    Uncovered,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsrOptions {
    pub eps: f64,
    /// Number of subspaces to pick when known; otherwise picking continues
    /// until every point is covered.
    pub num_subspaces: Option<usize>,
    pub coverage: CoverageCount,
}

impl Default for GsrOptions {
    fn default() -> Self {
        GsrOptions {
            eps: DEFAULT_EPS,
            num_subspaces: None,
            coverage: CoverageCount::AllPoints,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub subspaces: Vec<Basis>,
    pub labels: Labeling,
    /// Index of the point whose candidate was picked, per round.
    pub picked_indices: Vec<usize>,
}

/// The principal `d`-dimensional subspace of each row's neighbors.
pub fn candidate_subspaces(points: &PointSet, w: &NeighborhoodMatrix, d: usize) -> Result<Vec<Basis>> {
    if w.len() != points.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            found: w.len(),
        });
    }
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let members: Vec<&[f64]> = w.row(i).map(|j| points.point(j)).collect();
            if members.len() < d {
                return Err(Error::TooFewNeighbors {
                    row: i,
                    found: members.len(),
                    required: d,
                });
            }
            top_d_principal(&members, d).map_err(|e| Error::InRow {
                row: i,
                source: Box::new(e),
            })
        })
        .collect()
}

fn covers(basis: &Basis, y: &[f64], eps: f64) -> bool {
    basis.sqnorm_of(y).sqrt() >= 1.0 - eps
}

/// Greedy selection of candidate subspaces. Returns the picked subspaces and
/// the indices of the candidates they came from.
pub fn gsr_select(
    points: &PointSet,
    candidates: &[Basis],
    opts: &GsrOptions,
) -> Result<(Vec<Basis>, Vec<usize>)> {
    let n = points.len();
    if candidates.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: candidates.len(),
        });
    }
    if opts.eps.is_nan() || opts.eps <= 0.0 {
        return Err(Error::BadParams("eps must be positive".into()));
    }
    if opts.num_subspaces == Some(0) {
        return Err(Error::BadParams("number of subspaces must be positive".into()));
    }
    let coverage: Vec<Vec<usize>> = candidates
        .par_iter()
        .map(|b| (0..n).filter(|&j| covers(b, points.point(j), opts.eps)).collect())
        .collect();

    let mut uncovered = vec![true; n];
    let mut remaining = n;
    let mut subspaces = Vec::new();
    let mut picked = Vec::new();
    while remaining > 0 && opts.num_subspaces.is_none_or(|l| picked.len() < l) {
        let count = |i: usize| match opts.coverage {
            CoverageCount::AllPoints => coverage[i].len(),
            CoverageCount::Uncovered => coverage[i].iter().filter(|&&j| uncovered[j]).count(),
        };
        let mut best: Option<(usize, usize)> = None;
        for i in (0..n).filter(|&i| uncovered[i]) {
            let c = count(i);
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        let (star, _) = best.expect("pool is nonempty");
        for &j in &coverage[star] {
            if uncovered[j] {
                uncovered[j] = false;
                remaining -= 1;
            }
        }
        // the picked point leaves the pool even when its own candidate
        // does not cover it
        if uncovered[star] {
            uncovered[star] = false;
            remaining -= 1;
        }
        subspaces.push(candidates[star].clone());
        picked.push(star);
    }

    if let Some(requested) = opts.num_subspaces {
        if picked.len() < requested {
            return Err(Error::Exhausted {
                requested,
                subspaces,
                picked,
            });
        }
    }
    Ok((subspaces, picked))
}

/// Labels each point with the subspace of largest projection norm.
pub fn gsr_label(points: &PointSet, subspaces: &[Basis]) -> Result<Labeling> {
    if subspaces.is_empty() {
        return Err(Error::BadParams("at least one subspace is required for labeling".into()));
    }
    let labels = points
        .iter()
        .map(|y| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (l, b) in subspaces.iter().enumerate() {
                let s = b.sqnorm_of(y);
                if s > best_score {
                    best = l;
                    best_score = s;
                }
            }
            best
        })
        .collect();
    Labeling::new(labels)
}

/// Full recovery from a neighborhood matrix. Points are normalized first.
///
/// On [`Error::Exhausted`] the partial subspaces are carried by the error;
/// [`gsr_label`] can still label with them.
pub fn gsr(points: &PointSet, w: &NeighborhoodMatrix, d: usize, opts: &GsrOptions) -> Result<RecoveryResult> {
    let points = points.normalize()?;
    let candidates = candidate_subspaces(&points, w, d)?;
    let (subspaces, picked_indices) = gsr_select(&points, &candidates, opts)?;
    let labels = gsr_label(&points, &subspaces)?;
    Ok(RecoveryResult {
        subspaces,
        labels,
        picked_indices,
    })
}
