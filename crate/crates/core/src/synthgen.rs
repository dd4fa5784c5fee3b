//! Labeled synthetic data on unions of subspaces.
//!
//! Points are noiseless and drawn uniformly from the unit sphere of their
//! subspace. Randomness comes from one 64-bit seed split into independent
//! ChaCha streams: one per subspace basis and one per subspace's point
//! sequence. Changing `n` therefore only extends or truncates the point
//! streams and never changes the subspaces.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{max_affinity, random_orthobasis, random_unit_in_span, Basis, PointSet};
use crate::metrics::Labeling;

const BASIS_STREAM: u64 = 0;
const POINT_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelKind {
    /// Haar-random subspaces.
    FullyRandom,
    /// Fixed subspaces; here the equi-affinity arrangement with the given
    /// maximum affinity.
    SemiRandom { target_maxaff: f64 },
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::FullyRandom => write!(f, "fully_random"),
            ModelKind::SemiRandom { target_maxaff } => write!(f, "semi_random:{target_maxaff}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub p: usize,
    pub d: usize,
    pub num_subspaces: usize,
    pub per_subspace: usize,
    pub model: ModelKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    /// `n * L` points, class-major.
    pub points: PointSet,
    pub truth: Labeling,
    pub bases: Vec<Basis>,
    pub params: InstanceParams,
}

pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_counts(l: usize, n: usize) -> Result<()> {
    if l == 0 || n == 0 {
        return Err(Error::InvalidDims(format!(
            "need at least one subspace and one point per subspace, got L={l} n={n}"
        )));
    }
    Ok(())
}

fn sample_points(bases: &[Basis], n: usize, seed: u64) -> Result<(PointSet, Labeling)> {
    let p = bases[0].ambient_dim();
    let mut flat = Vec::with_capacity(p * n * bases.len());
    for (l, basis) in bases.iter().enumerate() {
        let mut rng = substream(seed, POINT_STREAM + l as u64);
        for _ in 0..n {
            flat.extend(random_unit_in_span(basis, &mut rng));
        }
    }
    let points = PointSet::from_columns(DMatrix::from_vec(p, n * bases.len(), flat))?;
    Ok((points, Labeling::blocks(bases.len(), n)?))
}

/// `L` Haar-random `d`-dimensional subspaces of `R^p` with `n` uniform unit
/// points on each.
pub fn gen_fully_random(p: usize, d: usize, l: usize, n: usize, seed: u64) -> Result<SyntheticInstance> {
    if d == 0 || d > p {
        return Err(Error::InvalidDims(format!("need 1 <= d <= p, got p={p} d={d}")));
    }
    check_counts(l, n)?;
    let bases = (0..l)
        .map(|i| random_orthobasis(p, d, &mut substream(seed, BASIS_STREAM + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let (points, truth) = sample_points(&bases, n, seed)?;
    Ok(SyntheticInstance {
        points,
        truth,
        bases,
        params: InstanceParams {
            p,
            d,
            num_subspaces: l,
            per_subspace: n,
            model: ModelKind::FullyRandom,
            seed,
        },
    })
}

/// `L` subspaces whose pairwise affinities all equal `target_maxaff`.
///
/// With mutually orthogonal `p x d` blocks `B_0, ..., B_L` taken from the
/// canonical axes, subspace `l` is spanned by `cos(t) B_0 + sin(t) B_l` where
/// `cos(t)^2 = target_maxaff`, so that `D_i^T D_j = target_maxaff * I` for
/// every `i != j`.
pub fn make_equi_affinity_bases(p: usize, d: usize, l: usize, target_maxaff: f64) -> Result<Vec<Basis>> {
    if !(0.0..1.0).contains(&target_maxaff) {
        return Err(Error::BadParams(format!(
            "target affinity must lie in [0, 1), got {target_maxaff}"
        )));
    }
    if d == 0 || l == 0 {
        return Err(Error::InvalidDims(format!("need d >= 1 and L >= 1, got d={d} L={l}")));
    }
    if p < (l + 1) * d {
        return Err(Error::AmbientTooSmall { p, d, blocks: l + 1 });
    }
    let cos = target_maxaff.sqrt();
    let sin = (1.0 - target_maxaff).sqrt();
    (1..=l)
        .map(|block| {
            let mut m = DMatrix::zeros(p, d);
            for c in 0..d {
                m[(c, c)] = cos;
                m[(block * d + c, c)] = sin;
            }
            Basis::from_orthonormal(m)
        })
        .collect()
}

/// `n` uniform unit points on each of the given subspaces.
pub fn gen_semi_random(bases: &[Basis], n: usize, seed: u64) -> Result<SyntheticInstance> {
    let first = bases.first().ok_or(Error::InconsistentBases)?;
    let (p, d) = (first.ambient_dim(), first.dim());
    if bases.iter().any(|b| b.ambient_dim() != p || b.dim() != d) {
        return Err(Error::InconsistentBases);
    }
    check_counts(bases.len(), n)?;
    let (points, truth) = sample_points(bases, n, seed)?;
    let target_maxaff = if bases.len() > 1 { max_affinity(bases)? } else { 0.0 };
    Ok(SyntheticInstance {
        points,
        truth,
        bases: bases.to_vec(),
        params: InstanceParams {
            p,
            d,
            num_subspaces: bases.len(),
            per_subspace: n,
            model: ModelKind::SemiRandom { target_maxaff },
            seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{affinity, proj_sqnorm};

    fn check_membership(inst: &SyntheticInstance) {
        for (i, y) in inst.points.iter().enumerate() {
            let own = inst.truth.get(i);
            assert!((proj_sqnorm(&inst.bases[own], y).unwrap() - 1.0).abs() < 1e-10);
            for (l, b) in inst.bases.iter().enumerate() {
                if l != own {
                    assert!(proj_sqnorm(b, y).unwrap() < 1.0 - 1e-8);
                }
            }
        }
        assert_eq!(
            inst.truth.class_sizes(),
            vec![inst.params.per_subspace; inst.params.num_subspaces]
        );
    }

    #[test]
    fn full_dimensional_single_subspace() {
        let inst = gen_fully_random(3, 3, 1, 5, 1).unwrap();
        assert_eq!(inst.points.len(), 5);
        for y in inst.points.iter() {
            assert!((y.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(inst.truth.as_slice().iter().all(|&l| l == 0));
    }

    #[test]
    fn fully_random_is_deterministic() {
        let a = gen_fully_random(20, 3, 4, 10, 99).unwrap();
        let b = gen_fully_random(20, 3, 4, 10, 99).unwrap();
        assert_eq!(a, b);
        let c = gen_fully_random(20, 3, 4, 10, 100).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn fully_random_invariants() {
        let inst = gen_fully_random(20, 3, 4, 10, 5).unwrap();
        check_membership(&inst);
        assert!(max_affinity(&inst.bases).unwrap() < 1.0);
    }

    #[test]
    fn changing_n_keeps_subspaces() {
        let a = gen_fully_random(10, 2, 3, 5, 8).unwrap();
        let b = gen_fully_random(10, 2, 3, 9, 8).unwrap();
        assert_eq!(a.bases, b.bases);
        // the first five points of each class agree
        for l in 0..3 {
            for k in 0..5 {
                assert_eq!(a.points.point(l * 5 + k), b.points.point(l * 9 + k));
            }
        }
    }

    #[test]
    fn invalid_dims() {
        assert!(matches!(gen_fully_random(3, 4, 1, 1, 0), Err(Error::InvalidDims(_))));
        assert!(matches!(gen_fully_random(3, 2, 0, 1, 0), Err(Error::InvalidDims(_))));
    }

    #[test]
    fn equi_affinity_values() {
        let bases = make_equi_affinity_bases(8, 2, 3, 0.0).unwrap();
        assert_eq!(max_affinity(&bases).unwrap(), 0.0);

        for (p, d, l, target) in [(8, 2, 2, 0.5), (12, 3, 3, 0.9)] {
            let bases = make_equi_affinity_bases(p, d, l, target).unwrap();
            for i in 0..l {
                for j in 0..l {
                    if i == j {
                        continue;
                    }
                    // D_i^T D_j should be target * I
                    let m = bases[i].matrix().transpose() * bases[j].matrix();
                    let expected = DMatrix::<f64>::identity(d, d) * target;
                    assert!((m - expected).amax() < 1e-10);
                    assert!((affinity(&bases[i], &bases[j]).unwrap() - target).abs() < 1e-10);
                }
            }
            assert!((max_affinity(&bases).unwrap() - target).abs() < 1e-10);
        }
        assert!(matches!(
            make_equi_affinity_bases(8, 3, 3, 0.5),
            Err(Error::AmbientTooSmall { .. })
        ));
    }

    #[test]
    fn semi_random_cases() {
        let lines = vec![Basis::canonical(2, 1).unwrap(), {
            Basis::from_orthonormal(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap()
        }];
        let inst = gen_semi_random(&lines, 3, 4).unwrap();
        assert_eq!(inst.points.len(), 6);
        for (i, y) in inst.points.iter().enumerate() {
            let axis = inst.truth.get(i);
            assert!((y[axis].abs() - 1.0).abs() < 1e-15);
            assert_eq!(y[1 - axis], 0.0);
        }
        assert_eq!(gen_semi_random(&lines, 3, 4).unwrap(), inst);

        let bases = make_equi_affinity_bases(12, 3, 3, 0.5).unwrap();
        let inst = gen_semi_random(&bases, 20, 2).unwrap();
        check_membership(&inst);

        let mixed = vec![Basis::canonical(4, 1).unwrap(), Basis::canonical(4, 2).unwrap()];
        assert!(matches!(gen_semi_random(&mixed, 2, 0), Err(Error::InconsistentBases)));
    }
}
