//! Subspace primitives shared by the clustering algorithms.
//!
//! A subspace is always carried as a [`Basis`], a `p x k` matrix with
//! orthonormal columns. Bases are only defined up to a right rotation, so every
//! observable quantity (projection norms, projectors, affinities) is invariant
//! under that rotation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Residual norm below which a vector is treated as lying in a span.
pub const RANK_TOL: f64 = 1e-10;

/// Rows with a norm below this cannot be normalized.
pub const ZERO_NORM_TOL: f64 = 1e-14;

/// Allowed entrywise deviation of a Gram matrix from the identity.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes from `v` its components along the orthonormal columns stored
/// column-major in `axes` (two passes of modified Gram-Schmidt) and returns the
/// norm of what is left.
pub(crate) fn orthogonalize(axes: &[f64], p: usize, v: &mut [f64]) -> f64 {
    for _ in 0..2 {
        for u in axes.chunks_exact(p) {
            let c = dot(u, v);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= c * ui;
            }
        }
    }
    norm(v)
}

/// Appends the normalized residual of `y` to `axes`. Returns the residual norm
/// and whether an axis was appended; nothing is appended when `y` already lies
/// in the span within [`RANK_TOL`].
pub(crate) fn push_axis(axes: &mut Vec<f64>, p: usize, y: &[f64]) -> (f64, bool) {
    let mut v = y.to_vec();
    let residual = orthogonalize(axes, p, &mut v);
    if residual < RANK_TOL {
        return (residual, false);
    }
    axes.extend(v.iter().map(|x| x / residual));
    (residual, true)
}

/// A linear subspace of `R^p` stored as a `p x k` matrix with orthonormal
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    columns: DMatrix<f64>,
}

impl Basis {
    /// Wraps a matrix whose columns are already orthonormal.
    pub fn from_orthonormal(columns: DMatrix<f64>) -> Result<Self> {
        if columns.ncols() == 0 || columns.ncols() > columns.nrows() {
            return Err(Error::InvalidDims(format!(
                "basis must satisfy 1 <= k <= p, got p={} k={}",
                columns.nrows(),
                columns.ncols()
            )));
        }
        let basis = Basis { columns };
        let deviation = basis.gram_deviation();
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(basis)
    }

    pub(crate) fn from_axes(p: usize, axes: Vec<f64>) -> Self {
        let k = axes.len() / p;
        Basis {
            columns: DMatrix::from_vec(p, k, axes),
        }
    }

    /// Basis of the span of the first `k` canonical axes of `R^p`.
    pub fn canonical(p: usize, k: usize) -> Result<Self> {
        if k == 0 || k > p {
            return Err(Error::InvalidDims(format!("need 1 <= k <= p, got p={p} k={k}")));
        }
        Ok(Basis {
            columns: DMatrix::identity(p, k),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.columns
    }

    pub fn column(&self, l: usize) -> &[f64] {
        let p = self.ambient_dim();
        &self.columns.as_slice()[l * p..(l + 1) * p]
    }

    pub(crate) fn axes(&self) -> &[f64] {
        self.columns.as_slice()
    }

    /// Orthogonal projector `U U^T` onto the subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.columns * self.columns.transpose()
    }

    /// Largest entrywise deviation of `U^T U` from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let gram = self.columns.transpose() * &self.columns;
        let k = gram.nrows();
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Squared projection norm without a dimension check.
    pub(crate) fn sqnorm_of(&self, y: &[f64]) -> f64 {
        let p = self.ambient_dim();
        self.columns
            .as_slice()
            .chunks_exact(p)
            .map(|u| {
                let c = dot(u, y);
                c * c
            })
            .sum()
    }
}

/// A set of `N` points in `R^p`.
///
/// Points are stored as the columns of a `p x N` matrix so that each point is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: DMatrix<f64>,
}

impl PointSet {
    /// Builds a point set from rows, one row per point.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidDims("point set must contain at least one point".into()));
        }
        let p = rows[0].as_ref().len();
        if p == 0 {
            return Err(Error::InvalidDims("points must have dimension at least 1".into()));
        }
        let mut flat = Vec::with_capacity(n * p);
        for row in rows {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Ok(PointSet {
            data: DMatrix::from_vec(p, n, flat),
        })
    }

    /// Builds a point set from a `p x N` matrix whose columns are the points.
    pub fn from_columns(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::InvalidDims(format!(
                "point set needs N >= 1 and p >= 1, got {}x{}",
                data.ncols(),
                data.nrows()
            )));
        }
        Ok(PointSet { data })
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let p = self.dim();
        &self.data.as_slice()[i * p..(i + 1) * p]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.as_slice().chunks_exact(self.dim())
    }

    /// The `p x N` column matrix.
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Points reordered so that point `i` of the result is `self.point(order[i])`.
    pub fn reordered(&self, order: &[usize]) -> PointSet {
        let p = self.dim();
        let mut flat = Vec::with_capacity(order.len() * p);
        for &i in order {
            flat.extend_from_slice(self.point(i));
        }
        PointSet {
            data: DMatrix::from_vec(p, order.len(), flat),
        }
    }

    /// Scales every point to unit Euclidean norm, preserving order.
    pub fn normalize(&self) -> Result<PointSet> {
        let p = self.dim();
        let mut flat = self.data.as_slice().to_vec();
        for (i, y) in flat.chunks_exact_mut(p).enumerate() {
            let r = norm(y);
            if r < ZERO_NORM_TOL {
                return Err(Error::ZeroVectorRow(i));
            }
            y.iter_mut().for_each(|v| *v /= r);
        }
        Ok(PointSet {
            data: DMatrix::from_vec(p, self.len(), flat),
        })
    }
}

/// Scales each point to unit norm.
pub fn normalize(points: &PointSet) -> Result<PointSet> {
    points.normalize()
}

/// Gram-Schmidt orthonormalization of linearly independent vectors.
pub fn orthonormalize<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Basis> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidDims("cannot orthonormalize an empty set".into()))?;
    let p = first.as_ref().len();
    if p == 0 || vectors.len() > p {
        return Err(Error::RankDeficient {
            effective_rank: vectors.len().min(p),
        });
    }
    let mut axes = Vec::with_capacity(p * vectors.len());
    for (rank, v) in vectors.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: v.len(),
            });
        }
        let (_, added) = push_axis(&mut axes, p, v);
        if !added {
            return Err(Error::RankDeficient {
                effective_rank: rank,
            });
        }
    }
    Ok(Basis::from_axes(p, axes))
}

/// `||U^T y||^2`, the squared norm of the projection of `y` onto the subspace.
pub fn proj_sqnorm(basis: &Basis, y: &[f64]) -> Result<f64> {
    if y.len() != basis.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.ambient_dim(),
            found: y.len(),
        });
    }
    Ok(basis.sqnorm_of(y))
}

/// Appends one orthonormal column spanning the residual of `y`.
pub fn extend_basis(basis: &Basis, y: &[f64]) -> Result<Basis> {
    let p = basis.ambient_dim();
    if y.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: y.len(),
        });
    }
    let mut axes = basis.axes().to_vec();
    let (_, added) = push_axis(&mut axes, p, y);
    if !added {
        return Err(Error::AlreadyInSpan);
    }
    Ok(Basis::from_axes(p, axes))
}

/// Affinity `||A^T B||_F / sqrt(d)` between two subspaces of equal dimension,
/// the root mean squared cosine of their principal angles.
pub fn affinity(a: &Basis, b: &Basis) -> Result<f64> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            found: b.ambient_dim(),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let cross = a.matrix().transpose() * b.matrix();
    let value = cross.norm() / (a.dim() as f64).sqrt();
    Ok(value.clamp(0.0, 1.0))
}

/// Largest affinity over all unordered pairs of distinct subspaces.
pub fn max_affinity(bases: &[Basis]) -> Result<f64> {
    if bases.len() < 2 {
        return Err(Error::TooFewSubspaces(bases.len()));
    }
    let mut best = 0.0_f64;
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            best = best.max(affinity(&bases[i], &bases[j])?);
        }
    }
    Ok(best)
}

/// The `d`-dimensional principal subspace of a set of points: the first `d`
/// left singular vectors of the matrix whose columns are the points.
pub fn top_d_principal<V: AsRef<[f64]>>(points: &[V], d: usize) -> Result<Basis> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidDims("principal subspace of an empty set".into()))?;
    let p = first.as_ref().len();
    if d == 0 || d > p {
        return Err(Error::InvalidDims(format!("need 1 <= d <= p, got p={p} d={d}")));
    }
    let m = points.len();
    if m < d {
        return Err(Error::RankDeficient { effective_rank: m });
    }
    let mut flat = Vec::with_capacity(p * m);
    for v in points {
        let v = v.as_ref();
        if v.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: v.len(),
            });
        }
        flat.extend_from_slice(v);
    }
    let (sigma, cols) = one_sided_jacobi(p, m, flat);
    if sigma[d - 1] < RANK_TOL {
        let effective_rank = sigma.iter().filter(|&&s| s >= RANK_TOL).count();
        return Err(Error::RankDeficient { effective_rank });
    }
    // a final Gram-Schmidt pass removes the last rounding in orthogonality
    let mut axes = Vec::with_capacity(p * d);
    for c in cols.chunks_exact(p).take(d) {
        push_axis(&mut axes, p, c);
    }
    Ok(Basis::from_axes(p, axes))
}

/// Singular value decomposition of the `p x m` column-major matrix `a` by
/// one-sided (Hestenes) Jacobi rotations. Returns the singular values in
/// decreasing order and the matching unit left singular vectors, column-major;
/// columns for zero singular values are left unnormalized.
fn one_sided_jacobi(p: usize, m: usize, mut a: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    const MAX_SWEEPS: usize = 60;
    // columns this small are rounding noise of a rank-deficient input
    let tiny = (f64::EPSILON * f64::EPSILON * dot(&a, &a)).max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..m {
            for j in i + 1..m {
                let (left, right) = a.split_at_mut(j * p);
                let ai = &mut left[i * p..(i + 1) * p];
                let aj = &mut right[..p];
                let alpha = dot(ai, ai);
                let beta = dot(aj, aj);
                let gamma = dot(ai, aj);
                if alpha < tiny || beta < tiny || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (x, y) in ai.iter_mut().zip(aj.iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = a.chunks_exact(p).map(norm).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut cols = Vec::with_capacity(p * m);
    for &k in &order {
        let c = &a[k * p..(k + 1) * p];
        let scale = if norms[k] > 0.0 { norms[k] } else { 1.0 };
        cols.extend(c.iter().map(|v| v / scale));
    }
    (order.iter().map(|&k| norms[k]).collect(), cols)
}

/// A uniformly (Haar) distributed `k`-dimensional subspace of `R^p`, obtained
/// by orthonormalizing `k` standard Gaussian vectors.
pub fn random_orthobasis<R: Rng + ?Sized>(p: usize, k: usize, rng: &mut R) -> Result<Basis> {
    if k == 0 || k > p {
        return Err(Error::InvalidDims(format!("need 1 <= k <= p, got p={p} k={k}")));
    }
    loop {
        let vectors: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        // rank deficiency has probability zero; draw again if it happens
        if let Ok(basis) = orthonormalize(&vectors) {
            return Ok(basis);
        }
    }
}

/// A unit vector distributed uniformly on the unit sphere of the subspace.
pub fn random_unit_in_span<R: Rng + ?Sized>(basis: &Basis, rng: &mut R) -> Vec<f64> {
    let k = basis.dim();
    let coeffs = loop {
        let x: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&x);
        if r > ZERO_NORM_TOL {
            break x.into_iter().map(|v| v / r).collect::<Vec<_>>();
        }
    };
    let p = basis.ambient_dim();
    let mut y = vec![0.0; p];
    for (u, c) in basis.axes().chunks_exact(p).zip(&coeffs) {
        for (yi, ui) in y.iter_mut().zip(u) {
            *yi += c * ui;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_vectors(rng: &mut ChaCha8Rng, count: usize, p: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    /// Projector onto the column span of `vectors`, from the eigenvectors of
    /// `Y Y^T` with nonnegligible eigenvalues. Independent of the Gram-Schmidt
    /// code under test.
    fn svd_projector(vectors: &[Vec<f64>]) -> DMatrix<f64> {
        let p = vectors[0].len();
        let flat: Vec<f64> = vectors.iter().flatten().copied().collect();
        let y = DMatrix::from_vec(p, vectors.len(), flat);
        let eig = nalgebra::SymmetricEigen::new(&y * y.transpose());
        let mut proj = DMatrix::zeros(p, p);
        for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > 1e-12 {
                let u = eig.eigenvectors.column(c);
                proj += u * u.transpose();
            }
        }
        proj
    }

    #[test]
    fn normalize_scales_rows() {
        let pts = PointSet::from_rows(&[vec![3.0, 4.0], vec![1.0, 0.0]]).unwrap();
        let out = pts.normalize().unwrap();
        assert!((out.point(0)[0] - 0.6).abs() < 1e-15);
        assert!((out.point(0)[1] - 0.8).abs() < 1e-15);
        assert_eq!(out.point(1), &[1.0, 0.0]);
    }

    #[test]
    fn normalize_random_rows_have_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = gaussian_vectors(&mut rng, 5, 3);
        let out = PointSet::from_rows(&rows).unwrap().normalize().unwrap();
        for y in out.iter() {
            // independent summation order: reversed
            let s: f64 = y.iter().rev().map(|v| v * v).sum();
            assert!((s.sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_zero_row() {
        let pts = PointSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(pts.normalize(), Err(Error::ZeroVectorRow(1))));
    }

    #[test]
    fn orthonormalize_axis_aligned() {
        let b = orthonormalize(&[vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 0.0]]).unwrap();
        assert_eq!(b.column(0), &[1.0, 0.0, 0.0]);
        assert_eq!(b.column(1), &[0.0, 1.0, 0.0]);

        let b = orthonormalize(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(b.column(0), &[1.0, 0.0]);
        assert_eq!(b.column(1), &[0.0, 1.0]);
    }

    #[test]
    fn orthonormalize_matches_svd_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vs = gaussian_vectors(&mut rng, 4, 6);
        let b = orthonormalize(&vs).unwrap();
        assert!(b.gram_deviation() < 1e-10);
        assert!(max_abs_diff(&b.projector(), &svd_projector(&vs)) < 1e-10);
    }

    #[test]
    fn orthonormalize_detects_dependence() {
        let err = orthonormalize(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { effective_rank: 1 }));
    }

    #[test]
    fn proj_sqnorm_basic() {
        let b = Basis::canonical(3, 1).unwrap();
        assert_eq!(proj_sqnorm(&b, &[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(proj_sqnorm(&b, &[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            proj_sqnorm(&b, &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn proj_sqnorm_matches_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vs = gaussian_vectors(&mut rng, 3, 8);
        let b = orthonormalize(&vs).unwrap();
        let mut y: Vec<f64> = gaussian_vectors(&mut rng, 1, 8).remove(0);
        let r = norm(&y);
        y.iter_mut().for_each(|v| *v /= r);

        // least-squares fit of y on the raw spanning vectors
        let flat: Vec<f64> = vs.iter().flatten().copied().collect();
        let a = DMatrix::from_vec(8, 3, flat);
        let yv = nalgebra::DVector::from_vec(y.clone());
        let coef = a.clone().svd(true, true).solve(&yv, 1e-12).unwrap();
        let fitted = &a * coef;
        let residual = (&yv - &fitted).norm_squared();
        let expected = yv.norm_squared() - residual;
        assert!((proj_sqnorm(&b, &y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn extend_basis_cases() {
        let b = Basis::canonical(3, 1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let e = extend_basis(&b, &[s, s, 0.0]).unwrap();
        assert!((e.column(1)[1] - 1.0).abs() < 1e-12);
        assert!(e.column(1)[0].abs() < 1e-12);
        assert!(matches!(
            extend_basis(&b, &[1.0, 0.0, 0.0]),
            Err(Error::AlreadyInSpan)
        ));
    }

    #[test]
    fn extend_basis_matches_orthonormalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut vs = gaussian_vectors(&mut rng, 3, 6);
        let y = vs.pop().unwrap();
        let b = orthonormalize(&vs).unwrap();
        let e = extend_basis(&b, &y).unwrap();
        vs.push(y);
        let oracle = svd_projector(&vs);
        assert!(max_abs_diff(&e.projector(), &oracle) < 1e-10);
        assert!(e.gram_deviation() < 1e-10);
    }

    #[test]
    fn affinity_cases() {
        let b12 = orthonormalize(&[vec![1., 0., 0., 0.], vec![0., 1., 0., 0.]]).unwrap();
        let b34 = orthonormalize(&[vec![0., 0., 1., 0.], vec![0., 0., 0., 1.]]).unwrap();
        let b13 = orthonormalize(&[vec![1., 0., 0., 0.], vec![0., 0., 1., 0.]]).unwrap();
        assert!((affinity(&b12, &b12).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(affinity(&b12, &b34).unwrap(), 0.0);
        assert!((affinity(&b12, &b13).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let line = Basis::canonical(4, 1).unwrap();
        assert!(matches!(
            affinity(&b12, &line),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn max_affinity_cases() {
        let axes: Vec<Basis> = (0..3)
            .map(|i| {
                let mut v = vec![0.0; 3];
                v[i] = 1.0;
                orthonormalize(&[v]).unwrap()
            })
            .collect();
        assert_eq!(max_affinity(&axes).unwrap(), 0.0);
        let dup = vec![axes[0].clone(), axes[0].clone(), axes[1].clone()];
        assert!((max_affinity(&dup).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            max_affinity(&axes[..1]),
            Err(Error::TooFewSubspaces(1))
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let bases: Vec<Basis> = (0..4)
            .map(|_| random_orthobasis(8, 2, &mut rng).unwrap())
            .collect();
        let mut brute = 0.0_f64;
        for (i, a) in bases.iter().enumerate() {
            for (j, b) in bases.iter().enumerate() {
                if i != j {
                    let m = a.matrix().transpose() * b.matrix();
                    let f: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt() / 2f64.sqrt();
                    brute = brute.max(f);
                }
            }
        }
        assert!((max_affinity(&bases).unwrap() - brute).abs() < 1e-14);
    }

    #[test]
    fn top_d_principal_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let vs = gaussian_vectors(&mut rng, 3, 7);
        let b = top_d_principal(&vs, 3).unwrap();
        let gs = orthonormalize(&vs).unwrap();
        assert!(max_abs_diff(&b.projector(), &gs.projector()) < 1e-10);

        let copies = vec![vec![1.0, 0.0, 0.0]; 10];
        let b = top_d_principal(&copies, 1).unwrap();
        assert!((proj_sqnorm(&b, &[1.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            top_d_principal(&copies, 2),
            Err(Error::RankDeficient { effective_rank: 1 })
        ));

        let truth = random_orthobasis(7, 3, &mut rng).unwrap();
        let pts: Vec<Vec<f64>> = (0..20).map(|_| random_unit_in_span(&truth, &mut rng)).collect();
        let est = top_d_principal(&pts, 3).unwrap();
        assert!((affinity(&est, &truth).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn random_orthobasis_full_dimension_is_identity_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let b = random_orthobasis(5, 5, &mut rng).unwrap();
        assert!(max_abs_diff(&b.projector(), &DMatrix::identity(5, 5)) < 1e-10);
        assert!(b.gram_deviation() < 1e-10);
    }

    #[test]
    fn random_unit_in_span_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let line = Basis::canonical(3, 1).unwrap();
        for _ in 0..10 {
            let y = random_unit_in_span(&line, &mut rng);
            assert!((y[0].abs() - 1.0).abs() < 1e-15 && y[1] == 0.0 && y[2] == 0.0);
        }
        let b = random_orthobasis(9, 4, &mut rng).unwrap();
        for _ in 0..50 {
            let y = random_unit_in_span(&b, &mut rng);
            assert!((norm(&y) - 1.0).abs() < 1e-10);
            assert!((proj_sqnorm(&b, &y).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn random_unit_in_plane_is_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let plane = Basis::canonical(2, 2).unwrap();
        let draws = 20_000;
        let mean: f64 = (0..draws)
            .map(|_| random_unit_in_span(&plane, &mut rng)[0].powi(2))
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 0.5).abs() / 0.5 < 0.02, "mean x1^2 = {mean}");
    }
}
