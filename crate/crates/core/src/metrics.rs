//! Clustering error (CE) and neighborhood selection error (NSE).

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_assignment;
use crate::error::{Error, Result};
use crate::nsn::NeighborhoodMatrix;

/// Cluster index per point, for ground truth or estimates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Labeling {
    labels: Vec<usize>,
}

impl Labeling {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidDims("labeling must cover at least one point".into()));
        }
        Ok(Labeling { labels })
    }

    /// Relabels to the contiguous range `0..L` in order of first appearance.
    pub fn compact(raw: &[usize]) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Labeling::new(labels)
    }

    /// `n` points for each of `l` classes, class-major.
    pub fn blocks(l: usize, n: usize) -> Result<Self> {
        Labeling::new((0..l).flat_map(|c| std::iter::repeat_n(c, n)).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    /// One past the largest label in use.
    pub fn num_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn reordered(&self, order: &[usize]) -> Labeling {
        Labeling {
            labels: order.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Fraction of points mislabeled under the best matching of predicted to true
/// labels. The predicted labeling may use a different number of clusters.
pub fn clustering_error(pred: &Labeling, truth: &Labeling) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let size = pred.num_clusters().max(truth.num_clusters());
    let mut confusion = vec![vec![0i64; size]; size];
    for (&t, &p) in truth.as_slice().iter().zip(pred.as_slice()) {
        confusion[t][p] += 1;
    }
    let (agree, _) = max_weight_assignment(&confusion);
    Ok(1.0 - agree as f64 / truth.len() as f64)
}

/// Fraction of points with at least one neighbor from another class.
pub fn neighborhood_selection_error(w: &NeighborhoodMatrix, truth: &Labeling) -> Result<f64> {
    if w.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: w.len(),
        });
    }
    let bad = (0..w.len())
        .filter(|&i| w.row(i).any(|j| truth.get(j) != truth.get(i)))
        .count();
    Ok(bad as f64 / w.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for perm in permutations(n - 1) {
            for pos in 0..=perm.len() {
                let mut p = perm.clone();
                p.insert(pos, n - 1);
                out.push(p);
            }
        }
        out
    }

    /// Minimum disagreement over all relabelings of the predicted labels.
    fn brute_force_ce(pred: &[usize], truth: &[usize]) -> f64 {
        let size = pred.iter().chain(truth).max().unwrap() + 1;
        permutations(size)
            .iter()
            .map(|pi| {
                pred.iter()
                    .zip(truth)
                    .filter(|(&p, &t)| pi[p] != t)
                    .count()
            })
            .min()
            .unwrap() as f64
            / pred.len() as f64
    }

    fn lab(v: &[usize]) -> Labeling {
        Labeling::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ce_trivial_cases() {
        let truth = lab(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(clustering_error(&truth, &truth).unwrap(), 0.0);
        let swapped = lab(&[1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        assert_eq!(clustering_error(&swapped, &truth).unwrap(), 0.0);
        let one_off = lab(&[0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        assert!((clustering_error(&one_off, &truth).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(
            clustering_error(&lab(&[0, 1]), &truth),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ce_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let n = rng.random_range(1..=12);
            let lt = rng.random_range(1..=5);
            let lp = rng.random_range(1..=5);
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..lt)).collect();
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..lp)).collect();
            let ce = clustering_error(&lab(&pred), &lab(&truth)).unwrap();
            assert!((ce - brute_force_ce(&pred, &truth)).abs() < 1e-12);
        }
    }

    #[test]
    fn nse_cases() {
        let truth = Labeling::blocks(2, 10).unwrap();
        let block = NeighborhoodMatrix::from_labels(&truth);
        assert_eq!(neighborhood_selection_error(&block, &truth).unwrap(), 0.0);

        let mut w = NeighborhoodMatrix::identity(20);
        w.set(3, 15);
        assert!((neighborhood_selection_error(&w, &truth).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn nse_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let n = rng.random_range(2..=15);
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let mut w = NeighborhoodMatrix::identity(n);
            let mut dense = vec![vec![false; n]; n];
            for (i, row) in dense.iter_mut().enumerate() {
                row[i] = true;
                for (j, cell) in row.iter_mut().enumerate() {
                    if rng.random_bool(0.15) {
                        *cell = true;
                        w.set(i, j);
                    }
                }
            }
            let mut bad = 0;
            for i in 0..n {
                let mut hit = false;
                for j in 0..n {
                    if dense[i][j] && truth[i] != truth[j] {
                        hit = true;
                    }
                }
                if hit {
                    bad += 1;
                }
            }
            let nse = neighborhood_selection_error(&w, &lab(&truth)).unwrap();
            assert!((nse - bad as f64 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn compact_relabels_in_first_appearance_order() {
        let l = Labeling::compact(&[7, 7, 2, 9, 2]).unwrap();
        assert_eq!(l.as_slice(), &[0, 0, 1, 2, 1]);
        assert_eq!(l.num_clusters(), 3);
    }
}
