//! Maximum-weight perfect matching on a square integer matrix (Hungarian
//! algorithm, shortest augmenting path form, `O(n^3)`).

/// Returns `(total, assignment)` where `assignment[row]` is the column matched
/// to `row` and `total` is the largest achievable sum of matched weights.
pub fn max_weight_assignment(weights: &[Vec<i64>]) -> (i64, Vec<usize>) {
    let n = weights.len();
    if n == 0 {
        return (0, Vec::new());
    }
    assert!(
        weights.iter().all(|row| row.len() == n),
        "weight matrix must be square"
    );
    // minimize cost = -weight; 1-based potentials with a virtual column 0
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| weights[i][j])
        .sum();
    (total, assignment)
}
