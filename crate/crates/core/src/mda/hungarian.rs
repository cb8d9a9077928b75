use crate::error::{Error, Result};

/// Minimum-cost perfect matching of a square matrix (shortest augmenting
/// paths with potentials, O(m³)).
///
/// Returns `(assignment, total)` where `assignment[i]` is the column matched
/// to row `i`, and `total` is the plain left-to-right sum over rows.
pub fn hungarian_2d_assignment(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let m = cost.len();
    for (i, row) in cost.iter().enumerate() {
        if row.len() != m {
            return Err(Error::InvalidMatrix(format!(
                "row {i} has {} entries, expected {m}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) is not finite")));
        }
    }
    if m == 0 {
        return Ok((Vec::new(), 0.0));
    }

    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut matched_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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

    let mut assignment = vec![0; m];
    for j in 1..=m {
        assignment[matched_row[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok((assignment, total))
}
