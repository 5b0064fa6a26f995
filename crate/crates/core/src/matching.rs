//! Minimum-cost bipartite assignment (Hungarian method with potentials) and
//! its capacitated extension, where each column may take several rows.

/// Costs at or above this are treated as forbidden-but-finite.
const BIG: f64 = 1e30;

/// Assign every row to a distinct column minimizing the total cost.
///
/// `costs` is `rows x cols` with `rows <= cols`. Returns the column chosen
/// for each row. Non-finite costs are clamped to a large finite value so the
/// potentials stay well defined. Ties resolve towards lower column indices
/// as rows are inserted in index order.
pub fn min_cost_assignment(costs: &[Vec<f64>]) -> Vec<usize> {
    let n = costs.len();
    if n == 0 {
        return Vec::new();
    }
    let m = costs[0].len();
    assert!(n <= m, "assignment needs rows <= cols ({n} > {m})");
    let cost = |i: usize, j: usize| {
        let c = costs[i - 1][j - 1];
        if c.is_finite() {
            c.min(BIG)
        } else {
            BIG
        }
    };

    // 1-indexed; column 0 is the virtual start node
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
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
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Assign every row to one column where column `j` accepts at most
/// `capacity[j]` rows (a min-cost b-matching). Requires
/// `sum(capacity) >= rows`.
pub fn min_cost_b_matching(costs: &[Vec<f64>], capacity: &[usize]) -> Vec<usize> {
    let slots: Vec<usize> = capacity
        .iter()
        .enumerate()
        .flat_map(|(j, &c)| std::iter::repeat_n(j, c))
        .collect();
    let expanded: Vec<Vec<f64>> = costs
        .iter()
        .map(|row| slots.iter().map(|&j| row[j]).collect())
        .collect();
    min_cost_assignment(&expanded)
        .into_iter()
        .map(|s| slots[s])
        .collect()
}

pub fn assignment_cost(costs: &[Vec<f64>], assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i][j])
        .sum()
}
