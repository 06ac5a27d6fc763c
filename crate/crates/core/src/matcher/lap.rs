//! Rectangular linear assignment: shortest augmenting paths with dual
//! potentials, O(rows^2 * cols).

/// Assigns every row to a distinct column minimizing the summed cost.
/// `cost` is row-major `rows x cols` with `rows <= cols`. Returns the column
/// chosen for each row.
pub(crate) fn solve(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    debug_assert!(rows <= cols);
    debug_assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return Vec::new();
    }
    let at = |r: usize, c: usize| cost[(r - 1) * cols + (c - 1)];

    // 1-based; column 0 and row 0 are sentinels.
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for row in 1..=rows {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for c in 1..=cols {
                if used[c] {
                    continue;
                }
                let reduced = at(r0, c) - u[r0] - v[c];
                if reduced < minv[c] {
                    minv[c] = reduced;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for c in 0..=cols {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; rows];
    for c in 1..=cols {
        if owner[c] != 0 {
            assignment[owner[c] - 1] = c - 1;
        }
    }
    assignment
}

/// Optimal value of assigning `targets` to distinct `queries` under
/// `cost(query, target)`, with the matching as `(query, target)` pairs.
fn optimum<F>(cost: &F, queries: &[usize], targets: &[usize]) -> (f64, Vec<(usize, usize)>)
where
    F: Fn(usize, usize) -> f64,
{
    let (rows, cols) = (targets.len(), queries.len());
    let mut flat = Vec::with_capacity(rows * cols);
    for &t in targets {
        for &q in queries {
            flat.push(cost(q, t));
        }
    }
    let cols_of_rows = solve(&flat, rows, cols);
    let pairs: Vec<(usize, usize)> = cols_of_rows
        .iter()
        .enumerate()
        .map(|(r, &c)| (queries[c], targets[r]))
        .collect();
    let value = pairs.iter().map(|&(q, t)| cost(q, t)).sum();
    (value, pairs)
}

/// Relative slack under which two assignment totals count as equal.
pub(crate) const COST_TIE_TOLERANCE: f64 = 1e-9;

/// Among all optimal injective target-to-query assignments, returns the one
/// whose per-query vector (`None` = unmatched, ordered after every target) is
/// lexicographically smallest.
pub(crate) fn lexicographic_optimum(
    cost: &[f64],
    num_queries: usize,
    num_targets: usize,
) -> Vec<Option<usize>> {
    debug_assert!(num_targets <= num_queries);
    let c = |q: usize, t: usize| cost[q * num_targets + t];

    let all_queries: Vec<usize> = (0..num_queries).collect();
    let all_targets: Vec<usize> = (0..num_targets).collect();
    let (best, pairs) = optimum(&c, &all_queries, &all_targets);
    let slack = COST_TIE_TOLERANCE * (1.0 + best.abs());

    let mut incumbent = vec![None; num_queries];
    for (q, t) in pairs {
        incumbent[q] = Some(t);
    }

    let mut fixed_cost = 0.0;
    let mut free_targets = all_targets;
    let mut result = Vec::with_capacity(num_queries);

    for q in 0..num_queries {
        let rest: Vec<usize> = (q + 1..num_queries).collect();
        let mut chosen = None;
        // Try every option that sorts before the incumbent's choice.
        let smaller: Vec<Option<usize>> = free_targets
            .iter()
            .copied()
            .map(Some)
            .chain(std::iter::once(None))
            .take_while(|&opt| lt(opt, incumbent[q]))
            .collect();
        for option in smaller {
            let remaining: Vec<usize> = free_targets
                .iter()
                .copied()
                .filter(|&t| Some(t) != option)
                .collect();
            if remaining.len() > rest.len() {
                continue;
            }
            let here = option.map_or(0.0, |t| c(q, t));
            let (value, pairs) = optimum(&c, &rest, &remaining);
            if fixed_cost + here + value <= best + slack {
                for slot in incumbent.iter_mut().skip(q + 1) {
                    *slot = None;
                }
                for (qq, t) in pairs {
                    incumbent[qq] = Some(t);
                }
                chosen = Some(option);
                break;
            }
        }
        let option = chosen.unwrap_or(incumbent[q]);
        if let Some(t) = option {
            fixed_cost += c(q, t);
            free_targets.retain(|&x| x != t);
        }
        result.push(option);
    }
    result
}

/// Order on per-query choices: targets ascending, `None` last.
fn lt(a: Option<usize>, b: Option<usize>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x < y,
        (Some(_), None) => true,
        (None, _) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_two_by_two() {
        assert_eq!(solve(&[1.0, 2.0, 2.0, 1.0], 2, 2), vec![0, 1]);
        assert_eq!(solve(&[2.0, 1.0, 1.0, 2.0], 2, 2), vec![1, 0]);
    }

    #[test]
    fn rectangular() {
        // one target row, three query columns
        assert_eq!(solve(&[5.0, 3.0, 4.0], 1, 3), vec![1]);
    }

    #[test]
    fn lexicographic_prefers_low_targets_for_early_queries() {
        // all costs equal: query 0 -> target 0, query 1 -> target 1, rest none
        let cost = vec![1.0; 4 * 2];
        assert_eq!(
            lexicographic_optimum(&cost, 4, 2),
            vec![Some(0), Some(1), None, None]
        );
    }

    #[test]
    fn lexicographic_with_duplicate_columns() {
        // two identical target columns, queries 1 and 2 cheapest
        let cost = vec![5.0, 5.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(
            lexicographic_optimum(&cost, 3, 2),
            vec![None, Some(0), Some(1)]
        );
    }
}
