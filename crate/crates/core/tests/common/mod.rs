//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use num::{BigInt, BigRational, One, ToPrimitive, Zero};

use ltss::dataset::LabelMap;

/// Exhaustive minimum over assignments where target `j` receives exactly
/// `quotas[j]` queries and every other query gets nothing. Returns the optimum
/// and the lexicographically smallest optimal per-query vector (targets
/// ascending, `None` last).
pub fn brute_force_assignment(cost: &[Vec<f64>], quotas: &[usize]) -> (f64, Vec<Option<usize>>) {
    let m = cost.len();
    let mut all: Vec<(f64, Vec<Option<usize>>)> = Vec::new();
    let mut current = Vec::with_capacity(m);
    let mut used = vec![0usize; quotas.len()];
    enumerate(cost, quotas, &mut used, &mut current, &mut all);
    assert!(!all.is_empty(), "no feasible assignment");
    let best = all.iter().map(|(c, _)| *c).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + best.abs());
    // `all` is produced in lexicographic order already
    let first = all.into_iter().find(|(c, _)| *c <= best + tol).unwrap();
    (best, first.1)
}

fn enumerate(
    cost: &[Vec<f64>],
    quotas: &[usize],
    used: &mut Vec<usize>,
    current: &mut Vec<Option<usize>>,
    out: &mut Vec<(f64, Vec<Option<usize>>)>,
) {
    let q = current.len();
    let m = cost.len();
    let missing: usize = quotas.iter().zip(used.iter()).map(|(a, b)| a - b).sum();
    if missing > m - q {
        return;
    }
    if q == m {
        let total = current
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|t| cost[i][t]))
            .sum();
        out.push((total, current.clone()));
        return;
    }
    for t in 0..quotas.len() {
        if used[t] < quotas[t] {
            used[t] += 1;
            current.push(Some(t));
            enumerate(cost, quotas, used, current, out);
            current.pop();
            used[t] -= 1;
        }
    }
    current.push(None);
    enumerate(cost, quotas, used, current, out);
    current.pop();
}

/// Gini via the pairwise definition, plain loops.
pub fn gini_oracle(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for a in x {
        for b in x {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean)
}

/// Exact per-class sum of pixel fractions over rasters.
pub fn rational_pixel_weights(maps: &[LabelMap], num_classes: u32) -> Vec<f64> {
    let mut acc = vec![BigRational::zero(); num_classes as usize];
    for m in maps {
        let area = BigInt::from(m.area());
        for &id in m.class_ids() {
            if id < num_classes {
                acc[id as usize] += BigRational::new(BigInt::one(), area.clone());
            }
        }
    }
    acc.iter().map(|r| r.to_f64().unwrap()).collect()
}

/// Per-class count of rasters containing the class, by boolean scan.
pub fn presence_counts(maps: &[LabelMap], num_classes: u32) -> Vec<u64> {
    let mut out = vec![0u64; num_classes as usize];
    for m in maps {
        let mut seen = vec![false; num_classes as usize];
        for &id in m.class_ids() {
            if id < num_classes {
                seen[id as usize] = true;
            }
        }
        for (o, s) in out.iter_mut().zip(seen) {
            *o += s as u64;
        }
    }
    out
}

/// Confusion counts by direct per-pixel tally: `[gt][pred]`, pred column
/// `num_classes` for ignored predictions.
pub fn tally(pairs: &[(LabelMap, LabelMap)], num_classes: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; num_classes + 1]; num_classes];
    for (gt, pred) in pairs {
        for y in 0..gt.height() {
            for x in 0..gt.width() {
                let g = gt.get(x, y);
                if g == gt.ignore_id() {
                    continue;
                }
                let p = pred.get(x, y);
                let col = if p == pred.ignore_id() {
                    num_classes
                } else {
                    p as usize
                };
                t[g as usize][col] += 1;
            }
        }
    }
    t
}

/// Parses a decimal literal such as "0.00015" into an exact rational.
pub fn decimal(s: &str) -> BigRational {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits: BigInt = format!("{int}{frac}").parse().unwrap();
    let denom = num::pow(BigInt::from(10), frac.len());
    BigRational::new(digits, denom)
}

/// Smallest integer q >= 1 with q >= s and (q / s)^2 >= t / p, i.e. the query
/// count in exact arithmetic.
pub fn query_count_exact(p: &BigRational, t: &BigRational, s: &BigRational) -> usize {
    let mut q = 1usize;
    loop {
        let qr = BigRational::from_integer(BigInt::from(q));
        if &qr >= s && &qr * &qr * p >= s * s * t {
            return q;
        }
        q += 1;
    }
}
