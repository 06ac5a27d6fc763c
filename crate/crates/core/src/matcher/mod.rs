//! Query-to-target matching for set-prediction segmenters.
//!
//! [`hungarian`] is the one-to-one baseline: every target gets exactly one
//! query, the rest receive no object. [`match_frequency_based`] grants each
//! target `q_c = ceil(s * max(1, sqrt(t / p_c)))` queries, where `p_c` is the
//! training frequency of the target's class, so rare classes are supervised
//! by several queries at once. It replicates each target column `q_c` times
//! and solves the one-to-one problem on the expanded matrix.
//!
//! Equal-cost optima are resolved deterministically: the per-query target
//! vector is lexicographically smallest, with "no object" ordered last.

mod compose;
mod lap;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compose::{compose_semantic, semantic_argmax, QueryOutput, QueryOutputs};

use crate::error::{Error, Result};

/// Relative distance to an integer under which `s * max(1, sqrt(t / p))` is
/// treated as that integer, so e.g. `p = t / 9, s = 1` yields 3 and not 4.
pub const QUERY_COUNT_SNAP: f64 = 1e-9;

/// Row-major `queries x targets` cost matrix; lower is better.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} cost matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cost entries must be finite, found {bad}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch(format!(
                "ragged cost matrix: expected {cols} columns, found a row with {}",
                r.len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Adds `delta` to every entry.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x + delta).collect(),
        }
    }
}

/// Outcome of a matching. `None` in `query_to_target` is "no object".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub query_to_target: Vec<Option<usize>>,
    pub total_cost: f64,
    /// Matched queries per original target (every target listed).
    pub multiplicity: BTreeMap<usize, usize>,
    /// Whether query grants were reduced to fit the number of queries.
    pub clamped: bool,
}

impl AssignmentResult {
    pub fn matched(&self) -> usize {
        self.query_to_target.iter().filter(|t| t.is_some()).count()
    }
}

/// A frequency-based matching instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchProblem {
    /// `m` queries x `n` targets.
    pub cost: CostMatrix,
    /// Class of each target, length `n`.
    pub target_classes: Vec<u32>,
    /// Training frequency `p_c` of each class that appears among the targets.
    pub class_frequency: BTreeMap<u32, f64>,
    /// Frequency threshold `t`.
    pub t: f64,
    /// Intensity scale `s`.
    pub s: f64,
}

impl MatchProblem {
    pub fn validate(&self) -> Result<()> {
        if self.cost.rows() == 0 || self.cost.cols() == 0 {
            return Err(Error::ShapeMismatch(
                "a match problem needs at least one query and one target".into(),
            ));
        }
        if self.target_classes.len() != self.cost.cols() {
            return Err(Error::ShapeMismatch(format!(
                "{} target classes for {} cost columns",
                self.target_classes.len(),
                self.cost.cols()
            )));
        }
        for c in &self.target_classes {
            let p = self.frequency(*c)?;
            check_frequency(p)?;
        }
        check_hyper(self.t, self.s)
    }

    fn frequency(&self, class: u32) -> Result<f64> {
        self.class_frequency
            .get(&class)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("no frequency given for class {class}")))
    }

    /// Requested query count for every target, before clamping.
    pub fn requested_counts(&self) -> Result<Vec<usize>> {
        self.target_classes
            .iter()
            .map(|&c| query_count(self.frequency(c)?, self.t, self.s))
            .collect()
    }
}

fn check_frequency(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "class frequency must lie in (0, 1], got {p}"
        )))
    }
}

fn check_hyper(t: f64, s: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "frequency threshold t must be positive, got {t}"
        )));
    }
    if !(s >= 1.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "intensity s must be >= 1, got {s}"
        )));
    }
    Ok(())
}

/// Number of queries granted to a target whose class has frequency `p`:
/// `ceil(s * max(1, sqrt(t / p)))`.
pub fn query_count(p: f64, t: f64, s: f64) -> Result<usize> {
    check_frequency(p)?;
    check_hyper(t, s)?;
    let x = s * (t / p).sqrt().max(1.0);
    let nearest = x.round();
    let q = if (x - nearest).abs() <= QUERY_COUNT_SNAP * nearest.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    Ok(q as usize)
}

/// One-to-one minimum-cost matching of `k` targets (columns) to `m >= k`
/// queries (rows).
pub fn hungarian(cost: &CostMatrix) -> Result<AssignmentResult> {
    let (m, k) = (cost.rows(), cost.cols());
    if k > m {
        return Err(Error::TooManyTargets { n: k, m });
    }
    let query_to_target = lap::lexicographic_optimum(cost.as_slice(), m, k);
    let total_cost = query_to_target
        .iter()
        .enumerate()
        .filter_map(|(q, t)| t.map(|t| cost.get(q, t)))
        .sum();
    let mut multiplicity: BTreeMap<usize, usize> = (0..k).map(|j| (j, 0)).collect();
    for t in query_to_target.iter().flatten() {
        *multiplicity.get_mut(t).expect("target in range") += 1;
    }
    Ok(AssignmentResult {
        query_to_target,
        total_cost,
        multiplicity,
        clamped: false,
    })
}

/// A cost matrix whose columns are replicated targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    /// `m x K`.
    pub cost: CostMatrix,
    /// Original target of each expanded column; copies are contiguous and
    /// ordered by target index.
    pub column_target: Vec<usize>,
    /// Requested query count per target.
    pub requested: Vec<usize>,
    /// Granted query count per target (after clamping).
    pub granted: Vec<usize>,
    pub clamped: bool,
}

/// Replicates each target's cost column `q_c` times. If the total exceeds the
/// number of queries, the grant of the target whose class has the highest
/// frequency (ties: lowest target index) is decremented, one at a time, never
/// below one.
pub fn expand_targets(problem: &MatchProblem) -> Result<Expansion> {
    problem.validate()?;
    let (m, n) = (problem.cost.rows(), problem.cost.cols());
    if n > m {
        return Err(Error::TooManyTargets { n, m });
    }
    let requested = problem.requested_counts()?;
    let freq: Vec<f64> = problem
        .target_classes
        .iter()
        .map(|&c| problem.frequency(c))
        .collect::<Result<_>>()?;

    let mut granted = requested.clone();
    let mut total: usize = granted.iter().sum();
    let clamped = total > m;
    while total > m {
        let j = (0..n)
            .filter(|&j| granted[j] > 1)
            .max_by(|&a, &b| freq[a].total_cmp(&freq[b]).then(b.cmp(&a)))
            .expect("n <= m leaves a target above one");
        granted[j] -= 1;
        total -= 1;
    }
    if clamped {
        log::warn!("query grants {requested:?} exceed {m} queries; clamped to {granted:?}");
    }

    let column_target: Vec<usize> = granted
        .iter()
        .enumerate()
        .flat_map(|(j, &q)| std::iter::repeat_n(j, q))
        .collect();
    let k = column_target.len();
    let mut data = Vec::with_capacity(m * k);
    for q in 0..m {
        for &j in &column_target {
            data.push(problem.cost.get(q, j));
        }
    }
    Ok(Expansion {
        cost: CostMatrix::new(m, k, data)?,
        column_target,
        requested,
        granted,
        clamped,
    })
}

/// One-to-many matching: Hungarian on the expanded matrix, mapped back to
/// original target indices.
pub fn match_frequency_based(problem: &MatchProblem) -> Result<AssignmentResult> {
    let expansion = expand_targets(problem)?;
    let expanded = hungarian(&expansion.cost)?;
    let query_to_target: Vec<Option<usize>> = expanded
        .query_to_target
        .iter()
        .map(|col| col.map(|c| expansion.column_target[c]))
        .collect();
    let mut multiplicity: BTreeMap<usize, usize> =
        (0..problem.cost.cols()).map(|j| (j, 0)).collect();
    for t in query_to_target.iter().flatten() {
        *multiplicity.get_mut(t).expect("target in range") += 1;
    }
    Ok(AssignmentResult {
        query_to_target,
        total_cost: expanded.total_cost,
        multiplicity,
        clamped: expansion.clamped,
    })
}

/// Matches independent problems in parallel; results are in input order.
pub fn match_batch(problems: &[MatchProblem], one_to_one: bool) -> Vec<Result<AssignmentResult>> {
    problems
        .par_iter()
        .map(|p| {
            if one_to_one {
                p.validate().and_then(|_| hungarian(&p.cost))
            } else {
                match_frequency_based(p)
            }
        })
        .collect()
}
