//! Greedy elimination of images from a (roughly) balanced dataset until its
//! class-weight Gini coefficient reaches a target.
//!
//! A target distribution is fitted first: class weights of the form
//! `w_max * exp(-lambda * rank)` whose Gini equals the requested value, capped
//! per class at the class's current weight. Classes are then visited from the
//! lightest upwards. For each class, unreserved images containing it are
//! removed until the class weight drops to its target, after which every kept
//! image containing it becomes reserved and is never removed later. The run
//! stops once the Gini of the kept subset reaches the target, the elimination
//! budget is spent, or every class has been visited.

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetIndex;
use crate::error::{Error, Result};
use crate::stats::{
    compute_stats, gini, image_level_weights_of, pixel_level_weights_of, ClassStats, Mode,
};

pub const DEFAULT_PROFILE_TOLERANCE: f64 = 1e-4;
/// Share of the dataset that may be eliminated when no budget is given.
pub const DEFAULT_ELIMINATION_SHARE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub target_gini: f64,
    pub mode: Mode,
    /// Maximum number of eliminated images; `None` means 70% of the dataset.
    pub max_eliminated: Option<usize>,
    pub profile_tolerance: f64,
    /// Reserved for a randomized removal order. The greedy order is fully
    /// deterministic and does not read it.
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(target_gini: f64, mode: Mode) -> Self {
        Self {
            target_gini,
            mode,
            max_eliminated: None,
            profile_tolerance: DEFAULT_PROFILE_TOLERANCE,
            seed: 0,
        }
    }

    pub fn with_max_eliminated(mut self, max: usize) -> Self {
        self.max_eliminated = Some(max);
        self
    }

    pub fn budget(&self, num_images: usize) -> usize {
        self.max_eliminated
            .unwrap_or_else(|| (DEFAULT_ELIMINATION_SHARE * num_images as f64).floor() as usize)
    }

    fn validate(&self) -> Result<()> {
        if !(self.target_gini > 0.0 && self.target_gini < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target gini must lie in (0, 1), got {}",
                self.target_gini
            )));
        }
        if !(self.profile_tolerance > 0.0 && self.profile_tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "profile tolerance must be positive, got {}",
                self.profile_tolerance
            )));
        }
        Ok(())
    }
}

/// Fitted per-class target weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDistribution {
    pub lambda: f64,
    /// Rank of each class, heaviest = 0.
    pub ranks: Vec<usize>,
    /// `w_max * exp(-lambda * rank)` before capping.
    pub profile: Vec<f64>,
    /// Gini of `weights`.
    pub gini: f64,
    /// `min(profile, current weight)` per class; `lambda` is fitted so that
    /// their Gini equals the target.
    pub weights: Vec<f64>,
}

/// Visiting order of the sampler: ascending weight, ties by ascending id.
pub fn class_visit_order(weights: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..weights.len() as u32).collect();
    order.sort_by(|&a, &b| {
        weights[a as usize]
            .total_cmp(&weights[b as usize])
            .then(a.cmp(&b))
    });
    order
}

pub fn derive_target_distribution(
    stats: &ClassStats,
    target_gini: f64,
    mode: Mode,
    tolerance: f64,
) -> Result<TargetDistribution> {
    let weights = stats.weights(mode);
    let c = weights.len();
    let bound = (c as f64 - 1.0) / c as f64;
    if target_gini >= bound {
        return Err(Error::UnreachableTarget {
            target: target_gini,
            bound,
        });
    }
    let current = stats.gini(mode);
    if target_gini <= current {
        return Err(Error::TargetNotAboveCurrent {
            target: target_gini,
            current,
        });
    }

    // The rank order is the reverse of the visiting order, so the class the
    // sampler visits first gets the smallest target.
    let mut ranks = vec![0usize; c];
    for (r, &class) in class_visit_order(&weights).iter().rev().enumerate() {
        ranks[class as usize] = r;
    }

    let w_max = weights.iter().copied().fold(0.0, f64::max);
    let profile_at = |lambda: f64| -> Vec<f64> {
        ranks
            .iter()
            .map(|&r| w_max * (-lambda * r as f64).exp())
            .collect()
    };
    let capped_at = |lambda: f64| -> Vec<f64> {
        profile_at(lambda)
            .iter()
            .zip(&weights)
            .map(|(&p, &w)| p.min(w))
            .collect()
    };
    let gini_at = |lambda: f64| gini(&capped_at(lambda)).expect("the heaviest class keeps w_max");

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while gini_at(hi) < target_gini {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::UnreachableTarget {
                target: target_gini,
                bound,
            });
        }
    }
    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..200 {
        lambda = 0.5 * (lo + hi);
        let g = gini_at(lambda);
        if (g - target_gini).abs() <= tolerance * 1e-3 || hi - lo <= f64::EPSILON * hi {
            break;
        }
        if g < target_gini {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    let capped = capped_at(lambda);
    let fitted = gini(&capped)?;
    debug_assert!((fitted - target_gini).abs() <= tolerance);
    let profile = profile_at(lambda);

    Ok(TargetDistribution {
        lambda,
        ranks,
        profile,
        gini: fitted,
        weights: capped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationOutcome {
    /// The class was processed and its removals kept.
    Completed,
    /// The removals would have lowered the subset Gini and were undone.
    RolledBack,
    /// The elimination budget ran out while processing the class.
    ThresholdReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub class_id: u32,
    pub removed: usize,
    pub gini_after: f64,
    pub outcome: IterationOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    ThresholdReached,
    ClassesExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub mode: Mode,
    pub target_gini: f64,
    pub max_eliminated: usize,
    pub initial_gini_image: f64,
    pub initial_gini_pixel: f64,
    pub lambda: f64,
    pub kept_ids: Vec<String>,
    pub eliminated_count: usize,
    pub achieved_gini_image: f64,
    pub achieved_gini_pixel: f64,
    pub stop_reason: StopReason,
    pub iterations: Vec<IterationRecord>,
}

impl SamplerReport {
    pub fn achieved_gini(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Image => self.achieved_gini_image,
            Mode::Pixel => self.achieved_gini_pixel,
        }
    }
}

struct State<'a> {
    index: &'a DatasetIndex,
    mode: Mode,
    /// Per image: (class, contribution to that class's weight).
    contributions: Vec<Vec<(u32, f64)>>,
    kept: Vec<bool>,
    reserved: Vec<bool>,
    kept_images_per_class: Vec<usize>,
    weights: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(index: &'a DatasetIndex, stats: &ClassStats, mode: Mode) -> Self {
        let contributions = index
            .images()
            .iter()
            .map(|rec| {
                let area = rec.area() as f64;
                rec.per_class_pixels
                    .iter()
                    .map(|(&c, &n)| match mode {
                        Mode::Image => (c, 1.0),
                        Mode::Pixel => (c, n as f64 / area),
                    })
                    .collect()
            })
            .collect();
        Self {
            index,
            mode,
            contributions,
            kept: vec![true; index.len()],
            reserved: vec![false; index.len()],
            kept_images_per_class: stats.image_weights.iter().map(|&w| w as usize).collect(),
            weights: stats.weights(mode),
        }
    }

    fn remove(&mut self, i: usize) {
        debug_assert!(self.kept[i] && !self.reserved[i]);
        self.kept[i] = false;
        for &(c, w) in &self.contributions[i] {
            self.weights[c as usize] -= w;
            self.kept_images_per_class[c as usize] -= 1;
        }
    }

    fn restore(&mut self, i: usize) {
        debug_assert!(!self.kept[i]);
        self.kept[i] = true;
        for &(c, w) in &self.contributions[i] {
            self.weights[c as usize] += w;
            self.kept_images_per_class[c as usize] += 1;
        }
    }

    /// Recomputes weights of the kept subset exactly as the stats module does
    /// and returns their Gini.
    fn resync(&mut self) -> f64 {
        let kept = self
            .index
            .images()
            .iter()
            .zip(&self.kept)
            .filter(|(_, &k)| k)
            .map(|(r, _)| r);
        let c = self.index.num_classes();
        self.weights = match self.mode {
            Mode::Image => image_level_weights_of(kept, c)
                .into_iter()
                .map(|w| w as f64)
                .collect(),
            Mode::Pixel => pixel_level_weights_of(kept, c),
        };
        gini(&self.weights).expect("kept subset retains every present class")
    }

    /// Removing `i` must not empty any class it contains.
    fn removable(&self, i: usize) -> bool {
        self.kept[i]
            && !self.reserved[i]
            && self.contributions[i]
                .iter()
                .all(|&(c, _)| self.kept_images_per_class[c as usize] >= 2)
    }

    /// Weight of the lightest other class in image `i`; images whose other
    /// classes are all heavy cost the tail least and go first.
    fn removal_score(&self, i: usize, class: u32) -> f64 {
        self.contributions[i]
            .iter()
            .filter(|&&(c, _)| c != class)
            .map(|&(c, _)| self.weights[c as usize])
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn sample_lt(index: &DatasetIndex, config: &SamplerConfig) -> Result<SamplerReport> {
    config.validate()?;
    let mode = config.mode;
    let stats = compute_stats(index)?;
    let target =
        derive_target_distribution(&stats, config.target_gini, mode, config.profile_tolerance)?;
    let budget = config.budget(index.len());

    let mut images_of_class: Vec<Vec<usize>> = vec![Vec::new(); index.num_classes() as usize];
    for (i, rec) in index.images().iter().enumerate() {
        for c in rec.classes() {
            images_of_class[c as usize].push(i);
        }
    }
    // Tie-break between equal scores: ascending image id.
    let mut by_id: Vec<usize> = (0..index.len()).collect();
    by_id.sort_by(|&a, &b| index.images()[a].id.cmp(&index.images()[b].id));
    let mut id_rank = vec![0usize; index.len()];
    for (r, &i) in by_id.iter().enumerate() {
        id_rank[i] = r;
    }

    let original = stats.weights(mode);
    let mut state = State::new(index, &stats, mode);
    let mut gini_now = stats.gini(mode);
    let mut eliminated = 0usize;
    let mut iterations = Vec::new();
    let mut stop_reason = StopReason::ClassesExhausted;

    for class in class_visit_order(&original) {
        if original[class as usize] <= 0.0 {
            continue;
        }
        let goal = target.weights[class as usize];
        let mut removed = Vec::new();
        let mut out_of_budget = false;

        while state.weights[class as usize] > goal {
            let best = images_of_class[class as usize]
                .iter()
                .copied()
                .filter(|&i| state.removable(i))
                .max_by(|&a, &b| {
                    state
                        .removal_score(a, class)
                        .total_cmp(&state.removal_score(b, class))
                        .then_with(|| id_rank[b].cmp(&id_rank[a]))
                });
            let Some(i) = best else { break };
            if eliminated == budget {
                out_of_budget = true;
                break;
            }
            state.remove(i);
            eliminated += 1;
            removed.push(i);
        }

        let mut gini_after = if removed.is_empty() {
            gini_now
        } else {
            state.resync()
        };
        let mut outcome = if out_of_budget {
            IterationOutcome::ThresholdReached
        } else {
            IterationOutcome::Completed
        };
        if gini_after < gini_now {
            for &i in &removed {
                state.restore(i);
            }
            eliminated -= removed.len();
            removed.clear();
            gini_after = state.resync();
            debug_assert_eq!(gini_after, gini_now);
            if !out_of_budget {
                outcome = IterationOutcome::RolledBack;
            }
        }
        for &i in &images_of_class[class as usize] {
            if state.kept[i] {
                state.reserved[i] = true;
            }
        }
        log::debug!(
            "class {class}: removed {} (total {eliminated}), gini {gini_after:.6}",
            removed.len()
        );
        iterations.push(IterationRecord {
            class_id: class,
            removed: removed.len(),
            gini_after,
            outcome,
        });
        gini_now = gini_after;

        if out_of_budget {
            stop_reason = StopReason::ThresholdReached;
            break;
        }
        if gini_now >= config.target_gini {
            stop_reason = StopReason::TargetReached;
            break;
        }
    }

    let kept_positions: Vec<usize> = (0..index.len()).filter(|&i| state.kept[i]).collect();
    let subset = index.subset_by_position(&kept_positions);
    let achieved = compute_stats(&subset)?;
    debug_assert_eq!(achieved.gini(mode), gini_now);

    Ok(SamplerReport {
        mode,
        target_gini: config.target_gini,
        max_eliminated: budget,
        initial_gini_image: stats.gini_image,
        initial_gini_pixel: stats.gini_pixel,
        lambda: target.lambda,
        kept_ids: subset.images().iter().map(|r| r.id.clone()).collect(),
        eliminated_count: eliminated,
        achieved_gini_image: achieved.gini_image,
        achieved_gini_pixel: achieved.gini_pixel,
        stop_reason,
        iterations,
    })
}

/// Applies a report to its source index.
pub fn apply_report(index: &DatasetIndex, report: &SamplerReport) -> Result<DatasetIndex> {
    index.subset(&report.kept_ids)
}
