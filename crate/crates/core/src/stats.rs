//! Class weights, Gini coefficients and the frequent/common/rare split.
//!
//! The image-level weight of a class is the number of images it occurs in.
//! The pixel-level weight is the sum over images of the fraction of each
//! image's pixels it covers. Both are summarized by the Gini coefficient of the
//! per-class weight vector.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetIndex, ImageRecord};
use crate::error::{Error, Result};

/// Which class weighting a statistic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Image,
    Pixel,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Image, Mode::Pixel];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Image => "image",
            Mode::Pixel => "pixel",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Mode::Image),
            "pixel" => Ok(Mode::Pixel),
            other => Err(Error::InvalidParameter(format!(
                "mode must be \"image\" or \"pixel\", got {other:?}"
            ))),
        }
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn image_level_weights(index: &DatasetIndex) -> Vec<u64> {
    image_level_weights_of(index.images(), index.num_classes())
}

/// Image-level weights over an arbitrary selection of records.
pub fn image_level_weights_of<'a, I>(records: I, num_classes: u32) -> Vec<u64>
where
    I: IntoIterator<Item = &'a ImageRecord>,
{
    let mut w = vec![0u64; num_classes as usize];
    for rec in records {
        for c in rec.classes() {
            w[c as usize] += 1;
        }
    }
    w
}

pub fn pixel_level_weights(index: &DatasetIndex) -> Vec<f64> {
    pixel_level_weights_of(index.images(), index.num_classes())
}

/// Pixel-level weights over an arbitrary selection of records, accumulated in
/// iteration order.
pub fn pixel_level_weights_of<'a, I>(records: I, num_classes: u32) -> Vec<f64>
where
    I: IntoIterator<Item = &'a ImageRecord>,
{
    let mut acc = vec![CompensatedSum::default(); num_classes as usize];
    for rec in records {
        let area = rec.area() as f64;
        for (&c, &n) in &rec.per_class_pixels {
            acc[c as usize].add(n as f64 / area);
        }
    }
    acc.iter().map(CompensatedSum::value).collect()
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidWeights(format!(
            "weights must be finite and non-negative, found {bad}"
        )));
    }
    let total: CompensatedSum = weights.iter().copied().collect();
    let total = total.value();
    if total <= 0.0 {
        return Err(Error::InvalidWeights("all weights are zero".into()));
    }
    Ok(total)
}

/// Gini coefficient via the sorted (Lorenz) form
/// `G = 2 * sum_i i * x_(i) / (n * sum x) - (n + 1) / n`, ascending order,
/// 1-based `i`. Lies in `[0, (n-1)/n]`.
pub fn gini(weights: &[f64]) -> Result<f64> {
    let total = check_weights(weights)?;
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let ranked: CompensatedSum = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (i + 1) as f64 * x)
        .collect();
    let g = 2.0 * ranked.value() / (n * total) - (n + 1.0) / n;
    Ok(g.max(0.0))
}

/// Gini coefficient via mean absolute difference,
/// `sum_i sum_j |x_i - x_j| / (2 n^2 mean)`. Quadratic; used to cross-check
/// [`gini`].
pub fn gini_pairwise(weights: &[f64]) -> Result<f64> {
    let total = check_weights(weights)?;
    let n = weights.len() as f64;
    let diffs: CompensatedSum = weights
        .iter()
        .flat_map(|a| weights.iter().map(move |b| (a - b).abs()))
        .collect();
    // 2 n^2 mean = 2 n total
    Ok(diffs.value() / (2.0 * n * total))
}

/// Class weights and their Gini coefficients for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub num_images: usize,
    pub image_weights: Vec<u64>,
    pub pixel_weights: Vec<f64>,
    pub gini_image: f64,
    pub gini_pixel: f64,
}

impl ClassStats {
    pub fn num_classes(&self) -> usize {
        self.image_weights.len()
    }

    pub fn weights(&self, mode: Mode) -> Vec<f64> {
        match mode {
            Mode::Image => self.image_weights.iter().map(|&w| w as f64).collect(),
            Mode::Pixel => self.pixel_weights.clone(),
        }
    }

    pub fn gini(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Image => self.gini_image,
            Mode::Pixel => self.gini_pixel,
        }
    }

    /// Per-class frequency `weight / N` (image-level by default in the
    /// matcher).
    pub fn frequencies(&self, mode: Mode) -> Vec<f64> {
        let n = self.num_images as f64;
        self.weights(mode).into_iter().map(|w| w / n).collect()
    }

    pub fn from_weights(
        num_images: usize,
        image_weights: Vec<u64>,
        pixel_weights: Vec<f64>,
    ) -> Result<Self> {
        if image_weights.len() != pixel_weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} image-level weights vs {} pixel-level weights",
                image_weights.len(),
                pixel_weights.len()
            )));
        }
        let image_f: Vec<f64> = image_weights.iter().map(|&w| w as f64).collect();
        let gini_image = gini(&image_f)?;
        let gini_pixel = gini(&pixel_weights)?;
        Ok(Self {
            num_images,
            image_weights,
            pixel_weights,
            gini_image,
            gini_pixel,
        })
    }

    pub fn to_file(&self) -> StatsFile {
        StatsFile {
            mode_agnostic: ModeAgnostic {
                num_images: self.num_images,
                num_classes: self.num_classes(),
            },
            image_level: LevelStats {
                weights: self.image_weights.iter().map(|&w| w as f64).collect(),
                gini: self.gini_image,
            },
            pixel_level: LevelStats {
                weights: self.pixel_weights.clone(),
                gini: self.gini_pixel,
            },
        }
    }

    /// Rebuilds stats from a stats file. Gini values are recomputed and must
    /// agree with the stored ones.
    pub fn from_file(file: &StatsFile) -> Result<Self> {
        let c = file.mode_agnostic.num_classes;
        if file.image_level.weights.len() != c || file.pixel_level.weights.len() != c {
            return Err(Error::ShapeMismatch(format!(
                "stats file declares {c} classes but lists {} image-level and {} pixel-level weights",
                file.image_level.weights.len(),
                file.pixel_level.weights.len()
            )));
        }
        let image_weights = file
            .image_level
            .weights
            .iter()
            .map(|&w| {
                if w >= 0.0 && w.fract() == 0.0 {
                    Ok(w as u64)
                } else {
                    Err(Error::InvalidWeights(format!(
                        "image-level weight {w} is not a non-negative integer"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_weights(
            file.mode_agnostic.num_images,
            image_weights,
            file.pixel_level.weights.clone(),
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: StatsFile = crate::io::read_json(path)?;
        Self::from_file(&file)
    }
}

pub fn compute_stats(index: &DatasetIndex) -> Result<ClassStats> {
    ClassStats::from_weights(
        index.len(),
        image_level_weights(index),
        pixel_level_weights(index),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub mode_agnostic: ModeAgnostic,
    pub image_level: LevelStats,
    pub pixel_level: LevelStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAgnostic {
    pub num_images: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub weights: Vec<f64>,
    pub gini: f64,
}

/// Partition of class ids into frequent, common and rare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySplit {
    pub mode: Mode,
    pub frequent: BTreeSet<u32>,
    pub common: BTreeSet<u32>,
    pub rare: BTreeSet<u32>,
}

/// Share of total weight mass that bounds the frequent bucket.
pub const FREQUENT_MASS: f64 = 0.6;
/// Share of total weight mass that bounds frequent + common.
pub const COMMON_MASS: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bucket {
    Frequent,
    Common,
    Rare,
}

impl FrequencySplit {
    pub fn bucket_of(&self, class: u32) -> Option<Bucket> {
        if self.frequent.contains(&class) {
            Some(Bucket::Frequent)
        } else if self.common.contains(&class) {
            Some(Bucket::Common)
        } else if self.rare.contains(&class) {
            Some(Bucket::Rare)
        } else {
            None
        }
    }

    pub fn bucket(&self, bucket: Bucket) -> &BTreeSet<u32> {
        match bucket {
            Bucket::Frequent => &self.frequent,
            Bucket::Common => &self.common,
            Bucket::Rare => &self.rare,
        }
    }
}

pub fn split_classes(stats: &ClassStats, mode: Mode) -> FrequencySplit {
    split_weights(&stats.weights(mode), mode)
}

/// Classes sorted by weight descending (ties: lower id first). A class is
/// frequent while the weight mass strictly before it is below 60% of the total,
/// common while below 80%, rare otherwise. Zero-weight classes are always rare.
pub fn split_weights(weights: &[f64], mode: Mode) -> FrequencySplit {
    let mut order: Vec<u32> = (0..weights.len() as u32).collect();
    order.sort_by(|&a, &b| {
        weights[b as usize]
            .total_cmp(&weights[a as usize])
            .then(a.cmp(&b))
    });
    let total: CompensatedSum = weights.iter().copied().collect();
    let total = total.value();

    let mut split = FrequencySplit {
        mode,
        frequent: BTreeSet::new(),
        common: BTreeSet::new(),
        rare: BTreeSet::new(),
    };
    let mut before = CompensatedSum::default();
    for c in order {
        let w = weights[c as usize];
        let mass = before.value();
        if w <= 0.0 {
            split.rare.insert(c);
        } else if mass < FREQUENT_MASS * total {
            split.frequent.insert(c);
        } else if mass < COMMON_MASS * total {
            split.common.insert(c);
        } else {
            split.rare.insert(c);
        }
        before.add(w);
    }
    split
}
