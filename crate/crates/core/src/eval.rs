//! Confusion-matrix mIoU, overall and per frequency split.
//!
//! Splits come from the *training* set statistics and are applied to the
//! evaluation set. Ground-truth ignore pixels are skipped. A valid
//! ground-truth pixel predicted as the ignore id lands in an extra "void"
//! column: it counts as a miss for its class and as a hit for no class.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetIndex, LabelMap};
use crate::error::{Error, Result};
use crate::stats::{split_classes, Bucket, ClassStats, Mode};

/// `counts[g][p]`: pixels with ground truth `g` predicted `p`; column
/// `num_classes` is the void prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * (num_classes + 1)],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn width(&self) -> usize {
        self.num_classes + 1
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.width() + pred]
    }

    pub fn void(&self, gt: usize) -> u64 {
        self.get(gt, self.num_classes)
    }

    /// Adds raw counts, e.g. from a hand-built table; `pred == num_classes`
    /// addresses the void column.
    pub fn add(&mut self, gt: usize, pred: usize, n: u64) {
        let w = self.width();
        self.counts[gt * w + pred] += n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Tallies one image pair.
    pub fn accumulate(&mut self, gt: &LabelMap, pred: &LabelMap) -> Result<()> {
        if !gt.same_shape(pred) {
            return Err(Error::ShapeMismatch(format!(
                "ground truth is {}x{}, prediction is {}x{}",
                gt.width(),
                gt.height(),
                pred.width(),
                pred.height()
            )));
        }
        let c = self.num_classes as u32;
        let w = self.width();
        for (&g, &p) in gt.class_ids().iter().zip(pred.class_ids()) {
            if g == gt.ignore_id() {
                continue;
            }
            if g >= c {
                return Err(Error::InvalidParameter(format!(
                    "ground-truth id {g} out of range for {c} classes"
                )));
            }
            let col = if p == pred.ignore_id() {
                self.num_classes
            } else if p < c {
                p as usize
            } else {
                return Err(Error::InvalidParameter(format!(
                    "predicted id {p} out of range for {c} classes"
                )));
            };
            self.counts[g as usize * w + col] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        debug_assert_eq!(self.num_classes, other.num_classes);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// `tp / (gt_c + pred_c - tp)`, or `None` when class `c` occurs in neither
    /// ground truth nor prediction.
    pub fn iou(&self, c: usize) -> Option<f64> {
        let tp = self.get(c, c);
        let row: u64 = (0..self.width()).map(|p| self.get(c, p)).sum();
        let col: u64 = (0..self.num_classes).map(|g| self.get(g, c)).sum();
        let union = row + col - tp;
        (union > 0).then(|| tp as f64 / union as f64)
    }

    pub fn per_class_iou(&self) -> Vec<Option<f64>> {
        (0..self.num_classes).map(|c| self.iou(c)).collect()
    }

    /// Mean IoU over classes with a defined IoU, optionally restricted to
    /// `classes`.
    pub fn miou(&self, classes: Option<&BTreeSet<u32>>) -> Result<f64> {
        let ious: Vec<f64> = (0..self.num_classes)
            .filter(|&c| classes.is_none_or(|s| s.contains(&(c as u32))))
            .filter_map(|c| self.iou(c))
            .collect();
        if ious.is_empty() {
            return Err(Error::UndefinedMiou);
        }
        Ok(ious.iter().sum::<f64>() / ious.len() as f64)
    }
}

/// Tallies image pairs in parallel. Per-image tables are merged by integer
/// addition, so the result does not depend on order or thread count.
pub fn confusion_from_pairs(
    pairs: &[(LabelMap, LabelMap)],
    num_classes: usize,
) -> Result<ConfusionMatrix> {
    pairs
        .par_iter()
        .map(|(gt, pred)| {
            let mut cm = ConfusionMatrix::new(num_classes);
            cm.accumulate(gt, pred)?;
            Ok(cm)
        })
        .try_reduce(
            || ConfusionMatrix::new(num_classes),
            |mut a, b| {
                a.merge(&b);
                Ok(a)
            },
        )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMiou {
    pub miou_r: Option<f64>,
    pub miou_c: Option<f64>,
    pub miou_f: Option<f64>,
}

impl SplitMiou {
    pub fn get(&self, bucket: Bucket) -> Option<f64> {
        match bucket {
            Bucket::Rare => self.miou_r,
            Bucket::Common => self.miou_c,
            Bucket::Frequent => self.miou_f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub miou: f64,
    pub image_level: SplitMiou,
    pub pixel_level: SplitMiou,
    pub per_class_iou: Vec<Option<f64>>,
}

impl EvalReport {
    pub fn level(&self, mode: Mode) -> &SplitMiou {
        match mode {
            Mode::Image => &self.image_level,
            Mode::Pixel => &self.pixel_level,
        }
    }
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMiou) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Overall and split mIoUs, splits derived from training statistics.
pub fn evaluate_confusion(cm: &ConfusionMatrix, train_stats: &ClassStats) -> Result<EvalReport> {
    if train_stats.num_classes() != cm.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "training statistics cover {} classes, evaluation has {}",
            train_stats.num_classes(),
            cm.num_classes()
        )));
    }
    let level = |mode: Mode| -> Result<SplitMiou> {
        let split = split_classes(train_stats, mode);
        Ok(SplitMiou {
            miou_r: defined(cm.miou(Some(&split.rare)))?,
            miou_c: defined(cm.miou(Some(&split.common)))?,
            miou_f: defined(cm.miou(Some(&split.frequent)))?,
        })
    };
    Ok(EvalReport {
        miou: cm.miou(None)?,
        image_level: level(Mode::Image)?,
        pixel_level: level(Mode::Pixel)?,
        per_class_iou: cm.per_class_iou(),
    })
}

pub fn evaluate_pairs(
    pairs: &[(LabelMap, LabelMap)],
    num_classes: usize,
    train_stats: &ClassStats,
) -> Result<EvalReport> {
    let cm = confusion_from_pairs(pairs, num_classes)?;
    evaluate_confusion(&cm, train_stats)
}

/// Prediction raster expected for an image: `<pred_dir>/<image id>.png`.
pub fn prediction_path(pred_dir: &Path, image_id: &str) -> std::path::PathBuf {
    pred_dir.join(format!("{image_id}.png"))
}

/// Evaluates the predictions in `pred_dir` against the ground-truth rasters
/// of `gt_index`.
pub fn evaluate(
    gt_index: &DatasetIndex,
    pred_dir: &Path,
    train_stats: &ClassStats,
) -> Result<EvalReport> {
    let c = gt_index.num_classes() as usize;
    let ignore = gt_index.ignore_id();
    let cm = gt_index
        .images()
        .par_iter()
        .map(|rec| {
            let gt = LabelMap::read_png(&rec.path, ignore)?;
            let pred = LabelMap::read_png(&prediction_path(pred_dir, &rec.id), ignore)?;
            let mut cm = ConfusionMatrix::new(c);
            cm.accumulate(&gt, &pred)?;
            Ok(cm)
        })
        .try_reduce(
            || ConfusionMatrix::new(c),
            |mut a, b| {
                a.merge(&b);
                Ok(a)
            },
        )?;
    evaluate_confusion(&cm, train_stats)
}
