//! Deterministic synthetic label-map datasets with a controllable class-rank
//! frequency falloff.
//!
//! Image `i` draws between 1 and [`MAX_CLASSES_PER_IMAGE`] distinct classes,
//! sampled without replacement with weight `exp(-rank_decay * rank)` (class id
//! = rank). The first `num_classes` images are additionally forced to contain
//! class `i`, so every class occurs at least once. Each present class receives
//! a pixel share drawn from U[0.02, 0.4], normalized, and is painted as a
//! full-width horizontal band; the first class acts as the background filling
//! whatever the bands leave. The right-most column is always the ignore id.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::{write_plain_manifest, DatasetIndex, ImageRecord};
use super::label_map::{default_ignore_id, LabelMap};
use crate::error::{Error, Result};

pub const MAX_CLASSES_PER_IMAGE: u32 = 4;
const SHARE_RANGE: (f64, f64) = (0.02, 0.4);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub num_classes: u32,
    pub num_images: u32,
    /// `0` gives a balanced dataset.
    pub rank_decay: f64,
    /// Side length of the square rasters.
    pub image_size: u32,
    pub seed: u64,
}

impl SyntheticProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.num_classes < 2 {
            return bad(format!(
                "synthetic num_classes must be >= 2, got {}",
                self.num_classes
            ));
        }
        if self.num_classes >= IGNORE_LIMIT {
            return bad(format!("synthetic num_classes must be < {IGNORE_LIMIT}"));
        }
        if self.num_images < self.num_classes {
            return bad(format!(
                "num_images ({}) must be at least num_classes ({})",
                self.num_images, self.num_classes
            ));
        }
        if !(self.rank_decay >= 0.0 && self.rank_decay.is_finite()) {
            return bad(format!(
                "rank_decay must be finite and >= 0, got {}",
                self.rank_decay
            ));
        }
        if self.image_size < MAX_CLASSES_PER_IMAGE {
            return bad(format!(
                "image_size must be at least {MAX_CLASSES_PER_IMAGE}, got {}",
                self.image_size
            ));
        }
        Ok(())
    }

    pub fn ignore_id(&self) -> u32 {
        default_ignore_id(self.num_classes)
    }

    pub fn image_id(&self, i: u32) -> String {
        format!("synth_{i:06}")
    }

    /// Renders image `i`. Depends only on the profile and `i`.
    pub fn render(&self, i: u32) -> LabelMap {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);

        let classes = self.sample_classes(i, &mut rng);
        let shares: Vec<f64> = classes
            .iter()
            .map(|_| rng.gen_range(SHARE_RANGE.0..=SHARE_RANGE.1))
            .collect();
        let rows = allocate_rows(&shares, self.image_size);

        let size = self.image_size;
        let mut map = LabelMap::filled(size, size, classes[0], self.ignore_id());
        let mut y = 0;
        for (&class, &n) in classes.iter().zip(&rows).skip(1) {
            for row in y..y + n {
                for x in 0..size {
                    map.set(x, row, class);
                }
            }
            y += n;
        }
        for row in 0..size {
            map.set(size - 1, row, self.ignore_id());
        }
        map
    }

    fn sample_classes(&self, i: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let k = rng.gen_range(1..=MAX_CLASSES_PER_IMAGE.min(self.num_classes)) as usize;
        let forced = (i < self.num_classes).then_some(i);

        // Weighted sampling without replacement: keep the k largest
        // ln(u) / w keys (Efraimidis-Spirakis).
        let mut keyed: Vec<(f64, u32)> = (0..self.num_classes)
            .map(|c| {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let w = (-self.rank_decay * c as f64).exp();
                (u.ln() / w, c)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut out: Vec<u32> = forced.into_iter().collect();
        for (_, c) in keyed {
            if out.len() == k {
                break;
            }
            if Some(c) != forced {
                out.push(c);
            }
        }
        out
    }

    fn record(&self, i: u32, path: PathBuf) -> Result<(ImageRecord, LabelMap)> {
        let id = self.image_id(i);
        let map = self.render(i);
        let (hist, _) = map.class_histogram(self.num_classes, &id)?;
        let counts = hist.into_iter().enumerate().map(|(c, n)| (c as u32, n));
        let rec = ImageRecord::new(id, path, map.width(), map.height(), counts);
        Ok((rec, map))
    }
}

const IGNORE_LIMIT: u32 = 65535;

/// Splits `size` rows among classes proportionally to `shares` with at least
/// one row each (largest-remainder rounding, ties to the earlier class).
fn allocate_rows(shares: &[f64], size: u32) -> Vec<u32> {
    let k = shares.len() as u32;
    let spare = (size - k) as f64;
    let total: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| spare * s / total).collect();
    let mut rows: Vec<u32> = exact.iter().map(|e| 1 + e.floor() as u32).collect();
    let mut left = size - rows.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &j in order.iter().cycle() {
        if left == 0 {
            break;
        }
        rows[j] += 1;
        left -= 1;
    }
    rows
}

/// Builds the dataset index in memory without touching the filesystem. Raster
/// paths are the ones [`write_synthetic`] would use, relative to its output
/// directory.
pub fn generate_synthetic(profile: &SyntheticProfile) -> Result<DatasetIndex> {
    profile.validate()?;
    let images = (0..profile.num_images)
        .into_par_iter()
        .map(|i| {
            let path = relative_raster_path(&profile.image_id(i));
            profile.record(i, path).map(|(rec, _)| rec)
        })
        .collect::<Result<Vec<_>>>()?;
    DatasetIndex::new(
        synthetic_name(profile),
        profile.num_classes,
        profile.ignore_id(),
        images,
    )
}

/// Writes `labels/*.png` and `manifest.json` under `out_dir` and returns the
/// index with absolute raster paths.
pub fn write_synthetic(profile: &SyntheticProfile, out_dir: &Path) -> Result<DatasetIndex> {
    profile.validate()?;
    let labels = out_dir.join("labels");
    std::fs::create_dir_all(&labels).map_err(|e| Error::io(&labels, e))?;
    let root = std::fs::canonicalize(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let eight_bit = profile.num_classes <= 255;

    let images = (0..profile.num_images)
        .into_par_iter()
        .map(|i| {
            let rel = relative_raster_path(&profile.image_id(i));
            let (rec, map) = profile.record(i, rel.clone())?;
            map.write_png_with_depth(&root.join(&rel), eight_bit)?;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;

    let relative = DatasetIndex::new(
        synthetic_name(profile),
        profile.num_classes,
        profile.ignore_id(),
        images,
    )?;
    write_plain_manifest(&relative, &root.join("manifest.json"))?;

    let absolute = relative
        .images()
        .iter()
        .cloned()
        .map(|mut r| {
            r.path = root.join(&r.path);
            r
        })
        .collect();
    DatasetIndex::new(
        relative.name(),
        relative.num_classes(),
        relative.ignore_id(),
        absolute,
    )
}

fn relative_raster_path(id: &str) -> PathBuf {
    Path::new("labels").join(format!("{id}.png"))
}

fn synthetic_name(p: &SyntheticProfile) -> String {
    format!(
        "synthetic-c{}-n{}-d{}-s{}",
        p.num_classes, p.num_images, p.rank_decay, p.seed
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> SyntheticProfile {
        SyntheticProfile {
            num_classes: 6,
            num_images: 20,
            rank_decay: 0.3,
            image_size: 8,
            seed: 7,
        }
    }

    #[test]
    fn rows_sum_to_size_with_one_minimum() {
        let rows = allocate_rows(&[0.02, 0.4, 0.1, 0.02], 9);
        assert_eq!(rows.iter().sum::<u32>(), 9);
        assert!(rows.iter().all(|&r| r >= 1));
        assert_eq!(allocate_rows(&[0.3], 4), vec![4]);
    }

    #[test]
    fn render_is_deterministic_and_valid() {
        let p = profile();
        for i in 0..p.num_images {
            let a = p.render(i);
            assert_eq!(a, p.render(i));
            a.validate(p.num_classes, "x").unwrap();
            let (_, ignored) = a.class_histogram(p.num_classes, "x").unwrap();
            assert_eq!(ignored, p.image_size as u64);
        }
    }

    #[test]
    fn forced_class_present() {
        let p = profile();
        let idx = generate_synthetic(&p).unwrap();
        for c in 0..p.num_classes {
            assert!(idx.images()[c as usize].contains(c));
        }
    }

    #[test]
    fn profile_validation() {
        let mut p = profile();
        p.num_images = 3;
        assert!(p.validate().is_err());
        let mut p = profile();
        p.rank_decay = -1.0;
        assert!(p.validate().is_err());
        let mut p = profile();
        p.num_classes = 1;
        assert!(p.validate().is_err());
        let mut p = profile();
        p.image_size = 3;
        assert!(p.validate().is_err());
    }
}
