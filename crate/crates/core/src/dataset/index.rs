use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::label_map::{default_ignore_id, LabelMap};
use crate::error::{Error, Result};

/// Per-image class pixel counts. Classes with zero pixels are absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: String,
    /// Location of the label raster. Absolute once loaded from disk.
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub per_class_pixels: BTreeMap<u32, u64>,
}

impl ImageRecord {
    pub fn new(
        id: impl Into<String>,
        path: impl Into<PathBuf>,
        width: u32,
        height: u32,
        counts: impl IntoIterator<Item = (u32, u64)>,
    ) -> Self {
        let per_class_pixels = counts.into_iter().filter(|&(_, n)| n > 0).collect();
        Self {
            id: id.into(),
            path: path.into(),
            width,
            height,
            per_class_pixels,
        }
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn contains(&self, class: u32) -> bool {
        self.per_class_pixels.contains_key(&class)
    }

    pub fn labeled_pixels(&self) -> u64 {
        self.per_class_pixels.values().sum()
    }

    /// Pixels not attributed to any class (the ignore label).
    pub fn ignored_pixels(&self) -> u64 {
        self.area() - self.labeled_pixels()
    }

    pub fn classes(&self) -> impl Iterator<Item = u32> + '_ {
        self.per_class_pixels.keys().copied()
    }
}

/// The per-image class-count table every statistic is computed from.
/// Image order is the manifest order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    name: String,
    num_classes: u32,
    ignore_id: u32,
    images: Vec<ImageRecord>,
}

impl DatasetIndex {
    pub fn new(
        name: impl Into<String>,
        num_classes: u32,
        ignore_id: u32,
        images: Vec<ImageRecord>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParameter(
                "num_classes must be at least 1".into(),
            ));
        }
        if images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = HashSet::with_capacity(images.len());
        for img in &images {
            if !seen.insert(img.id.as_str()) {
                return Err(Error::DuplicateImage(img.id.clone()));
            }
            if let Some((&label, _)) = img.per_class_pixels.range(num_classes..).next() {
                return Err(Error::LabelOutOfRange {
                    image_id: img.id.clone(),
                    label,
                    num_classes,
                    ignore_id,
                });
            }
            if img.per_class_pixels.values().any(|&n| n == 0) {
                return Err(Error::InvalidParameter(format!(
                    "image {:?} lists a zero pixel count",
                    img.id
                )));
            }
            let counted = img.labeled_pixels();
            if counted > img.area() {
                return Err(Error::PixelCountOverflow {
                    image_id: img.id.clone(),
                    counted,
                    area: img.area(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            num_classes,
            ignore_id,
            images,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn ignore_id(&self) -> u32 {
        self.ignore_id
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Restricts the index to `keep_ids`, preserving manifest order. Counts are
    /// carried over, rasters are not rescanned.
    pub fn subset<I, S>(&self, keep_ids: I) -> Result<DatasetIndex>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let known: HashSet<&str> = self.images.iter().map(|r| r.id.as_str()).collect();
        let mut keep = HashSet::new();
        for id in keep_ids {
            let id = id.as_ref();
            if !known.contains(id) {
                return Err(Error::UnknownImage(id.to_string()));
            }
            keep.insert(id.to_string());
        }
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let images = self
            .images
            .iter()
            .filter(|r| keep.contains(&r.id))
            .cloned()
            .collect();
        Ok(DatasetIndex {
            name: self.name.clone(),
            num_classes: self.num_classes,
            ignore_id: self.ignore_id,
            images,
        })
    }

    /// Subset by positions into `images()`; positions must be ascending.
    pub(crate) fn subset_by_position(&self, positions: &[usize]) -> DatasetIndex {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        DatasetIndex {
            name: self.name.clone(),
            num_classes: self.num_classes,
            ignore_id: self.ignore_id,
            images: positions.iter().map(|&i| self.images[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    name: String,
    num_classes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ignore_id: Option<u32>,
    images: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    path: String,
    width: u32,
    height: u32,
    /// Present in index-cache files; when absent the raster is scanned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_class_pixels: Option<BTreeMap<u32, u64>>,
}

/// Loads a manifest or an index cache. Raster paths are resolved relative to
/// the manifest's directory. Entries without cached counts are scanned once,
/// in parallel, and merged back in manifest order.
pub fn load_manifest(path: &Path) -> Result<DatasetIndex> {
    let file: ManifestFile = crate::io::read_json(path)?;
    if file.images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let base = manifest_dir(path)?;
    let ignore_id = file
        .ignore_id
        .unwrap_or_else(|| default_ignore_id(file.num_classes));
    let num_classes = file.num_classes;

    let images = file
        .images
        .into_par_iter()
        .map(|entry| {
            let raster_path = base.join(&entry.path);
            let counts = match entry.per_class_pixels {
                Some(counts) => counts,
                None => scan_entry(&entry, &raster_path, num_classes, ignore_id)?,
            };
            Ok(ImageRecord::new(
                entry.id,
                raster_path,
                entry.width,
                entry.height,
                counts,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    DatasetIndex::new(file.name, num_classes, ignore_id, images)
}

fn scan_entry(
    entry: &ManifestEntry,
    raster_path: &Path,
    num_classes: u32,
    ignore_id: u32,
) -> Result<BTreeMap<u32, u64>> {
    let map = LabelMap::read_png(raster_path, ignore_id)?;
    if map.width() != entry.width || map.height() != entry.height {
        return Err(Error::DimensionMismatch {
            image_id: entry.id.clone(),
            expected_width: entry.width,
            expected_height: entry.height,
            width: map.width(),
            height: map.height(),
        });
    }
    let (hist, _) = map.class_histogram(num_classes, &entry.id)?;
    Ok(hist
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > 0)
        .map(|(c, n)| (c as u32, n))
        .collect())
}

fn manifest_dir(path: &Path) -> Result<PathBuf> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::canonicalize(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the index-cache form: manifest fields plus per-image class counts.
/// Loading the result with [`load_manifest`] reproduces `index` exactly.
pub fn write_manifest(index: &DatasetIndex, path: &Path) -> Result<()> {
    crate::io::write_json_atomic(path, &manifest_file(index, true))
}

/// Writes a plain manifest (no cached counts); paths are written as stored.
pub fn write_plain_manifest(index: &DatasetIndex, path: &Path) -> Result<()> {
    crate::io::write_json_atomic(path, &manifest_file(index, false))
}

fn manifest_file(index: &DatasetIndex, with_counts: bool) -> ManifestFile {
    ManifestFile {
        name: index.name.clone(),
        num_classes: index.num_classes,
        ignore_id: Some(index.ignore_id),
        images: index
            .images
            .iter()
            .map(|r| ManifestEntry {
                id: r.id.clone(),
                path: r.path.to_string_lossy().into_owned(),
                width: r.width,
                height: r.height,
                per_class_pixels: with_counts.then(|| r.per_class_pixels.clone()),
            })
            .collect(),
    }
}

/// Lookup from image id to position in the index.
pub fn position_map(index: &DatasetIndex) -> HashMap<&str, usize> {
    index
        .images()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect()
}
