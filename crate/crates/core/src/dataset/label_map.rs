use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};

/// Ignore id used by 8-bit label rasters.
pub const IGNORE_ID_U8: u32 = 255;
/// Ignore id used by 16-bit label rasters.
pub const IGNORE_ID_U16: u32 = 65535;

/// Conventional ignore id for a dataset with `num_classes` classes.
pub fn default_ignore_id(num_classes: u32) -> u32 {
    if num_classes <= 255 {
        IGNORE_ID_U8
    } else {
        IGNORE_ID_U16
    }
}

/// A dense per-pixel class-id raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    class_ids: Vec<u32>,
    ignore_id: u32,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, class_ids: Vec<u32>, ignore_id: u32) -> Result<Self> {
        let expected = width as usize * height as usize;
        if class_ids.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} label map needs {expected} entries, got {}",
                class_ids.len()
            )));
        }
        Ok(Self {
            width,
            height,
            class_ids,
            ignore_id,
        })
    }

    /// A raster filled with a single id.
    pub fn filled(width: u32, height: u32, id: u32, ignore_id: u32) -> Self {
        Self {
            width,
            height,
            class_ids: vec![id; width as usize * height as usize],
            ignore_id,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn ignore_id(&self) -> u32 {
        self.ignore_id
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.class_ids[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, id: u32) {
        self.class_ids[y as usize * self.width as usize + x as usize] = id;
    }

    pub fn same_shape(&self, other: &LabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Checks every pixel is `< num_classes` or the ignore id.
    pub fn validate(&self, num_classes: u32, image_id: &str) -> Result<()> {
        match self
            .class_ids
            .iter()
            .find(|&&id| id >= num_classes && id != self.ignore_id)
        {
            Some(&label) => Err(Error::LabelOutOfRange {
                image_id: image_id.to_string(),
                label,
                num_classes,
                ignore_id: self.ignore_id,
            }),
            None => Ok(()),
        }
    }

    /// Per-class pixel counts (length `num_classes`) plus the ignore-pixel count.
    ///
    /// Fails on the first id that is neither a valid class nor the ignore id.
    pub fn class_histogram(&self, num_classes: u32, image_id: &str) -> Result<(Vec<u64>, u64)> {
        let mut counts = vec![0u64; num_classes as usize];
        let mut ignored = 0u64;
        for &id in &self.class_ids {
            if id == self.ignore_id {
                ignored += 1;
            } else if id < num_classes {
                counts[id as usize] += 1;
            } else {
                return Err(Error::LabelOutOfRange {
                    image_id: image_id.to_string(),
                    label: id,
                    num_classes,
                    ignore_id: self.ignore_id,
                });
            }
        }
        Ok((counts, ignored))
    }

    /// Reads a single-channel 8- or 16-bit PNG; the raw pixel value is the class id.
    pub fn read_png(path: &Path, ignore_id: u32) -> Result<Self> {
        let raster_err = |message: String| Error::Raster {
            path: path.to_path_buf(),
            message,
        };
        let reader = image::ImageReader::open(path).map_err(|e| Error::io(path, e))?;
        let img = reader
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| raster_err(e.to_string()))?;
        let (width, height) = (img.width(), img.height());
        let class_ids: Vec<u32> = match img {
            DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
            DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
            other => {
                return Err(raster_err(format!(
                    "expected a single-channel label raster, found {:?}",
                    other.color()
                )))
            }
        };
        Self::new(width, height, class_ids, ignore_id)
    }

    /// Writes an 8-bit PNG when every id fits in a byte, 16-bit otherwise.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let max_id = self.class_ids.iter().copied().max().unwrap_or(0);
        self.write_png_with_depth(path, max_id <= 255)
    }

    pub(crate) fn write_png_with_depth(&self, path: &Path, eight_bit: bool) -> Result<()> {
        let raster_err = |message: String| Error::Raster {
            path: path.to_path_buf(),
            message,
        };
        let bytes = self.encode_png(eight_bit).map_err(raster_err)?;
        crate::io::write_atomic(path, &bytes)
    }

    fn encode_png(&self, eight_bit: bool) -> std::result::Result<Vec<u8>, String> {
        let mut out = std::io::Cursor::new(Vec::new());
        if eight_bit {
            let raw = self
                .class_ids
                .iter()
                .map(|&id| u8::try_from(id).map_err(|_| format!("id {id} does not fit 8 bits")))
                .collect::<std::result::Result<Vec<u8>, _>>()?;
            let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
                ImageBuffer::from_raw(self.width, self.height, raw).ok_or("bad buffer size")?;
            buf.write_to(&mut out, image::ImageFormat::Png)
                .map_err(|e| e.to_string())?;
        } else {
            let raw = self
                .class_ids
                .iter()
                .map(|&id| u16::try_from(id).map_err(|_| format!("id {id} does not fit 16 bits")))
                .collect::<std::result::Result<Vec<u16>, _>>()?;
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_raw(self.width, self.height, raw).ok_or("bad buffer size")?;
            buf.write_to(&mut out, image::ImageFormat::Png)
                .map_err(|e| e.to_string())?;
        }
        Ok(out.into_inner())
    }
}
