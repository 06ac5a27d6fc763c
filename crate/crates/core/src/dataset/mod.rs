//! Label rasters, dataset manifests and the per-image class-count index.

mod index;
mod label_map;
mod synthetic;

pub use index::{
    load_manifest, position_map, write_manifest, write_plain_manifest, DatasetIndex, ImageRecord,
};
pub use label_map::{default_ignore_id, LabelMap, IGNORE_ID_U16, IGNORE_ID_U8};
pub use synthetic::{generate_synthetic, write_synthetic, SyntheticProfile, MAX_CLASSES_PER_IMAGE};
