//! Dataset and label I/O, raster preprocessing, feature import/export,
//! and the deterministic synthetic-data generator.
//!
//! Frames live on equal-angle grids with the northmost row first. A
//! dataset directory holds an `index.json` manifest plus one raw `.f32`
//! payload per frame; labels are a plain CSV keyed by date.

mod features;
mod formats;
mod grid;
mod labels;
mod preprocess;
mod synth;

pub use features::{export_features, export_features_csv, import_features, FeatureSet};
pub use formats::{
    load_frame, load_manifest, save_dataset, DatasetManifest, GridDescriptor, ManifestEntry,
    DATASET_FORMAT,
};
pub use grid::GridFrame;
pub use labels::{label_stats, load_labels, save_labels, EventStats, LabelTable, EVENTS};
pub use preprocess::{bilinear_resize, crop_to_box, rescale_unit};
pub use synth::generate_synthetic;

use crate::numerics::Matrix;
use crate::Result;

/// Flattens frames into an n-by-(h·w) matrix, one row per frame.
pub fn frames_to_matrix(frames: &[GridFrame]) -> Result<Matrix> {
    let first = frames
        .first()
        .ok_or_else(|| crate::Error::InvalidInput("no frames to flatten".into()))?;
    let (h, w) = (first.height, first.width);
    let mut rows = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        if f.height != h || f.width != w {
            return Err(crate::Error::InvalidInput(format!(
                "frame {i} is {}x{}, expected {h}x{w}",
                f.height, f.width
            )));
        }
        rows.push(f.values.iter().map(|&v| v as f64).collect());
    }
    Matrix::from_rows(&rows)
}
