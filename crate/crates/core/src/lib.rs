//! Representation learning and forecast verification for gridded raster
//! time series.
//!
//! The crate is organised as a stack of small modules:
//!
//! * [`numerics`] — dense matrices, a deterministic seeded generator, exact
//!   and randomized SVD, and QR orthonormalization.
//! * [`pca`] — incremental principal component analysis built on the
//!   numerics layer, with binary model persistence.
//! * [`cae`] — a minimal convolutional autoencoder with its own
//!   reverse-mode differentiation, trained by SGD or Adam.
//! * [`classify`] — ridge-stabilised logistic regression fitted by IRLS,
//!   Wald statistics, and k-fold cross-validation.
//! * [`verify`] — contingency tables, categorical scores, and deterministic
//!   SVG performance diagrams and sweep charts.
//! * [`ingest`] — raster frame and label ingestion, preprocessing, feature
//!   vector persistence, and a synthetic data generator.
//!
//! All floating point work is done in `f64`; rasters are stored in `f32`
//! and widened on entry. Every seeded code path produces identical results
//! for identical seeds, independent of platform.

pub mod cae;
pub mod classify;
mod error;
pub mod ingest;
pub mod numerics;
pub mod pca;
pub mod verify;

pub use error::{Error, Result};
