//! Dense linear algebra kernels and a deterministic random generator.
//!
//! Everything here is written for moderate, desk-scale problems: plain
//! row-major `f64` storage, serial loops with a fixed accumulation order
//! (so results are bit-reproducible for fixed operand order), and no
//! hidden parallelism.

mod matrix;
mod qr;
mod rng;
mod rsvd;
mod svd;

pub use matrix::Matrix;
pub use qr::qr_orthonormalize;
pub use rng::SeededRng;
pub use rsvd::{randomized_svd, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
pub use svd::{exact_svd, SvdResult};
