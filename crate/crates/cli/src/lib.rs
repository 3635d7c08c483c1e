//! Command-line front end: experiment orchestration and image export on
//! top of `gridrep-core`.

pub mod pipeline;
pub mod render;
