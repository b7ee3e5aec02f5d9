//! Rotation-weighted IoU (RWIoU) for yaw-rotated 3D boxes, its analytic
//! gradient, dynamic cross label assignment (DCLA) on BEV grids, the
//! detection losses built on top of them, and a network-free fitting harness
//! that exercises the whole pipeline on synthetic scenes.

pub mod assign;
pub mod error;
pub mod geometry;
pub mod grad;
pub mod harness;
pub mod losses;
pub mod reduce;

pub use error::{Error, Result};
pub use geometry::{Alpha, Box3D, BoxParams8, IoUScalar};
pub use grad::Grad8;
