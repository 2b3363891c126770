//! Object detection tooling for images far larger than a detector's input.
//!
//! The crate plans overlapping windows over a large raster ([`tiler`]), runs a
//! pluggable detector on every window ([`backends`], [`pipeline`]), merges the
//! window-local predictions into image coordinates and de-duplicates them with
//! an Intersection-over-Minimum suppression that keeps the largest box of each
//! group ([`nms`]). [`metrics`] scores the result before and after suppression,
//! and [`tune`] grid-searches the two suppression thresholds. [`dataset`]
//! builds leakage-free, class-rebalanced training frames from annotated images.

pub mod error;
pub mod geometry;
pub mod detection;
pub mod image_store;
pub mod tiler;
pub mod nms;
pub mod io;
pub mod dataset;
pub mod backends;
pub mod pipeline;
pub mod metrics;
pub mod tune;
pub mod overlay;
pub mod cli;

pub use detection::{Annotation, ClassId, Detection};
pub use error::{Error, Result};
pub use geometry::{BoundingBox, FrameOrigin};
pub use nms::{custom_nms, NmsConfig};
pub use tiler::{plan_frames, FramePlan, TilingConfig};
