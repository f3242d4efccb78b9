//! Streaming post-processing for large, multi-file, frame-based binary
//! simulation output, plus a plot-document toolchain.
//!
//! The pipeline: a frame archive (`framearc`) is streamed frame-by-frame by
//! the `engine`, which dispatches decoded frames to registered calculation
//! plugins (`calcs`) according to a pass plan (`scheduler`). Calculations
//! reduce the raw per-frame data into standardized 4-axis result arrays
//! (`model`), which are stored as traceable plot documents (`plotdoc`) and
//! rendered deterministically to SVG (`render`). The `synth` module
//! generates datasets with analytic ground truth.

pub mod calcs;
pub mod cli;
pub mod engine;
pub mod framearc;
pub mod model;
pub mod plotdoc;
pub mod render;
pub mod scheduler;
pub mod synth;

pub use model::{Axis, FrameView, GridMeta, ResultArray};
