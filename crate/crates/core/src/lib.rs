//! Scattering-aware differentiable volume renderer.
//!
//! Recovers sharp novel views from motion-blurred images by jointly
//! optimizing a neural radiance field, an in-scattering lightpath model that
//! learns per-sample scattering directions and intervals, and per-image
//! camera exposure trajectories in SE(3).

pub mod backprop;
pub mod blur;
pub mod config;
pub mod error;
pub mod field;
pub mod image;
pub mod io;
pub mod islm;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod parallel;
pub mod pipeline;
pub mod renderer;
pub mod sampler;
pub mod scene;
pub mod se3;

pub use error::{Error, Result};
