//! Viewpoint estimation for direct-volume-rendered images.
//!
//! The crate covers the full pipeline:
//!
//! - [`viewsphere`]: equal-area isoLatitude pixelization of the viewing
//!   sphere, geodesic distances, neighbor sets and soft label targets.
//! - [`volume`]: 3D scalar fields with trilinear sampling, gradients,
//!   raw/header loaders and procedural phantom volumes.
//! - [`transfer`]: 1D opacity/color transfer functions, keypoint jitter and
//!   contrast-biased random palettes.
//! - [`render`]: a deterministic CPU raycaster (emission-absorption
//!   compositing, Phong shading, parallel/perspective projection).
//! - [`datagen`]: randomized training-image generation with per-sample
//!   annotations and a reproducible manifest.
//! - [`model`]: a small convolutional classifier trained from scratch with
//!   either a plain softmax loss or a geodesic soft-label loss.
//! - [`eval`]: viewpoint estimation from predicted distributions,
//!   tolerance-accuracy reports and error maps.
//! - [`select`]: viewing-map accumulation and similarity-weighted viewpoint
//!   voting.
//! - [`cli`]: the `volpoint` command-line entry point.
//!
//! Every randomized stage takes an explicit seed and is bit-reproducible;
//! see the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod imgio;
pub mod model;
pub mod render;
pub mod select;
pub mod transfer;
pub mod viewsphere;
pub mod volume;

pub use error::{Error, Result};
