//! Primary particle size analysis of nanoparticle agglomerates on
//! transmission-electron-microscopy–like images.
//!
//! The crate covers both routes of the method:
//!
//! * the **training route**: measure image distortions ([`distortion`]),
//!   synthesize agglomerate images with exact ground truth ([`synth`]),
//!   extract the 13 region features ([`features`]) and train small
//!   feed-forward networks with scaled conjugate gradients ([`ffnn`]);
//! * the **measurement route**: classify each agglomerate by its number of
//!   primary particles, regress the primary particle areas with a per-class
//!   network, and summarize the size distribution ([`pipeline`]).
//!
//! Watershed, ultimate erosion and circular Hough baselines live in
//! [`baselines`]; all of them share the image primitives in [`raster`].

// `!(a > b)` is used on purpose so NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod baselines;
pub mod distortion;
mod error;
pub mod features;
pub mod ffnn;
mod linalg;
pub mod pipeline;
pub mod raster;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
