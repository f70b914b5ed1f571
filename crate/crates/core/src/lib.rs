//! Crowd anomaly detection from sparse motion, foreground and texture cues.
//!
//! Frames flow through KLT corner tracking, Gaussian-mixture foreground
//! segmentation, patch motion descriptors with online pattern merging,
//! perspective-weighted foreground counts and GLCM texture statistics. The
//! per-frame feature vectors are scored against a dictionary of normal
//! frames, and [`evalkit`] turns the scores into ROC curves.

pub mod bgmodel;
pub mod config;
pub mod detector;
pub mod error;
pub mod evalkit;
pub mod framesource;
pub mod grid;
pub mod holistic;
pub mod klt;
pub mod patches;
pub mod pipeline;
pub mod synthgen;
pub mod texture;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use framesource::Frame;
pub use grid::{Grid, Plane};
