//! Crossmodal feature mapping for multimodal industrial anomaly detection.
//!
//! The engine takes pixel-registered RGB images and organized 3D coordinate
//! maps, extracts per-pixel 2D and 3D features, and learns two lightweight
//! MLPs that predict each modality's features from the other on nominal data.
//! At test time the discrepancy between observed and predicted features,
//! aggregated across modalities, localizes anomalies.
//!
//! Module layout follows the processing order:
//!
//! * [`data`]: samples, feature containers and the binary interchange formats.
//! * [`preprocess`]: RANSAC background removal, FPS grouping, interpolation,
//!   projection and smoothing of 3D features.
//! * [`features`]: extractor front-end (toy or externally exported features)
//!   and pixel-level alignment.
//! * [`mapping`]: the mapping networks, their gradients, Adam and training.
//! * [`anomaly`]: discrepancy maps, aggregation and smoothing.
//! * [`metrics`]: ROC AUC, connected components, PRO curves and AUPRO.
//! * [`harness`]: configuration, manifests, the synthetic benchmark and the
//!   train / eval / bench pipelines used by the CLI.

pub mod anomaly;
pub mod data;
mod error;
pub mod features;
pub mod harness;
pub mod mapping;
pub mod metrics;
pub mod preprocess;

pub use error::{Error, Result};
