//! Injects synthetic, labeled attack traffic into PCAP background captures
//! and audits captures for dataset-quality defects.
//!
//! The pipeline: [`stats`] extracts per-file, per-host, per-field and
//! per-connection statistics from a background capture; [`attack`] plans and
//! generates attack packet streams whose header fields are resampled from
//! those statistics; [`inject`] merges the generated traffic into the
//! unmodified background and writes a label sidecar; [`tided`] computes
//! entropy and validity metrics that flag synthetic-looking captures.

pub mod attack;
pub mod inject;
pub mod pcap;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod tables;
pub mod tided;
pub mod time;

pub use scalar::Real;

/// Concrete scalar used by the shipped pipeline. Metric tolerances are
/// tighter than `f32` can hold, so everything downstream instantiates the
/// generic metric code with this.
pub type Metric = f64;
