//! Utility-preserving anonymization of feature-vector datasets.
//!
//! Every record is replaced by a selective weighted mean over a randomly
//! assembled set of records whose attribute-of-interest purity is
//! controlled. Features judged relevant to the attribute of interest keep
//! extra weight on the original record; everything else is blended evenly,
//! which erases identity while keeping the attribute recognizable.
//!
//! The crate is organised along the pipeline:
//!
//! * [`data`]: dataset model, CSV I/O, stratified splits and a synthetic
//!   benchmark generator.
//! * [`forest`]: a random-forest classifier used both as the recognition
//!   models and as a source of Gini feature importances.
//! * [`relevance`]: per-feature relevance (Gini or mutual information) and
//!   the feature selection mask.
//! * [`transform`]: random-set assembly and the weighted-mean transform.
//! * [`metrics`]: utility, mixture, re-identification and KL metrics.

pub mod data;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod relevance;
pub mod rng;
pub mod transform;

pub use error::{Error, Result};
