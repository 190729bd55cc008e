//! Coverage-guided swarm search for metamorphic tests of image classifiers.
//!
//! The crate evolves parameter vectors of label-preserving image
//! transformations with swarm metaheuristics. Each vector expands a seed
//! image into a batch of mutants; the mutants are scored by the new
//! neurons they cover, locally (relative to their seed) and globally
//! (relative to everything the campaign has already run). Mutants that the
//! model misclassifies, or on which the model and its half-precision twin
//! disagree, are stored as findings.
//!
//! Modules, bottom up:
//! - [`image`] and [`model`]: images and a small feed-forward runtime with
//!   activation capture and binary16 weight truncation;
//! - [`coverage`]: activated neuron sets and the coverage fitness;
//! - [`transform`]: the compound transformation and the SSIM filter;
//! - [`optimizer`]: seven swarm metaheuristics behind an ask/tell interface;
//! - [`search`]: campaigns, findings and reports;
//! - [`dataset`]: IDX and PNG-directory ingestion and seed sampling.

pub mod coverage;
pub mod dataset;
pub mod image;
pub mod model;
pub mod optimizer;
pub mod search;
pub mod transform;

pub use crate::image::{Image, Shape};
pub use crate::model::{ClassLabel, Model};
