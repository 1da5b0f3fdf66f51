//! Bundle recommendation with a residual-diffusion refinement stage.
//!
//! The crate is organised around four stages that mirror how a run unfolds:
//!
//! * [`data`] — sparse user/bundle/item interaction matrices, the train/val/test
//!   split, the affiliation partition used to vary bundle contents at evaluation
//!   time, and a planted-theme synthetic dataset generator;
//! * [`backbone`] — a two-view embedding model scoring users against bundles both
//!   directly and through the mean of the bundle's item embeddings;
//! * [`diffusion`] — a noise schedule, a residual approximator, and the joint
//!   training / inference loops that corrupt and re-estimate item-level bundle
//!   embeddings;
//! * [`eval`] — ranking metrics, the bundle-variability sweep, ablations, nearest
//!   neighbour queries and timing comparisons.
//!
//! All numeric code is generic over [`scalar::Scalar`] (implemented for `f32`
//! and `f64`); the crate root re-exports `f64` aliases for the common types,
//! which is what the CLI and the serialization formats use.

pub mod backbone;
pub mod checkpoint;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod scalar;
pub mod seeds;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use seeds::SeedBank;

/// Backbone state over `f64`, the precision used by the CLI and on disk.
pub type Backbone = backbone::BackboneState<f64>;
/// Embedding table over `f64`.
pub type Embeddings = backbone::EmbeddingTable<f64>;
/// Noise schedule over `f64`.
pub type Schedule = diffusion::NoiseSchedule<f64>;
/// Residual approximator over `f64`.
pub type Approximator = diffusion::ResidualApproximator<f64>;
/// Joint trainer over `f64`.
pub type Trainer = diffusion::Trainer<f64>;
