//! Anonymity auditing for text-to-image leaderboards.
//!
//! Generations of a given model for a given prompt cluster tightly in image
//! embedding space. This crate measures how exploitable that is and how
//! well post-processing hides it:
//!
//! * [`store`]: embedding datasets, the EMB1 file format, manifests and a
//!   synthetic cluster generator.
//! * [`attribution`]: nearest-centroid deanonymization and the two
//!   one-vs-rest detectors.
//! * [`distinguishability`]: per-prompt separability scores.
//! * [`baselines`]: noise-residual and Fourier-decay fingerprinting.
//! * [`defense`]: contrastive adversarial post-processing under an
//!   `l∞` budget, and the Gaussian-noise undo attack.
//! * [`eval`]: experiment drivers, metrics and reports.

pub mod attribution;
pub mod baselines;
pub mod defense;
pub mod distinguishability;
pub mod error;
pub mod eval;
pub mod image;
pub mod json;
pub mod store;

pub use error::{Error, Result};
pub use store::{Dataset, EmbeddingRecord, ModelId, ModelInfo, PromptId, PromptInfo, SynthConfig};
