//! Inference-time fingerprinting baselines.

pub mod corpus;
pub mod residual;
pub mod spectral;

pub use corpus::{planted_pattern_corpus, synthesize_power_law_image, PlantedPatternConfig, PlantedPatternCorpus};
pub use residual::{denoise, marra_attribute, marra_fingerprint, pearson, residual, ResidualFingerprint};
pub use spectral::{
    dzanic_attribute, dzanic_signature, fit_image, fit_power_law, power_spectrum_2d, reduced_spectrum, FitBand,
    ReducedSpectrum, SpectralSignature,
};
