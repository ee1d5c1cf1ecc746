//! System-aware lossy compression.
//!
//! - [`linops`]: matrix-free operators, circulant spectra, the regularized z-update.
//! - [`tree_codec`]: tree-segmentation codec with Lagrangian pruning.
//! - [`admm`]: the codec-agnostic ADMM loop.
//! - [`gauss_theory`]: closed-form Gaussian rate-distortion allocation.
//! - [`system_sim`]: chirp source, acquisition/rendering, PSNR, rate-distortion sweeps.

pub mod admm;
pub mod gauss_theory;
pub mod linops;
pub mod system_sim;
pub mod tree_codec;

/// Crate version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
