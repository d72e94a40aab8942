//! Numerical toolkit for the entropy method on union-closed families.
//!
//! - [`scalar`]: binary entropy, λ(u), F(s) and related closed forms.
//! - [`set_dist`]: exact distributions over subsets, unions of independent
//!   samples, chain-rule profiles, KL divergence, mixtures of products.
//! - [`families`]: union-closed families, exhaustive enumeration on `[n]`,
//!   `n ≤ 4`, frequency and entropy diagnostics.
//! - [`measure`]: the two-sample functional over measures on [0, 1] and its
//!   certificate.
//! - [`coupling`]: coupled-union probabilities, worst couplings by
//!   transportation LP, the improved inequality and the greedy coupling DP.
//! - [`counterexample`]: the geometric mixture showing that a small KL
//!   divergence does not force entropy growth.
//! - [`cli`]: command-line driver and report emission.

pub mod cli;
pub mod coupling;
pub mod counterexample;
pub mod error;
pub mod families;
pub mod measure;
pub mod numeric;
pub mod report;
pub mod scalar;
pub mod set_dist;
pub mod transport;

pub use error::{Error, Result};

/// Seed used when neither `--seed` nor `UCLAB_SEED` is given.
pub const DEFAULT_SEED: u64 = 0x005e_ed0f_u64;
