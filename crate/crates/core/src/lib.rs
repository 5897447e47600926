//! Numerical laboratory for continuous-time AWGN channels observed through an
//! integrate-and-dump sampler.
//!
//! The crate simulates the channel `Y(t) = ∫₀ᵗ X(s) ds + B(t)` with and without
//! feedback, computes the mutual information carried by the sampled output
//! `Y(t₀), …, Y(tₙ)`, and checks how fast it approaches the continuous-time
//! value as the sampling grid is refined.
//!
//! Module map:
//!
//! * [`spectra`]: power spectral densities, autocovariances, block covariances
//!   of the sampled channel and stationary Gaussian path synthesis.
//! * [`simulate`]: Brownian motion, both channel variants and the sampler.
//! * [`gaussmi`]: exact and I-MMSE mutual information for the non-feedback
//!   channel plus the gap bounds.
//! * [`feedmi`]: likelihood-ratio functionals and Monte Carlo mutual information
//!   for the feedback channel.
//! * [`extremes`]: moments and tail bounds for the maximum of Gaussian samples.
//! * [`lab`]: experiment configuration, runners and report emission.
//!
//! Monte Carlo loops go through [`exec`], which uses rayon when the `parallel`
//! feature is enabled and runs sequentially otherwise. Results never depend on
//! the execution mode.

pub mod error;
pub mod exec;
pub mod extremes;
pub mod feedmi;
pub mod gaussmi;
pub mod lab;
pub mod linalg;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod spectra;
pub mod stats;

pub use error::{LabError, Result};
pub use exec::Execution;
pub use gaussmi::{MiEstimate, MiMethod};
pub use simulate::{DriftFamily, DriftSpec, MessageAlphabet, PathRecord, SampleGrid};
pub use spectra::PsdSpec;
