//! Pseudospectral simulation and verification tools for the defocusing cubic
//! fractional Schrödinger equation on the torus with Gibbs-distributed initial data.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod counting;
pub mod dynamics;
pub mod error;
pub mod fft;
pub mod norms;
pub mod picard;
pub mod random;
pub mod spectral;
pub mod stats;
pub mod threshold;

pub use error::{Error, Result};
pub use spectral::{Dyadic, FrequencyTriple, ProjectionMode, SpectralField};
