//! AM/PM cross-conversion of a modulated carrier through linear filters.
//!
//! A carrier with small AM index `a` and PM index `p` puts lines at
//! `fc - fm`, `fc` and `fc + fm`. A linear filter scales each line by its own
//! response, which maps `(a, p)` through the 2x2 matrix
//!
//! ```text
//! [a']   [hc hd] [a]
//! [p'] = [hd hc] [p]
//! ```
//!
//! where `hc` (common response) and `hd` (differential response) come from
//! the filter evaluated at the three line frequencies. The [`oracle`] module
//! checks every prediction against a synthesized, filtered and demodulated
//! waveform.

pub mod cli;
pub mod error;
pub mod filterlib;
pub mod oracle;
pub mod scatter;
pub mod sweep;

pub use error::{Error, Result};
pub use filterlib::{Frequency, TransferFunction};
pub use scatter::{ModulationState, ScatterResult, SidebandTriplet};

/// Complex values throughout the crate.
pub type Complex = num_complex::Complex64;

/// Tool version, reported in JSON output.
pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// `20·log10(mag)`; a zero magnitude gives negative infinity.
pub fn to_db(mag: f64) -> f64 {
    20.0 * mag.log10()
}
