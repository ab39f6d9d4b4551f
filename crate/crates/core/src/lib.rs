//! Simulation and codec library for 512-ary color shift keying (CSK) over an
//! optical camera link.
//!
//! The receive chain mirrors a camera receiver that works on raw sensor data:
//!
//! 1. [`constellation`] places 512 symbols on a triangular lattice between
//!    the blue, red and green LED primaries.
//! 2. [`channel`] models color-filter crosstalk, sensor nonlinearity, noise
//!    that shrinks with the number of lit LEDs, and 12-bit quantization.
//!    Recorded frames go through [`ingest`] instead.
//! 3. [`colorspace`] projects received RGB onto the CIE 1931 `(x, y)` plane.
//! 4. [`equalizer`] turns each point into nine per-bit posteriors and LLRs.
//! 5. [`ldpc`] decodes 64800-bit DVB-S2 codewords with normalized min-sum.
//!
//! [`harness`] strings the pieces into BER sweeps.

pub mod channel;
pub mod colorspace;
pub mod constellation;
pub mod equalizer;
mod error;
pub mod harness;
pub mod ingest;
pub mod ldpc;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/colorspace.md")]
    pub mod colorspace {}
    #[doc = include_str!("../../../book/src/constellation.md")]
    pub mod constellation {}
    #[doc = include_str!("../../../book/src/channel.md")]
    pub mod channel {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    pub mod ingest {}
    #[doc = include_str!("../../../book/src/equalizer.md")]
    pub mod equalizer {}
    #[doc = include_str!("../../../book/src/ldpc.md")]
    pub mod ldpc {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/formats.md")]
    pub mod formats {}
}
