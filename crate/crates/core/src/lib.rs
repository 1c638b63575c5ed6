//! Paraxial beam propagation through synthesized random media, the
//! Gaussian white-noise (Itô–Schrödinger) limit, and the moment equations
//! that tie the two together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod fft;
pub mod grid;
pub mod harness;
pub mod moments;
pub mod parabolic;
pub mod quad;
pub mod rng;
pub mod spectra;
pub mod stats;
pub mod synth;
pub mod whitenoise;

pub use error::{Error, Result};
