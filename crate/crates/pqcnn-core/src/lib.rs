//! Simulator for linear-optical quantum circuits restricted to fixed
//! photon-number subspaces, with adaptive state injection, plus a trainable
//! Photonic Quantum Convolutional Neural Network (PQCNN) built on top of it.
//!
//! The crate is organized bottom-up:
//!
//! - [`fock`]: Fock-basis combinatorics and state containers (pure states and
//!   density operators over an `(m modes, k photons)` subspace).
//! - [`optics`]: beam-splitter circuits, their composition into `m`-mode
//!   unitaries, and the permanent-based lift to `k`-photon subspace unitaries.
//! - [`layers`]: the PQCNN stages — data loading, convolution, state-injection
//!   pooling, dense layer and readout binning.
//! - [`train`]: the full model, exact gradients, ADAM training, readout-layer
//!   search, and evaluation metrics.
//! - [`data`]: bars-and-stripes generators, the noisy loader-angle variant,
//!   8x8 digits ingestion, and the on-disk dataset formats.
//!
//! All numerics are generic over the floating-point scalar via [`Real`]
//! (`f32` or `f64`); the `*64` aliases below are the concrete types used by
//! the command-line harness and most tests.

pub mod data;
pub mod error;
pub mod fock;
pub mod layers;
pub mod linalg;
pub mod optics;
mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;

use num_complex::Complex;

pub type C32 = Complex<f32>;
pub type C64 = Complex<f64>;

pub type PureState64 = fock::PureState<f64>;
pub type MixedState64 = fock::MixedState<f64>;
pub type Circuit64 = optics::Circuit<f64>;
pub type ModeUnitary64 = optics::ModeUnitary<f64>;
pub type SubspaceUnitary64 = optics::SubspaceUnitary<f64>;
pub type Model64 = train::PqcnnModel<f64>;
pub type Sample64 = data::Sample<f64>;
