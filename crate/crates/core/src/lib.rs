//! Quantized, part-disentangled explicit human pose prior.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: sign-canonical unit quaternions, skeletons, forward kinematics, MPJAE.
//! - [`numerics`]: dense tensors, perceptrons with exact backprop, optimizers, gradient checks.
//! - [`vq`]: codebooks, nearest-code quantization, EMA learning, dead-code reseeding.
//! - [`model`]: the multi-head, global/local quantized autoencoder and its latent operations.
//! - [`data`]: the synthetic pose manifold, pose file formats, dataset splits.
//! - [`training`]: the training loop and the `QPCK` checkpoint container.
//! - [`eval`]: reconstruction, escalated error, interpolation, sampling, local edits, ablations.
//! - [`wire`]: JSON forms of poses and latent codes shared by the CLI and HTTP service.

pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod hash;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod training;
pub mod vq;
pub mod wire;

pub use error::{Error, Result};
