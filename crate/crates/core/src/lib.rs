//! Anomaly detection for highly imbalanced binary tabular data.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense layers with hand-derived gradients, optimizers and a
//!   finite-difference gradient oracle.
//! - [`sda2e`]: the sparse dual adversarial attention autoencoder (attention
//!   gate, generator and discriminator autoencoders, losses, training, scoring).
//! - [`simsearch`]: bit-packed binary vectors and similarity search.
//! - [`active`]: the similarity-guided active-learning session engine.
//! - [`eval`]: DCG/nDCG, run summaries and average ranks.
//! - [`data`]: CSV ingestion, label files and the synthetic dataset generator.

pub mod active;
pub mod data;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod rng;
pub mod sda2e;
pub mod simsearch;

pub use error::{Error, Result};
