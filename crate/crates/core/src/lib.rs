//! Describe-to-score image complexity laboratory.
//!
//! A vision encoder with learnable attention pooling is trained to regress
//! image complexity while a frozen caption embedder guides it through two
//! alignment losses: an energy distance between the entropy distributions
//! of visual and caption features (kept in momentum-refreshed FIFO buffers)
//! and an InfoNCE loss in a joint space reached through a linear connector.
//! Inference uses the vision branch and the score head only.
//!
//! Everything runs on synthetic scenes whose captions carry the complexity
//! signal by construction, with brute-force oracles for every estimator.

pub mod alignment;
pub mod config;
pub mod encoders;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod synthdata;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
