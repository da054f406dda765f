//! Dense f64 micro-numerics: tensors, layers with hand-derived gradients,
//! Adam, cosine annealing, seeded randomness and finite-difference checks.
//!
//! Reductions run left to right in index order so a fixed seed gives
//! bit-identical results on one platform.

mod adam;
mod gradcheck;
mod ops;
mod rng;
mod schedule;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_loss, GradCheckReport};
pub use ops::{
    dot, l2_norm, l2_normalize, l2_normalize_backward, linear_apply, linear_backward,
    logsumexp, sigmoid, softmax, Linear, LinearGrads,
};
pub use rng::Prng;
pub use schedule::cosine_lr;
pub use tensor::{ParamGroup, Tensor};
