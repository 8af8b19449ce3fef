//! The common frame around every adapter: the [`AdaptationMatrix`] artifact,
//! its application to signals and composition, and the signal preprocessing
//! steps (resampling, normalization) applied before a matrix.

mod matrix;
mod normalize;
mod resample;
mod signal;

pub use matrix::{compose, AdaptationMatrix, Method, TargetDescriptor};
pub use normalize::{normalize, NormMode};
pub use resample::{rational_ratio, resample, Resampler, KAISER_BETA, PASSBAND_FRACTION};
pub use signal::{EpochSet, Signal};

/// `X_t = M X_s`.
pub fn apply(m: &AdaptationMatrix, x: &Signal) -> crate::Result<Signal> {
    m.apply(x)
}
