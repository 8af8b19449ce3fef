//! Channel-adaptation matrices for multichannel electrophysiology.
//!
//! Every adapter in this crate produces the same artifact, an
//! [`AdaptationMatrix`] `M` of shape `C_t × C_s`, applied along the channel
//! axis as `X_t = M · X_s`. The constructions differ only in how `M` is
//! built:
//!
//! * [`learned`]: a trainable linear projection (closed-form or gradient fit),
//! * [`ssi`]: spherical spline interpolation between two montages,
//! * [`harmonic`]: projection onto real spherical harmonics up to degree 4,
//! * [`riemannian`]: per-subject whitening by the Karcher mean of covariances.
//!
//! The crate is `no_std` compatible (with `alloc`); file formats, the CLI and
//! the benchmark harness live in the companion `chanadapt-cli` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod basis;
mod error;
pub mod geometry;
pub mod harmonic;
pub mod learned;
mod linalg;
pub mod oracle;
pub mod pipeline;
pub mod riemannian;
pub mod ssi;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{BuiltinMontage, Electrode, Montage};
pub use pipeline::{AdaptationMatrix, EpochSet, Method, Signal, TargetDescriptor};

/// Re-exported so downstream crates use the same matrix types.
pub use nalgebra::{DMatrix, DVector};
