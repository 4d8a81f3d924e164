//! Hawkes self-excited point process toolkit.
//!
//! The crate covers the full calibration loop for the univariate Hawkes model
//! with intensity `λ(t) = μ(t) + n Σ_{t_i<t} h(t - t_i)`:
//!
//! - [`kernels`]: the normalized memory kernels `h(t)` (exponential, Omori,
//!   cut-off power law and the sum-of-exponentials power-law surrogate).
//! - [`simulate`]: thinning and branching (cluster) simulators, Poisson
//!   sampling, burn-in.
//! - [`calibrate`]: log-likelihood, the profiled cost `S(ψ)` with the
//!   background rate eliminated analytically, multi-start simplex fitting and
//!   cost surfaces.
//! - [`residuals`]: time-rescaling residuals with Kolmogorov–Smirnov and
//!   Ljung–Box tests.
//! - [`preprocess`]: the data transforms that bias the branching ratio
//!   (outliers, bundling, randomization, detrending, concatenation).
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled; IO, file formats and the experiment harness live in the
//! `hawkes-lab` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod calibrate;
mod error;
pub mod kernels;
mod math;
pub mod nelder_mead;
pub mod preprocess;
pub mod residuals;
pub mod series;
pub mod simulate;
pub mod special;

pub use calibrate::{FitResult, KernelFamily, MultiStartConfig};
pub use error::{Error, Result};
pub use kernels::{Kernel, KernelSpec};
pub use series::{Background, BackgroundProfile, EventSeries, HawkesParams};
