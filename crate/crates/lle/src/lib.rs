//! Numerical continuation toolkit for 2π-periodic traveling waves of the
//! dual-pumped Lugiato-Lefever equation
//!
//! ```text
//! -d u'' + iω u' + (ζ - i) u - |u|² u + i (f₀ + f₁ e(s)) = 0,   u 2π-periodic,
//! ```
//!
//! with `e(s) = exp(i k₁ s)` by default. The crate provides
//!
//! * the exact algebra of constant (one-pump) solutions, their turning
//!   points and degeneracy tests ([`trivial`]),
//! * closed-form a-priori bounds and uniqueness/continuation thresholds
//!   ([`bounds`]),
//! * a central finite-difference discretization with exact real Jacobians
//!   ([`discretize`]),
//! * damped Newton and pseudo-arclength predictor-corrector branch tracing
//!   in `f₁` or `ζ`, with fold handling, `f₁ = 0` crossing events and loop
//!   closure ([`continuation`]),
//! * kernel / adjoint-kernel extraction at `f₁ = 0`, bifurcation-shift
//!   (σ₀) prediction, transversality and simplicity diagnostics
//!   ([`bifurcation`]),
//! * the closed-form local response of the squared L²-norm at constant
//!   solutions ([`response`]).

pub mod bifurcation;
pub mod bounds;
pub mod continuation;
pub mod discretize;
pub(crate) mod linalg;
pub mod model;
pub mod response;
pub mod trivial;

pub use model::{ForcingProfile, Params, PeriodicField, PhysicalDetunings};

/// Complex scalar used throughout.
pub type Complex = num_complex::Complex<f64>;

pub(crate) const TWO_PI: f64 = std::f64::consts::TAU;
