//! Rational covariance extension and degree-constrained Nevanlinna–Pick
//! interpolation through the covariance extension equation (CEE)
//!
//! ```text
//! P = Γ(P − Phh'P)Γ' + g(P)g(P)',    g(P) = u + Uσ + UΓPh
//! ```
//!
//! The crate is split by concern:
//!
//! - [`poly`]: Schur polynomials, Laurent expansion of `f = b/(2a)`,
//!   the spectral-factor system `a b* + b a* = 2ρ²σσ*` and positive-realness.
//! - [`covdata`]: covariance estimation, Toeplitz positivity, the `(u, U)`
//!   parameters and algebraic degree via Hankel rank.
//! - [`cee`]: the CEE itself, its solvers, filter extraction and the
//!   positive-degree search over spectral zeros.
//! - [`realization`]: companion realizations and the classical Riccati
//!   equation used as an independent cross-check.
//! - [`nevpick`]: Nevanlinna–Pick data mapped onto the same CEE by
//!   replacing `(u, U)`.

pub mod cee;
pub mod covdata;
mod error;
pub mod linalg;
pub mod nevpick;
pub mod poly;
pub mod realization;

pub use error::{Error, Result};
