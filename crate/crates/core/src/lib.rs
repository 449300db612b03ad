//! Coherent population oscillation in a driven two-level medium and the
//! deflection of a weak probe beam by a soliton control beam.
//!
//! The crate is organised bottom-up:
//!
//! - [`bloch`]: optical Bloch equations, Floquet steady states, probe spectra
//!   and the CPO hole metrics.
//! - [`medium`]: propagation coefficients, the soliton control profile and the
//!   saturable probe potential with its linearization.
//! - [`propagation`]: split-step spectral propagation of control and probe
//!   beams, beam moments and the deflection scan.
//! - [`wei_norman`]: factorized propagator for `{x, p, p², 1}` acting on
//!   Gaussian packets.
//!
//! Units: frequencies are measured in units of the dephasing rate by
//! convention (`gamma2 = 1`), with `hbar = 1` and `c = 1` unless configured
//! otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
mod error;
pub mod medium;
pub mod propagation;
pub mod wei_norman;

pub use error::{CoreError, Result};
pub use num_complex::Complex64;
