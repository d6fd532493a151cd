//! Sub-linear (maximin) expectations over finite credal sets.
//!
//! The crate is organised bottom-up:
//!
//! * [`credal`] holds finite-support distributions and the credal sets built from them.
//! * [`sublin`] evaluates upper/lower expectations, the capacity pair and Choquet integrals.
//! * [`pengdp`] computes expectations of functionals of Peng-IID sequences by backward induction,
//!   together with a brute-force strategy enumeration used as an oracle.
//! * [`simulate`] draws sample paths under explicit prior-selection policies.
//! * [`analyze`] reduces sample paths to running averages, tail extrema and cluster coverage.
//! * [`cli`] ties everything into reproducible experiments with CSV/JSON reports.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod cli;
pub mod credal;
mod error;
pub mod functions;
pub mod pengdp;
pub mod rng;
pub mod simulate;
pub mod sublin;

pub use credal::{CredalSet, Event, FinitePmf};
pub use error::{Error, Result};
pub use simulate::{PriorPolicy, SamplePath};

/// Identities that must hold exactly up to floating point rounding.
pub const EXACT_TOL: f64 = 1e-12;
