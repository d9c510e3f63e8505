//! Sparse propagators and direct Chebyshev expectation values for
//! Liouville-space spin dynamics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod chebyshev;
pub mod config;
pub mod dec;
pub mod error;
pub mod krylov;
pub mod oracle;
pub mod run;
pub mod sparse;
pub mod spectral;
pub mod spectrum;
pub mod spin;
pub mod trace;
pub mod zte;

pub use error::{Error, Result};
pub use sparse::{SparseMatrix, StateVector, TraceForm, C64};
