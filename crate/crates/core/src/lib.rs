//! Desk-scale numerics for Koopman-style linear embeddings of nonlinear and
//! open quantum dynamics.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod nip;
pub mod carleman;
pub mod cli;
pub mod fermion;
pub mod polyflow;
pub mod population;
pub mod rsep;
pub mod spectral;

pub use error::{Error, Result};
