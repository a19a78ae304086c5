//! Krylov-space analysis of Rosenzweig–Porter random matrices.

// `!(x > 0.0)` guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensembles;
pub mod error;
pub mod krylov_dynamics;
pub mod krylov_ipr;
pub mod lanczos_stats;
pub mod lsq;
pub mod quadrature;
pub mod rng;
pub mod runner;
pub mod spectral;
pub mod tridiagonalize;
pub mod variance_flow;

pub use error::{Error, Result};
