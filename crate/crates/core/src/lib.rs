//! Instance-dependent generalization certificates from optimal transport.
//!
//! The pieces: convergence [`rates`] with explicit constants, rectangular
//! domain [`partition`]s, exact [`transport`] distances between empirical
//! [`measure`]s, mesh-based [`lipschitz`] estimation, certificate assembly
//! in [`bounds`], and a small from-scratch training harness in [`learn`].

pub mod bounds;
pub mod error;
pub mod learn;
pub mod lipschitz;
pub mod measure;
pub mod partition;
pub mod rates;
pub mod transport;

pub use error::{CoreError, Result};
