//! Reduced-order modeling of transport-dominated dynamics.
//!
//! * [`numerics`]: dense kernels (POD, pivoted QR, least squares, generalized eigenproblem).
//! * [`fom`]: the full-order model contract and two built-in 1D models.
//! * [`rom`]: static POD-DEIM reduced models.
//! * [`adeim`]: online adaptive basis and sampling (AADEIM).
//! * [`diagnostics`]: error metric, singular-value decay, cost ledger, probes.

pub mod adeim;
pub mod diagnostics;
pub mod error;
pub mod fom;
pub mod numerics;
pub mod rom;

pub use error::{Result, RomError};
