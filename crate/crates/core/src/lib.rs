//! Truncated Toeplitz operators on lattice triangles of the 2-torus.
//!
//! The crate factorizes positive symbols along an integer cone, assembles
//! and inverts the truncated operators (densely and through a Hankel
//! exchange system), and compares traces and log-determinants with their
//! large-scale asymptotic predictions.

pub mod asymptotics;
pub mod error;
pub mod factorization;
pub mod fft;
pub mod harness;
pub mod lattice;
pub mod par;
pub mod quadrature;
pub mod structured;
pub mod symbol;
pub mod toeplitz;

pub use error::{Error, Result};
pub use num_complex::Complex64;
