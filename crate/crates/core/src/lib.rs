//! Pseudospectral simulation and soliton-resolution diagnostics for the
//! Calogero–Moser derivative nonlinear Schrödinger equation
//!
//! ```text
//! i u_t + u_xx + 2 D₊(|u|²) u = 0                       (ungauged)
//! i v_t + v_xx + |D|(|v|²) v - ¼ |v|⁴ v = 0              (gauged)
//! ```
//!
//! on a periodic truncation [-L, L) of the line.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
pub mod error;
pub mod evolution;
pub mod fft;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod interp;
pub mod io;
pub mod spectral;
pub mod states;
pub mod verify;

pub use error::{CmError, Result};
pub use field::{Field, GaugeTag};
pub use grid::Grid1D;
pub use states::ModulationParams;

pub use num_complex;
