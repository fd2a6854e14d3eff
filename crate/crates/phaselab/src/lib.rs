//! Numerical laboratory for global phase estimation under dephasing noise.
//!
//! The crate covers three strands of the same estimation problem and
//! cross-validates them against each other:
//!
//! * quantum Fisher information (SLD and RLD) of the noisy phase channel,
//!   including the Choi-matrix route and the n-use additivity bound,
//! * covariant phase estimation on an (n+1)-dimensional spectrum, noiseless
//!   and with dephasing branches, with exact error functionals and Fourier
//!   limiting distributions,
//! * a practical adaptive one-qubit estimator with its flip model, exact
//!   outcome distribution, and Monte Carlo limiting distributions.

pub mod adaptive;
pub mod channel;
pub mod covariant;
pub mod error;
pub mod linalg;
pub mod noisy;
pub mod qfi;
pub mod runner;
pub mod stats;
pub mod tol;

pub use error::{PhaseLabError, Result};
pub use linalg::{CMatrix, CVector, DensityMatrix, PureState};

/// Scalar used throughout the crate.
pub type Real = f64;
/// Complex scalar used throughout the crate.
pub type Complex = num_complex::Complex64;
