//! Central table of numerical tolerances and default grids.
//!
//! Every contract-level tolerance lives here so that the acceptance suite
//! and the library agree on the same numbers.

/// Hermiticity tolerance on inputs (max entrywise |M - M^dag|).
pub const HERMITICITY: f64 = 1e-10;
/// Tolerance for density-matrix invariants (trace one, Hermiticity).
pub const DENSITY_MATRIX: f64 = 1e-12;
/// Smallest admissible eigenvalue of a density matrix.
pub const PSD_FLOOR: f64 = -1e-10;
/// Unit-norm tolerance for pure states and input spectra.
pub const UNIT_NORM: f64 = 1e-12;
/// Eigendecomposition reconstruction contract ||M - V L V^dag||_max.
pub const EIG_RECONSTRUCTION: f64 = 1e-9;
/// Relative spectral cutoff for pseudo-inverses and SLD support.
pub const SUPPORT_CUTOFF: f64 = 1e-12;
/// Allowed component of drho outside the support of rho.
pub const SLD_SUPPORT_LEAK: f64 = 1e-8;
/// Profile normalisation check (trapezoid quadrature of |f|^2).
pub const PROFILE_NORM: f64 = 1e-6;
/// Dirichlet boundary check |f(0)|, |f(1)|.
pub const DIRICHLET: f64 = 1e-6;
/// Parseval mass check for Fourier densities.
pub const PARSEVAL: f64 = 1e-3;
/// Poisson truncation: keep k until the tail mass drops below this.
pub const POISSON_TAIL: f64 = 1e-8;
/// Absolute target for the sine-integral quadrature.
pub const SI_ABS: f64 = 1e-10;

/// Default number of grid points for outcome densities on (-pi, pi].
pub const OUTCOME_GRID: usize = 1 << 14;
/// Default half-width of the Fourier window in t.
pub const FOURIER_WINDOW: f64 = 200.0;
/// Default number of grid points across the Fourier window.
pub const FOURIER_GRID: usize = 1 << 16;
/// Default number of samples for discretised profiles on [0, 1].
pub const PROFILE_SAMPLES: usize = 4097;
/// Largest qubit count accepted by the brute-force spin oracle.
pub const ORACLE_MAX_QUBITS: usize = 12;
