//! Numerical laboratory for semilinear wave and Schrödinger equations with
//! supercritical nonlinearities.
//!
//! The crate is organised bottom-up:
//!
//! - [`nonlinearity`]: the catalog of nonlinearities, their Lipschitz
//!   truncations and the C¹ saturation cutoff.
//! - [`assumption_lab`]: sampled verification of the structural inequalities
//!   and estimation of their constants.
//! - [`field`]: periodic grids, spectral operators, quadrature and energies.
//! - [`wave`] and [`nls`]: time integrators with conservation diagnostics.
//! - [`weak_strong`]: discrepancy functionals between two trajectories and
//!   the Gronwall-type stability certificate.

pub mod assumption_lab;
pub mod error;
pub mod field;
pub mod nls;
pub mod nonlinearity;
pub mod sampling;
pub mod wave;
pub mod weak_strong;

pub use error::{Error, NonlinearityError, Result};
pub use field::{EnergyReport, GridSpec, NlsState, WaveState};
pub use nonlinearity::{AssumptionClass, NlsNonlinearitySpec, NonlinearitySpec, Selection, TruncationLevel};
