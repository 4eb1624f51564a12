//! Numerical core for the radial semilinear wave equation on ℝ³⁺¹ with the
//! nonlinearity projected on outgoing states.
//!
//! The library is organized around a uniform radial grid:
//!
//! * [`grid`] — grid, field storage, differentiation, and quadrature,
//! * [`nonlocal`] — the smoothing operator `f ↦ (1/r)∫₀ʳ ρ f(ρ) dρ`,
//! * [`projection`] — the incoming/outgoing decomposition of Cauchy data,
//! * [`linear_wave`] — exact free-wave propagation at grid-aligned times,
//! * [`evolve`] — nonlinear time stepping (characteristics and system forms),
//! * [`diagnostics`] — norms, energies, balance-law residuals, decay fits.
//!
//! All fields are plain `f64` samples; operations are pure and safe to share
//! across threads.

pub mod diagnostics;
pub mod evolve;
pub mod grid;
pub mod linear_wave;
pub mod nonlocal;
pub mod projection;

pub use diagnostics::{DecaySlope, DiagnosticsRecord, NormSelector, SupportRadius};
pub use evolve::{Formulation, Monitors, RunOutcome, RunOutput, SolverConfig, State};
pub use grid::{DataPair, GridError, RadialField, RadialGrid};
pub use linear_wave::LinearFlow;
pub use projection::Decomposition;
