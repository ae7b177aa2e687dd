//! Numerical toolkit for the tenth-order thin-film equation
//! `u_t = (|u|^n u_xxxxxxxxx)_x`.
//!
//! The crate is split into four layers:
//!
//! * [`odecore`] – a stiff Radau IIA integrator with dense output, event
//!   location and finite-difference Jacobians.
//! * [`oscillator`] – the ninth-order autonomous ODE governing oscillations
//!   near an interface, its limit cycles, equilibria and the heteroclinic
//!   bifurcation point.
//! * [`eigensolver`] – compactly supported similarity profiles and their
//!   nonlinear eigenvalues, computed by multiple shooting and continued
//!   in the mobility exponent.
//! * [`asymptotics`] – closed-form small-`n` laws, spectra and the
//!   operator-difference bound, with residual checks.

pub mod asymptotics;
pub mod eigensolver;
pub mod odecore;
pub mod oscillator;

pub use odecore::{EventSpec, IntegratorConfig, OdeError, OdeProblem, Trajectory};
pub use eigensolver::{
    ContinuationBranch, EigenConfig, EigenError, EigenProblemSpec, ResidualReport, ShootingState, SimilarityProfile,
};
pub use oscillator::{CycleConfig, HeteroclinicResult, InterfaceOscillatorParams, LimitCycle, OscillatorError};
pub use asymptotics::AsymptoticsError;
