//! Oscillator Ising machine simulator.
//!
//! Solves MaxCut / Ising problems by integrating networks of coupled
//! nonlinear oscillators, and verifies the gradient-flow structure those
//! dynamics inherit from their energy functions:
//!
//! * [`graph`]      — problem instances, MaxCut/Ising conventions, exhaustive
//!   ground-state oracle;
//! * [`model`]      — parameters, state representations and the drift of
//!   every dynamical system (conjugate Stuart-Landau, amplitude-phase,
//!   phase-only, stationary-frame, DOPO quadratures);
//! * [`integrate`]  — RK4 and Euler-Maruyama steppers, gain schedules,
//!   seeded noise, the single-trial driver;
//! * [`energy`]     — energy functions, spin readout, amplitude-heterogeneity
//!   metrics, finite-difference gradient checks;
//! * [`experiment`] — multi-trial studies (solver benchmark, amplitude
//!   heterogeneity sweep, frame-of-reference demo, oracle validation);
//! * [`validate`]   — the fast identity suite behind `oscim validate`.

pub mod energy;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod integrate;
pub mod matrix;
pub mod model;
pub mod validate;

pub use error::{OscimError, Result};
