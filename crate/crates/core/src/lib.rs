//! Coherent control of the complex phase carried by a ground-state amplitude.
//!
//! The crate propagates driven two-level, lambda and tripod systems, builds
//! the four standard phase-control pulse schemes, splits accumulated phases
//! into dynamic and geometric parts, and tracks the phase-bearing matrix
//! element of open systems through a two-sided master equation.
//!
//! Conventions: `ħ = 1`, every frequency is an angular frequency and time is
//! measured in its reciprocal unit. The ground state carries zero energy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lambda;
pub mod linalg;
pub mod open;
pub mod parallel;
pub mod phase;
pub mod propagator;
pub mod schemes;
pub mod state;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use parallel::Execution;
pub use propagator::{ControlSegment, Drive, IntegratorConfig, PulseSchedule};
pub use state::{BasisLabel, BlochVector, StateVector, TorqueVector, Trajectory};
