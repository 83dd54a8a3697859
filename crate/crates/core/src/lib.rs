//! Kink dynamics in a two-field scalar theory with a U(1)-breaking mass term.

// Validation is written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod evolve;
pub mod interp;
pub mod io;
pub mod lattice;
pub mod model;
pub mod static_solver;

pub use evolve::{Boundary, CollisionSetup, EvolveConfig, EvolveError, Trajectory};
pub use lattice::{DiagnosticsSample, FieldState, Grid, LatticeError};
pub use model::{FieldPoint, ModelError, ModelParams};
pub use static_solver::{RelaxError, RelaxMethod, RelaxationSchedule, SeedKind, StaticProfile};
