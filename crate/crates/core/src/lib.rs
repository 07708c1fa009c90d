//! Numerical tools for the long-wave unstable thin film equation
//!
//! ```text
//! h_t + (|h|³ (a0 h_xxx + a1 h_x + a2 w'(x)))_x + a3 h_x = 0
//! ```
//!
//! on a periodic interval: an implicit conservative integrator ([`evolve`]),
//! steady-state solvers with continuation ([`steady`]), and evaluators for
//! the explicit constants and a priori bounds of the equation ([`bounds`]).

pub mod bounds;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod steady;

pub use error::{Error, Result, StepFailure};
pub use grid::{Grid, GridSpec, Norms, PeriodicField};
pub use model::{Forcing, ForcingKind, Params, RegularizationKnobs};
