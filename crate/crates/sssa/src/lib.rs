//! Small-signal stability analysis of linear and linearized DAE systems.
//!
//! The toolkit covers matrix-pencil eigenanalysis, participation factors,
//! fractional-order controller synthesis and stability, time-delay stability
//! maps, and an implicit-trapezoidal DAE/DDAE integrator with one-step-delay
//! decoupling. See the crate examples for runnable walk-throughs of each
//! capability and the `sssa` binary for the command-line front end.

pub mod dae;
pub mod delay;
pub mod error;
pub mod fractional;
pub mod integrator;
pub mod io;
pub mod participation;
pub mod pencil;

pub use error::{Error, Result};
