//! Generalized primal-dual proximal splitting for saddle-point problems
//!
//! ```text
//! min_x max_y  G(x) + K(x, y) - F*(y)
//! ```
//!
//! with convex, possibly non-smooth `G`, `F*` and a smooth coupling `K` that need
//! not be bilinear or convex-concave. The crate provides the iteration engine
//! ([`engine`]), step-length rules and their admissibility bounds
//! ([`schedules`]), two worked problem instances ([`potts`] for Huber-regularized
//! ℓ⁰-TV denoising and [`nash`] for a two-player elliptic Nash game), numerical
//! oracles ([`verify`]), and file formats ([`io`], [`synthetic`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod io;
pub mod nash;
pub mod potts;
pub mod schedules;
pub mod synthetic;
pub mod verify;

pub use engine::{solve, step, IterationRecord, PrimalDualState, SaddleProblem, SolveOptions};
pub use error::{Error, Result};
pub use schedules::{ProblemConstants, StepSchedule, StepTriple};

/// Crate version, echoed into output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
