//! Free-knot B-spline discretisations.

pub mod assembly;
pub mod bspline;
pub mod constraints;
pub mod energy_opt;
pub mod error;
pub mod experiment;
pub mod knots;
pub mod plot;
pub mod problems;
pub mod quadrature;
pub mod space;
pub mod verify;

pub use error::{Error, Result};
pub use knots::KnotVector;
pub use experiment::{run_study, ConvergenceRecord, RunConfig};
pub use problems::{problem, ProblemSpec};
pub use space::{BoundaryMode, MultiPatchSpace, PatchSpec};
pub use verify::BoundReport;
