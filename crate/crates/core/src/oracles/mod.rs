//! Independent solvers used as ground truth and as baselines.

pub mod decp;
pub mod neumann;
pub mod reference;

pub use decp::{decp_run, decp_step, DecpState, DecpStepReport, DecpVariant};
pub use neumann::{neumann_profile, neumann_solve, NeumannError, NeumannParams, NeumannSolution};
pub use reference::{reference_solution, ReferenceTrajectory};
