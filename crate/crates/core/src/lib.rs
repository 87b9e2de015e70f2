//! One-dimensional finite-element solver for heat conduction with phase change
//! in the enthalpy formulation.
//!
//! The implicit θ-step is a piecewise-affine homeomorphism of enthalpy space;
//! [`katzenelson`] finds its root exactly in finitely many linear solves.

pub mod assembly;
pub mod column;
pub mod config;
pub mod enthalpy;
pub mod error;
pub mod katzenelson;
pub mod linalg;
pub mod oracles;
pub mod scenario;
pub mod state;
pub mod stepper;
pub mod studies;

pub use assembly::{mass_matrix, AffinePiece, MassMatrix, StepContext};
pub use column::{build_column, Layer, Material, MeshSpec, SoilColumn};
pub use enthalpy::{Phase, PhaseSignature};
pub use error::ModelError;
pub use katzenelson::{solve_phi, SolveError, SolveReport, SolverConfig};
pub use linalg::TridiagonalMatrix;
pub use scenario::{InitialCondition, Scenario, SurfaceBc};
pub use state::{initial_state, State};
pub use stepper::{run, RunError, StepError, StepStats, Stepper, StepperConfig, Trajectory};
