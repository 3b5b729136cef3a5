//! Cubature on Wiener space: truncated-signature algebra on free nilpotent
//! groups, cubature-path construction over meshes, pathwise ODE
//! integration, and weak-approximation estimates with empirical moment,
//! scaling and convergence diagnostics.

pub mod cubature;
pub mod error;
pub mod estimator;
pub mod mesh;
pub mod path;
pub mod sde;
pub mod stats;
pub mod tensor;

pub use cubature::{CubatureFormula, MomentReport};
pub use error::{Error, Result};
pub use estimator::{ConvergenceReport, Payoff};
pub use mesh::{Mesh, WalkSample};
pub use path::{PathSignature, PiecewiseLinearPath, ScalarPath};
pub use sde::{SolutionPath, VectorFieldSystem};
pub use tensor::{Alphabet, GroupElement, LieElement, TensorSeries};

/// Library version, embedded in report headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
