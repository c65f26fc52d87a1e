pub mod error;
pub mod adhesive;
pub mod adjoint;
pub mod fem;
pub mod forward;
pub mod identify;
pub mod io;
pub mod qp;

pub use error::{Error, Result};
pub use adhesive::{AdhesiveEnergyConfig, AdhesiveParams};
pub use adjoint::{AdjointBundle, BranchPolicy, StateGradients};
pub use fem::{ElasticityTensor, LoadingEdge, Mesh2D, RectangleGeometry, ReducedOperators};
pub use forward::{simulate, ForwardModel, LoadingProgram, LoadingSpec, Trajectory};
pub use identify::{run_identification, IdentificationProblem, IdentificationReport, ParameterBounds, PhasePlan};
pub use io::ExperimentConfig;
pub use qp::{Activity, QPSolution};
