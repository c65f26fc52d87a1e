//! Plane-strain P1 finite elements on a structured rectangle and the
//! condensation of the elastic problem onto the contact boundary.

mod assembly;
mod mesh;
mod partition;
mod schur;

pub use assembly::{assemble_stiffness, element_stiffness, ElasticityTensor};
pub use mesh::{build_structured_mesh, BoundaryEdge, EdgeLabel, LoadingEdge, Mesh2D, RectangleGeometry};
pub use partition::{partition_dofs, ContactFrame, DofPartition};
pub use schur::{schur_reduce, ReducedOperators};
