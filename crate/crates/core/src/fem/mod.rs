//! Lowest-order (P1) finite elements on tetrahedral meshes.
//!
//! Nodal fields are plain vectors indexed like the mesh nodes; face
//! densities are vectors indexed like the faces of a [`SurfaceMesh`](crate::SurfaceMesh).

pub mod assembly;
pub mod boundary;
pub mod quadrature;
pub mod solve;
pub mod sparse;

pub use assembly::{
    assemble_mass, assemble_stiffness, assemble_weighted_stiffness, divergence_load, element_gradients, lift_to_nodes,
    nodal_gradient,
};
pub use boundary::{
    boundary_mass, clement_boundary_interpolation, clement_from_face_integrals, clement_from_samples,
    dirichlet_extension, face_quadrature, l2_projection_faces, normal_derivative, trace,
};
pub use solve::{solve_spd, Constraint, SolveError, DEFAULT_TOL};
pub use sparse::SparseOperator;

use crate::Point;

/// P1 scalar field: one value per mesh node.
pub type NodalScalarField = Vec<f64>;
/// P1 vector field: one 3-vector per mesh node.
pub type NodalVectorField = Vec<Point>;
/// Piecewise-constant density: one value per boundary face.
pub type FaceDensity = Vec<f64>;
