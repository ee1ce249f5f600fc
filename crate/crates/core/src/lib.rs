//! Multiscale micromagnetics on tetrahedral meshes.
//!
//! The microscopic body is advanced with a linear-implicit tangent-plane
//! integrator for the Landau-Lifshitz-Gilbert equation. Its effective field
//! combines exchange, anisotropy, an applied field, hybrid FEM-BEM stray fields
//! and the field induced by a macroscopic, nonlinearly magnetizable body that
//! is resolved with a stabilized Johnson-Nedelec FEM-BEM coupling.
//!
//! Module map:
//!
//! * [`mesh`]: tetrahedral meshes, boundary extraction, angle condition.
//! * [`fem`]: P1 assembly, constrained SPD solves, boundary transfer operators.
//! * [`bem`]: Galerkin single/double-layer matrices and off-surface potentials.
//! * [`fields`]: the field-contribution interface, anisotropies, applied fields.
//! * [`strayfield`]: Fredkin-Koehler and Garcia-Cervera-Roma stray fields.
//! * [`multiscale`]: material laws and the macroscopic coupling pipeline.
//! * [`integrator`]: tangent frames, one LLG step, and the time loop.
//! * [`diag`]: energies and the energy-decay check.
//! * [`io`]: configuration, trajectory output, snapshots and VTK export.

pub mod bem;
pub mod diag;
pub mod fem;
pub mod fields;
pub mod integrator;
pub mod io;
pub mod mesh;
pub mod multiscale;
pub mod shapes;
pub mod simulation;
pub mod strayfield;

/// A point or vector in three-dimensional space.
pub type Point = nalgebra::Vector3<f64>;

pub use mesh::{MeshError, Region, SurfaceMesh, TetMesh};
