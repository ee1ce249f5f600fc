//! Boundary integral operators of the Laplacian on closed triangulated surfaces.
//!
//! With `G(x, y) = 1 / (4 pi |x - y|)` and the outward normal `nu`:
//!
//! * single layer `(V phi)(x) = int G(x, y) phi(y) dy`,
//! * double layer `(K v)(x) = int (x - y).nu(y) / (4 pi |x - y|^3) v(y) dy`,
//!
//! so that the double-layer potential of the constant 1 equals `-1` inside,
//! `0` outside and `-1/2` on the surface.
//!
//! Galerkin matrices integrate the inner (source) variable in closed form and
//! the outer (test) variable with the 7-point triangle rule.

pub mod analytic;
pub mod potential;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

pub use analytic::Triangle;
pub use potential::{eval_double_layer, eval_single_layer};

use crate::fem::quadrature::triangle_points;
use crate::mesh::SurfaceMesh;

/// Faces smaller than this are rejected.
pub const MIN_FACE_AREA: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BemError {
    #[error("boundary face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("evaluation point {index} lies on the surface (distance {distance:e})")]
    PointOnSurface { index: usize, distance: f64 },
    #[error("expected {expected} density values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Galerkin matrices on one closed surface.
#[derive(Clone, Debug)]
pub struct BemOperatorSet {
    /// `<V chi_G, chi_F>` (faces x faces), symmetrized.
    pub v_g: DMatrix<f64>,
    /// `<K eta_z, chi_F>` (faces x boundary nodes).
    pub k_g: DMatrix<f64>,
    /// `<eta_z, chi_F>` (faces x boundary nodes).
    pub mb: DMatrix<f64>,
    /// `max |A_ij - A_ji| / max |A_ij|` of the quadrature matrix before
    /// symmetrization; measures the outer quadrature error.
    pub raw_asymmetry: f64,
}

/// Flat triangles of all faces, rejecting degenerate ones.
pub fn triangles(surface: &SurfaceMesh) -> Result<Vec<Triangle>, BemError> {
    (0..surface.n_faces())
        .map(|f| {
            let area = surface.face_areas[f];
            if !(area >= MIN_FACE_AREA) {
                return Err(BemError::DegenerateFace { face: f, area });
            }
            Ok(Triangle::new(surface.vertices(f)))
        })
        .collect()
}

/// Assembles `V_g`, `K_g` and the boundary mass.
pub fn assemble_bem(surface: &SurfaceMesh) -> Result<BemOperatorSet, BemError> {
    let tris = triangles(surface)?;
    let nf = surface.n_faces();
    let nb = surface.n_nodes();
    let scale = 1.0 / (4.0 * PI);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..nf)
        .into_par_iter()
        .map(|f| {
            let quad = triangle_points(&tris[f].v, tris[f].area);
            let mut v_row = vec![0.0; nf];
            let mut k_row = vec![0.0; nb];
            for (g, tri) in tris.iter().enumerate() {
                let lf = surface.local_faces[g];
                let mut v = 0.0;
                let mut k = [0.0; 3];
                for (x, w) in &quad {
                    v += w * tri.newton_potential(x);
                    let dl = tri.double_layer_weights(x);
                    for j in 0..3 {
                        k[j] += w * dl[j];
                    }
                }
                v_row[g] = scale * v;
                for j in 0..3 {
                    k_row[lf[j]] += scale * k[j];
                }
            }
            (v_row, k_row)
        })
        .collect();
    let mut a = DMatrix::zeros(nf, nf);
    let mut k_g = DMatrix::zeros(nf, nb);
    for (f, (v_row, k_row)) in rows.into_iter().enumerate() {
        for g in 0..nf {
            a[(f, g)] = v_row[g];
        }
        for z in 0..nb {
            k_g[(f, z)] = k_row[z];
        }
    }
    let raw_asymmetry = (&a - a.transpose()).amax() / a.amax();
    let v_g = (&a + a.transpose()) * 0.5;
    let mb = crate::fem::boundary_mass(surface).to_dense();
    Ok(BemOperatorSet { v_g, k_g, mb, raw_asymmetry })
}

impl BemOperatorSet {
    /// `(K_g - Mb/2) v`: face integrals of the interior trace of the
    /// double-layer potential of the boundary data `v`.
    pub fn interior_double_layer_trace(&self, v: &[f64]) -> Vec<f64> {
        let x = nalgebra::DVector::from_column_slice(v);
        let y = &self.k_g * &x - (&self.mb * &x) * 0.5;
        y.iter().cloned().collect()
    }

    /// `V_g phi`.
    pub fn apply_single_layer(&self, phi: &[f64]) -> Vec<f64> {
        let y = &self.v_g * nalgebra::DVector::from_column_slice(phi);
        y.iter().cloned().collect()
    }

    /// Largest face-wise defect of `K 1 = -1/2`, relative to the face area.
    pub fn gauss_defect(&self) -> f64 {
        let nb = self.k_g.ncols();
        let ones = nalgebra::DVector::from_element(nb, 1.0);
        let k1 = &self.k_g * &ones;
        let m1 = &self.mb * &ones;
        k1.iter().zip(m1.iter()).map(|(k, m)| ((k + 0.5 * m) / m).abs()).fold(0.0, f64::max)
    }

    /// `max |V_ij - V_ji| / max |V_ij|` (zero after symmetrization).
    pub fn symmetry_defect(&self) -> f64 {
        (&self.v_g - self.v_g.transpose()).amax() / self.v_g.amax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::boundary_faces;
    use crate::{shapes, Point};
    use rand::{Rng, SeedableRng};

    #[test]
    fn cube_identities() {
        let mesh = shapes::kuhn_box([2, 2, 2], Point::zeros(), Point::repeat(1.0), crate::Region::Micro);
        let s = boundary_faces(&mesh);
        let ops = assemble_bem(&s).unwrap();
        assert!(ops.gauss_defect() < 1e-10, "{}", ops.gauss_defect());
        assert!(ops.symmetry_defect() < 1e-10);
    }

    #[test]
    fn sphere_shell_potential() {
        // potential of a unit-density shell on the unit sphere is 1 on the sphere
        let mesh = shapes::ball(2, 1, 1.0);
        let s = boundary_faces(&mesh);
        assert_eq!(s.n_faces(), 320);
        let ops = assemble_bem(&s).unwrap();
        let total: f64 = ops.v_g.sum();
        let area = s.total_area();
        assert!((total / area - 1.0).abs() < 0.02, "{}", total / area);
        assert!(ops.gauss_defect() < 1e-10);
    }

    #[test]
    fn single_layer_is_elliptic() {
        let mesh = shapes::ball(1, 1, 1.0);
        let s = boundary_faces(&mesh);
        let ops = assemble_bem(&s).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let phi = nalgebra::DVector::from_fn(s.n_faces(), |_, _| rng.gen_range(-1.0..1.0));
            assert!(phi.dot(&(&ops.v_g * &phi)) > 0.0);
        }
    }

    #[test]
    fn degenerate_face_rejected() {
        let mut s = boundary_faces(&shapes::unit_cube_kuhn());
        s.face_areas[3] = 1e-20;
        assert_eq!(assemble_bem(&s).unwrap_err(), BemError::DegenerateFace { face: 3, area: 1e-20 });
    }
}
