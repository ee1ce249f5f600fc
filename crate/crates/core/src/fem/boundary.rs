//! Boundary traces, face-wise projections, the face-average Clement
//! operator and discrete normal derivatives.

use super::quadrature::triangle_points;
use super::solve::{solve_spd, Constraint, SolveError};
use super::sparse::SparseOperator;
use crate::mesh::{SurfaceMesh, TetMesh};
use crate::Point;

/// Number of quadrature points per boundary face.
pub const FACE_POINTS: usize = 7;

/// Quadrature points and weights of all boundary faces, face by face
/// (`FACE_POINTS` entries per face).
pub fn face_quadrature(surface: &SurfaceMesh) -> Vec<(Point, f64)> {
    let mut out = Vec::with_capacity(FACE_POINTS * surface.n_faces());
    for f in 0..surface.n_faces() {
        out.extend(triangle_points(&surface.vertices(f), surface.face_areas[f]));
    }
    out
}

/// Face integrals `int_F g` from samples of `g` at [`face_quadrature`] points.
pub fn face_integrals(surface: &SurfaceMesh, samples: &[f64]) -> Vec<f64> {
    assert_eq!(samples.len(), FACE_POINTS * surface.n_faces());
    let quad = face_quadrature(surface);
    samples
        .chunks(FACE_POINTS)
        .zip(quad.chunks(FACE_POINTS))
        .map(|(s, q)| s.iter().zip(q).map(|(v, (_, w))| v * w).sum())
        .collect()
}

/// Clement node values `sum_{F ~ z} I_F / sum_{F ~ z} |F|` from face integrals
/// `I_F`. Indexed by local boundary node.
pub fn clement_from_face_integrals(surface: &SurfaceMesh, integrals: &[f64]) -> Vec<f64> {
    assert_eq!(integrals.len(), surface.n_faces());
    let mut num = vec![0.0; surface.n_nodes()];
    for (lf, i) in surface.local_faces.iter().zip(integrals) {
        for &z in lf {
            num[z] += i;
        }
    }
    num.iter().zip(surface.patch_areas()).map(|(n, a)| n / a).collect()
}

/// Clement interpolation from samples at [`face_quadrature`] points.
pub fn clement_from_samples(surface: &SurfaceMesh, samples: &[f64]) -> Vec<f64> {
    clement_from_face_integrals(surface, &face_integrals(surface, samples))
}

/// Face-average Clement interpolation of a point-evaluable function.
pub fn clement_boundary_interpolation(surface: &SurfaceMesh, g: impl Fn(&Point) -> f64) -> Vec<f64> {
    let samples: Vec<f64> = face_quadrature(surface).iter().map(|(p, _)| g(p)).collect();
    clement_from_samples(surface, &samples)
}

/// Fallible variant; the error carries the face index.
pub fn try_clement_boundary_interpolation<E>(
    surface: &SurfaceMesh,
    g: impl Fn(&Point) -> Result<f64, E>,
) -> Result<Vec<f64>, (usize, E)> {
    let quad = face_quadrature(surface);
    let mut samples = Vec::with_capacity(quad.len());
    for (k, (p, _)) in quad.iter().enumerate() {
        samples.push(g(p).map_err(|e| (k / FACE_POINTS, e))?);
    }
    Ok(clement_from_samples(surface, &samples))
}

/// Piecewise-constant L2 projection `int_F g / |F|`.
pub fn l2_projection_faces(surface: &SurfaceMesh, g: impl Fn(usize, &Point) -> f64) -> Vec<f64> {
    let quad = face_quadrature(surface);
    (0..surface.n_faces())
        .map(|f| {
            let pts = &quad[f * FACE_POINTS..(f + 1) * FACE_POINTS];
            pts.iter().map(|(p, w)| w * g(f, p)).sum::<f64>() / surface.face_areas[f]
        })
        .collect()
}

/// L2 projection of `m . nu` for a P1 vector field on the parent mesh.
pub fn normal_component_projection(surface: &SurfaceMesh, m: &[Point]) -> Vec<f64> {
    // m is affine on each face: the face average is the vertex mean
    surface
        .faces
        .iter()
        .zip(&surface.outward_unit_normals)
        .map(|(f, n)| ((m[f[0]] + m[f[1]] + m[f[2]]) / 3.0).dot(n))
        .collect()
}

/// `grad u |_{parent tet} . nu_F` per boundary face.
pub fn normal_derivative(mesh: &TetMesh, u: &[f64], surface: &SurfaceMesh) -> Vec<f64> {
    assert_eq!(u.len(), mesh.n_nodes());
    surface
        .parent_tet
        .iter()
        .zip(&surface.outward_unit_normals)
        .map(|(&t, n)| {
            let g = mesh.gradients(t);
            let tet = mesh.tets()[t];
            let grad: Point = (0..4).map(|a| g[a] * u[tet[a]]).sum();
            grad.dot(n)
        })
        .collect()
}

/// Boundary trace of a nodal field, indexed by local boundary node.
pub fn trace(surface: &SurfaceMesh, u: &[f64]) -> Vec<f64> {
    surface.nodes.iter().map(|&g| u[g]).collect()
}

/// Boundary mass `<chi_F, eta_z>_Gamma = |F|/3` (faces x boundary nodes).
pub fn boundary_mass(surface: &SurfaceMesh) -> SparseOperator {
    let mut t = Vec::with_capacity(3 * surface.n_faces());
    for (f, lf) in surface.local_faces.iter().enumerate() {
        for &z in lf {
            t.push((f, z, surface.face_areas[f] / 3.0));
        }
    }
    SparseOperator::from_triplets(surface.n_faces(), surface.n_nodes(), t, false)
}

/// Discrete harmonic extension of boundary values (local boundary order).
pub fn dirichlet_extension(
    stiffness: &SparseOperator,
    surface: &SurfaceMesh,
    boundary_values: &[f64],
    tol: f64,
) -> Result<Vec<f64>, SolveError> {
    let rhs = vec![0.0; stiffness.nrows()];
    solve_spd(stiffness, &rhs, Constraint::Dirichlet { nodes: &surface.nodes, values: boundary_values }, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::assemble_stiffness;
    use crate::mesh::boundary_faces;
    use crate::shapes;

    fn cube() -> TetMesh {
        shapes::kuhn_box([3, 3, 3], Point::zeros(), Point::repeat(1.0), crate::Region::Micro)
    }

    /// Nodes at the centres of the cube facets, whose patches and
    /// neighbouring patches are point-symmetric.
    fn facet_centres(s: &SurfaceMesh) -> Vec<usize> {
        (0..s.n_nodes())
            .filter(|&z| {
                let p = s.points[z];
                let mid = [p.x, p.y, p.z].iter().filter(|c| (**c - 0.5).abs() < 1e-12).count();
                mid == 2
            })
            .collect()
    }

    #[test]
    fn clement_reproduces_constants_and_affine() {
        let mesh = cube();
        let s = boundary_faces(&mesh);
        let ones = clement_boundary_interpolation(&s, |_| 1.0);
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let z = clement_boundary_interpolation(&s, |p| p.z);
        // exact wherever the patch is symmetric: facet interiors, and the whole top facet
        for (v, p) in z.iter().zip(&s.points) {
            let on_edge = [p.x, p.y].iter().any(|c| *c < 1e-12 || *c > 1.0 - 1e-12);
            if !on_edge || p.z == 1.0 && [p.x, p.y].iter().all(|c| *c > 1e-12 && *c < 1.0 - 1e-12) {
                assert!((v - p.z).abs() < 1e-12, "{p:?}");
            }
        }
        // corner patches are one-sided, so affine data is only averaged there
        let corner = s.points.iter().position(|p| *p == Point::repeat(1.0)).unwrap();
        assert!(z[corner] < 1.0);
    }

    #[test]
    fn clement_is_idempotent_on_affine_data() {
        let mesh = shapes::kuhn_box([4, 4, 4], Point::zeros(), Point::repeat(1.0), crate::Region::Micro);
        let s = boundary_faces(&mesh);
        let g = |p: &Point| 1.0 + 2.0 * p.x - p.y + 0.5 * p.z;
        let once = clement_boundary_interpolation(&s, g);
        // re-sample the P1 interpolant on faces and apply again
        let quad = face_quadrature(&s);
        let l = crate::fem::quadrature::triangle7();
        let samples: Vec<f64> = (0..quad.len())
            .map(|k| {
                let f = s.local_faces[k / FACE_POINTS];
                let b = l[k % FACE_POINTS].0;
                b[0] * once[f[0]] + b[1] * once[f[1]] + b[2] * once[f[2]]
            })
            .collect();
        let twice = clement_from_samples(&s, &samples);
        let centres = facet_centres(&s);
        assert_eq!(centres.len(), 6);
        for z in centres {
            assert!((once[z] - twice[z]).abs() < 1e-12);
            assert!((once[z] - g(&s.points[z])).abs() < 1e-12);
        }
    }

    #[test]
    fn clement_is_a_convex_combination() {
        let mesh = cube();
        let s = boundary_faces(&mesh);
        let bump = |p: &Point| (-20.0 * (p - Point::new(0.5, 0.5, 1.0)).norm_squared()).exp();
        let vals = clement_boundary_interpolation(&s, bump);
        assert!(vals.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn l2_projection_of_affine_is_centroid_value() {
        let mesh = cube();
        let s = boundary_faces(&mesh);
        let g = |_: usize, p: &Point| 3.0 * p.x - p.z;
        let proj = l2_projection_faces(&s, g);
        for (f, v) in proj.iter().enumerate() {
            let c = s.centroid(f);
            assert!((v - (3.0 * c.x - c.z)).abs() < 1e-13);
        }
        let m = Point::new(0.2, -0.4, 0.9);
        let flux = l2_projection_faces(&s, |f, _| m.dot(&s.outward_unit_normals[f]));
        let total: f64 = flux.iter().zip(&s.face_areas).map(|(v, a)| v * a).sum();
        assert!(total.abs() < 1e-13);
    }

    #[test]
    fn normal_derivative_of_linear_function() {
        let mesh = cube();
        let s = boundary_faces(&mesh);
        let u: Vec<f64> = mesh.nodes().iter().map(|p| p.z).collect();
        for (d, n) in normal_derivative(&mesh, &u, &s).iter().zip(&s.outward_unit_normals) {
            assert!((d - n.z).abs() < 1e-13);
        }
        let c = vec![4.0; mesh.n_nodes()];
        assert!(normal_derivative(&mesh, &c, &s).iter().all(|d| d.abs() < 1e-13));
    }

    #[test]
    fn harmonic_extension_of_affine_data() {
        let mesh = cube();
        let s = boundary_faces(&mesh);
        let k = assemble_stiffness(&mesh, None);
        let g: Vec<f64> = s.points.iter().map(|p| p.x).collect();
        let u = dirichlet_extension(&k, &s, &g, 1e-12).unwrap();
        for (v, p) in u.iter().zip(mesh.nodes()) {
            assert!((v - p.x).abs() < 1e-10);
        }
        let d = normal_derivative(&mesh, &u, &s);
        for (d, n) in d.iter().zip(&s.outward_unit_normals) {
            assert!((d - n.x).abs() < 1e-9);
        }
    }

    #[test]
    fn neumann_problem_with_zero_data() {
        let mesh = cube();
        let k = assemble_stiffness(&mesh, None);
        let w = mesh.nodal_volumes();
        let u = solve_spd(&k, &vec![0.0; mesh.n_nodes()], Constraint::ZeroMean { weights: &w }, 1e-10).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn boundary_mass_rows() {
        let mesh = cube();
        let s = boundary_faces(&mesh);
        let b = boundary_mass(&s);
        let ones = b.mul(&vec![1.0; s.n_nodes()]);
        for (a, f) in ones.iter().zip(&s.face_areas) {
            assert!((a - f).abs() < 1e-15);
        }
    }
}
