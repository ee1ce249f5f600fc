//! Hybrid FEM-BEM stray fields `pi_h(m) = grad(u11 + u12)` on the
//! microscopic body.
//!
//! * Fredkin-Koehler: `u11` solves the Neumann problem
//!   `<grad u11, grad v> = <m, grad v>` with zero mean, and `u12` is the
//!   harmonic extension of `(K - 1/2) u11` on the boundary.
//! * Garcia-Cervera-Roma: `u11` solves the same equation with zero Dirichlet
//!   data, and `u12` is the harmonic extension of `V (m.nu - du11/dnu)`.
//!
//! Boundary data reach the nodes through the face-average Clement operator;
//! element gradients are lifted to nodes by volume-weighted averaging.

use std::sync::Arc;

use thiserror::Error;

use crate::bem::{assemble_bem, BemError, BemOperatorSet};
use crate::fem::boundary::normal_component_projection;
use crate::fem::{
    assemble_stiffness, clement_from_face_integrals, dirichlet_extension, divergence_load, nodal_gradient,
    normal_derivative, solve_spd, trace, Constraint, SolveError, SparseOperator, DEFAULT_TOL,
};
use crate::fields::{FieldContribution, FieldError, Zeta};
use crate::mesh::{SurfaceMesh, TetMesh};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrayfieldMethod {
    FredkinKoehler,
    GarciaCerveraRoma,
}

impl std::str::FromStr for StrayfieldMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fk" => Ok(Self::FredkinKoehler),
            "gcr" => Ok(Self::GarciaCerveraRoma),
            other => Err(format!("unknown stray-field method `{other}` (expected fk or gcr)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum StrayfieldError {
    #[error("stray field, {stage}: {source}")]
    Solve {
        stage: &'static str,
        #[source]
        source: SolveError,
    },
    #[error("stray field boundary operators: {0}")]
    Bem(#[from] BemError),
    #[error("magnetization has {got} nodes, mesh has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("workspace was built for a different mesh")]
    MeshMismatch,
}

fn stage(stage: &'static str) -> impl FnOnce(SolveError) -> StrayfieldError {
    move |source| StrayfieldError::Solve { stage, source }
}

/// Operators of one microscopic mesh, reused across evaluations.
pub struct StrayfieldWorkspace {
    mesh: Arc<TetMesh>,
    surface: SurfaceMesh,
    stiffness: SparseOperator,
    weights: Vec<f64>,
    bem: BemOperatorSet,
    method: StrayfieldMethod,
    fingerprint: u64,
    pub tol: f64,
}

/// Both parts of the potential.
#[derive(Clone, Debug)]
pub struct StrayPotentials {
    pub u11: Vec<f64>,
    pub u12: Vec<f64>,
}

impl StrayfieldWorkspace {
    pub fn new(mesh: Arc<TetMesh>, method: StrayfieldMethod) -> Result<Self, StrayfieldError> {
        let surface = SurfaceMesh::extract(&mesh);
        let bem = assemble_bem(&surface)?;
        let stiffness = assemble_stiffness(&mesh, None);
        let weights = mesh.nodal_volumes();
        let fingerprint = mesh.fingerprint();
        Ok(Self { mesh, surface, stiffness, weights, bem, method, fingerprint, tol: DEFAULT_TOL })
    }

    pub fn mesh(&self) -> &Arc<TetMesh> {
        &self.mesh
    }

    pub fn surface(&self) -> &SurfaceMesh {
        &self.surface
    }

    pub fn bem(&self) -> &BemOperatorSet {
        &self.bem
    }

    pub fn stiffness(&self) -> &SparseOperator {
        &self.stiffness
    }

    pub fn method(&self) -> StrayfieldMethod {
        self.method
    }

    /// Fails unless `mesh` is the mesh the operators were built for.
    pub fn check_mesh(&self, mesh: &TetMesh) -> Result<(), StrayfieldError> {
        if mesh.fingerprint() == self.fingerprint {
            Ok(())
        } else {
            Err(StrayfieldError::MeshMismatch)
        }
    }

    /// Zero-mean Neumann solution of `<grad u, grad v> = <m, grad v>`.
    pub fn neumann_potential(&self, m: &[Point]) -> Result<Vec<f64>, StrayfieldError> {
        let rhs = divergence_load(&self.mesh, m);
        solve_spd(&self.stiffness, &rhs, Constraint::ZeroMean { weights: &self.weights }, self.tol)
            .map_err(stage("Neumann problem for u11"))
    }

    pub fn potentials(&self, m: &[Point]) -> Result<StrayPotentials, StrayfieldError> {
        if m.len() != self.mesh.n_nodes() {
            return Err(StrayfieldError::LengthMismatch { expected: self.mesh.n_nodes(), got: m.len() });
        }
        let (u11, face_integrals) = match self.method {
            StrayfieldMethod::FredkinKoehler => {
                let u11 = self.neumann_potential(m)?;
                let b = self.bem.interior_double_layer_trace(&trace(&self.surface, &u11));
                (u11, b)
            }
            StrayfieldMethod::GarciaCerveraRoma => {
                let rhs = divergence_load(&self.mesh, m);
                let zeros = vec![0.0; self.surface.n_nodes()];
                let u11 = solve_spd(
                    &self.stiffness,
                    &rhs,
                    Constraint::Dirichlet { nodes: &self.surface.nodes, values: &zeros },
                    self.tol,
                )
                .map_err(stage("Dirichlet problem for u11"))?;
                let mn = normal_component_projection(&self.surface, m);
                let dn = normal_derivative(&self.mesh, &u11, &self.surface);
                let sigma: Vec<f64> = mn.iter().zip(&dn).map(|(a, b)| a - b).collect();
                (u11, self.bem.apply_single_layer(&sigma))
            }
        };
        let g = clement_from_face_integrals(&self.surface, &face_integrals);
        let u12 = dirichlet_extension(&self.stiffness, &self.surface, &g, self.tol)
            .map_err(stage("harmonic extension for u12"))?;
        Ok(StrayPotentials { u11, u12 })
    }

    /// `pi_h(m)`: the lifted gradient of `u11 + u12`.
    pub fn evaluate(&self, m: &[Point]) -> Result<Vec<Point>, StrayfieldError> {
        if m.iter().all(|v| *v == Point::zeros()) {
            return Ok(vec![Point::zeros(); m.len()]);
        }
        let p = self.potentials(m)?;
        let u: Vec<f64> = p.u11.iter().zip(&p.u12).map(|(a, b)| a + b).collect();
        Ok(nodal_gradient(&self.mesh, &u))
    }
}

/// Fredkin-Koehler stray field on the configured mesh.
pub fn fk_strayfield(ws: &StrayfieldWorkspace, m: &[Point]) -> Result<Vec<Point>, StrayfieldError> {
    assert_eq!(ws.method, StrayfieldMethod::FredkinKoehler);
    ws.evaluate(m)
}

/// Garcia-Cervera-Roma stray field on the configured mesh.
pub fn gcr_strayfield(ws: &StrayfieldWorkspace, m: &[Point]) -> Result<Vec<Point>, StrayfieldError> {
    assert_eq!(ws.method, StrayfieldMethod::GarciaCerveraRoma);
    ws.evaluate(m)
}

/// The stray field as an effective-field contribution (`pi = grad u1`).
pub struct Strayfield {
    pub workspace: StrayfieldWorkspace,
}

impl FieldContribution for Strayfield {
    fn name(&self) -> &str {
        match self.workspace.method {
            StrayfieldMethod::FredkinKoehler => "strayfield-fk",
            StrayfieldMethod::GarciaCerveraRoma => "strayfield-gcr",
        }
    }

    fn evaluate(&self, m: &[Point], _: &Zeta<'_>) -> Result<Vec<Point>, FieldError> {
        self.workspace.evaluate(m).map_err(|e| FieldError::Failed { name: self.name().into(), message: e.to_string() })
    }

    fn is_linear_self_adjoint(&self) -> bool {
        true
    }
}

/// Volume-weighted mean of a nodal vector field.
pub fn mean_field(mesh: &TetMesh, v: &[Point]) -> Point {
    let w = mesh.nodal_volumes();
    v.iter().zip(&w).map(|(x, w)| x * *w).sum::<Point>() / w.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::{assemble_mass, mass_dot};
    use crate::shapes;
    use rand::{Rng, SeedableRng};

    fn sphere_ws(method: StrayfieldMethod) -> StrayfieldWorkspace {
        StrayfieldWorkspace::new(Arc::new(shapes::ball(1, 2, 1.0)), method).unwrap()
    }

    fn random_field(n: usize, rng: &mut impl Rng) -> Vec<Point> {
        (0..n).map(|_| Point::new(rng.gen(), rng.gen(), rng.gen()) * 2.0 - Point::repeat(1.0)).collect()
    }

    #[test]
    fn zero_magnetization_gives_zero() {
        for method in [StrayfieldMethod::FredkinKoehler, StrayfieldMethod::GarciaCerveraRoma] {
            let ws = sphere_ws(method);
            let out = ws.evaluate(&vec![Point::zeros(); ws.mesh().n_nodes()]).unwrap();
            assert!(out.iter().all(|v| *v == Point::zeros()));
        }
    }

    #[test]
    fn uniform_sphere_coarse() {
        for method in [StrayfieldMethod::FredkinKoehler, StrayfieldMethod::GarciaCerveraRoma] {
            let ws = sphere_ws(method);
            let m = Point::new(0.0, 0.6, 0.8);
            let out = ws.evaluate(&vec![m; ws.mesh().n_nodes()]).unwrap();
            let mean = mean_field(ws.mesh(), &out);
            // polyhedral and discretization error on 85 nodes is about 20 %
            assert!((mean - m / 3.0).norm() < 0.3 * m.norm() / 3.0, "{method:?}: {mean:?}");
        }
    }

    #[test]
    fn linearity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for method in [StrayfieldMethod::FredkinKoehler, StrayfieldMethod::GarciaCerveraRoma] {
            let ws = sphere_ws(method);
            let n = ws.mesh().n_nodes();
            let (a, b) = (random_field(n, &mut rng), random_field(n, &mut rng));
            let sum: Vec<Point> = a.iter().zip(&b).map(|(x, y)| x * 2.0 + y).collect();
            let (pa, pb, ps) = (ws.evaluate(&a).unwrap(), ws.evaluate(&b).unwrap(), ws.evaluate(&sum).unwrap());
            let scale = ps.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for i in 0..n {
                assert!((pa[i] * 2.0 + pb[i] - ps[i]).norm() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn divergence_free_tangential_field() {
        // m = (-y, x, 0) is divergence free with m.nu = 0 on the sphere
        let ws = sphere_ws(StrayfieldMethod::FredkinKoehler);
        let m: Vec<Point> = ws.mesh().nodes().iter().map(|p| Point::new(-p.y, p.x, 0.0)).collect();
        let p = ws.potentials(&m).unwrap();
        assert!(p.u11.iter().all(|u| u.abs() < 1e-9));
    }

    #[test]
    fn fk_is_nearly_self_adjoint() {
        let ws = sphere_ws(StrayfieldMethod::FredkinKoehler);
        let mass = assemble_mass(ws.mesh());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = ws.mesh().n_nodes();
        for _ in 0..3 {
            let (a, b) = (random_field(n, &mut rng), random_field(n, &mut rng));
            let (pa, pb) = (ws.evaluate(&a).unwrap(), ws.evaluate(&b).unwrap());
            let lhs = mass_dot(&mass, &pa, &b);
            let rhs = mass_dot(&mass, &a, &pb);
            let scale = (mass_dot(&mass, &pa, &pa) * mass_dot(&mass, &b, &b)).sqrt();
            assert!((lhs - rhs).abs() < 0.05 * scale, "{lhs} vs {rhs}, scale {scale}");
        }
    }

    #[test]
    fn workspace_rejects_other_mesh() {
        let ws = sphere_ws(StrayfieldMethod::FredkinKoehler);
        assert!(ws.check_mesh(ws.mesh()).is_ok());
        assert!(matches!(ws.check_mesh(&shapes::unit_cube_kuhn()), Err(StrayfieldError::MeshMismatch)));
    }
}
