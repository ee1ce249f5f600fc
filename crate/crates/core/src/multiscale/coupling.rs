//! Stabilized Johnson-Nedelec coupling on the macroscopic body.
//!
//! Unknowns `x = (phi, u)` with `phi` piecewise constant on the boundary and
//! `u` a P1 potential on the body:
//!
//! ```text
//! V phi + (B/2 - K) u|_G         = (B/2 - K) w|_G
//! A_chi(u) u - B^T phi           = g
//! ```
//!
//! `A_chi(u)` is the stiffness weighted by `1 + chi(|grad u|)` per element.
//! The stabilized operator adds `(s . x) s` where `s` collects the column sums
//! of the boundary rows; the right-hand side is shifted by the sum of the
//! boundary entries times `s`.

use nalgebra::{DMatrix, DVector, LU};

use crate::bem::BemOperatorSet;
use crate::fem::{assemble_weighted_stiffness, boundary_mass, SparseOperator};
use crate::mesh::{SurfaceMesh, TetMesh};

use super::law::MaterialLaw;
use super::MultiscaleError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Damped fixed point `x <- x - delta P^{-1}(A(x) - b)`, `delta = gamma / L^2`.
    Zarantonello,
    /// Frozen-coefficient linear solves.
    Kacanov,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zarantonello" => Ok(Self::Zarantonello),
            "kacanov" => Ok(Self::Kacanov),
            other => Err(format!("unknown nonlinear scheme `{other}` (expected zarantonello or kacanov)")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CouplingOptions {
    pub scheme: Scheme,
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self { scheme: Scheme::Zarantonello, tol: 1e-8, max_iter: 200 }
    }
}

/// Solution of one coupling solve.
#[derive(Clone, Debug)]
pub struct CouplingState {
    /// Exterior normal derivative of the induced potential, per face.
    pub phi: Vec<f64>,
    /// Total potential on the macroscopic body.
    pub u: Vec<f64>,
    /// Relative residual after each iteration.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl CouplingState {
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// Right-hand side data of the coupling.
pub struct CouplingRhs<'a> {
    /// Boundary data `w = u1h + uapp` (all nodes of the body).
    pub w: &'a [f64],
    /// Load of the volume rows.
    pub g: &'a [f64],
}

/// Linear pieces of the coupled system on one macroscopic mesh.
pub struct CouplingOperator {
    pub(crate) mesh: std::sync::Arc<TetMesh>,
    surface: SurfaceMesh,
    v_g: DMatrix<f64>,
    /// `B/2 - K_g`, faces x boundary nodes.
    c: DMatrix<f64>,
    b: SparseOperator,
    stiffness: SparseOperator,
    s: DVector<f64>,
    precond: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CouplingOperator {
    pub fn new(
        mesh: std::sync::Arc<TetMesh>,
        surface: SurfaceMesh,
        bem: &BemOperatorSet,
        stiffness: SparseOperator,
    ) -> Result<Self, MultiscaleError> {
        let c = &bem.mb * 0.5 - &bem.k_g;
        let b = boundary_mass(&surface);
        let nf = surface.n_faces();
        let n = mesh.n_nodes();
        let mut s = DVector::zeros(nf + n);
        for j in 0..nf {
            s[j] = bem.v_g.column(j).sum();
        }
        for (z, &g) in surface.nodes.iter().enumerate() {
            s[nf + g] = c.column(z).sum();
        }
        let mut op = Self {
            mesh,
            surface,
            v_g: bem.v_g.clone(),
            c,
            b,
            stiffness,
            s,
            precond: DMatrix::<f64>::identity(1, 1).lu(),
        };
        let p = op.dense(None, true);
        op.precond = p.lu();
        if !op.precond.is_invertible() {
            return Err(MultiscaleError::Singular);
        }
        Ok(op)
    }

    pub fn n_faces(&self) -> usize {
        self.surface.n_faces()
    }

    pub fn dim(&self) -> usize {
        self.n_faces() + self.mesh.n_nodes()
    }

    /// Stabilization vector `s`.
    pub fn stabilization(&self) -> &DVector<f64> {
        &self.s
    }

    /// Dense system matrix with the volume stiffness `k` (plain if `None`).
    pub fn dense(&self, k: Option<&SparseOperator>, stabilized: bool) -> DMatrix<f64> {
        let nf = self.n_faces();
        let n = self.dim();
        let k = k.unwrap_or(&self.stiffness);
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (nf, nf)).copy_from(&self.v_g);
        for (z, &g) in self.surface.nodes.iter().enumerate() {
            for f in 0..nf {
                a[(f, nf + g)] = self.c[(f, z)];
            }
        }
        for f in 0..nf {
            for (z, bv) in self.b.row(f) {
                a[(nf + self.surface.nodes[z], f)] -= bv;
            }
        }
        for i in 0..self.mesh.n_nodes() {
            for (j, v) in k.row(i) {
                a[(nf + i, nf + j)] += v;
            }
        }
        if stabilized {
            a += &self.s * self.s.transpose();
        }
        a
    }

    /// Unstabilized right-hand side.
    pub fn rhs_unstabilized(&self, rhs: &CouplingRhs<'_>) -> DVector<f64> {
        let nf = self.n_faces();
        let wb = DVector::from_iterator(self.surface.n_nodes(), self.surface.nodes.iter().map(|&g| rhs.w[g]));
        let top = &self.c * wb;
        let mut b = DVector::zeros(self.dim());
        b.rows_mut(0, nf).copy_from(&top);
        for (i, v) in rhs.g.iter().enumerate() {
            b[nf + i] = *v;
        }
        b
    }

    /// Stabilized right-hand side `b + (1 . b_phi) s`.
    pub fn rhs(&self, rhs: &CouplingRhs<'_>) -> DVector<f64> {
        let b = self.rhs_unstabilized(rhs);
        let shift = b.rows(0, self.n_faces()).sum();
        b + &self.s * shift
    }

    /// Stabilized nonlinear operator `A(x)`.
    pub fn apply(&self, x: &DVector<f64>, law: &MaterialLaw) -> DVector<f64> {
        let nf = self.n_faces();
        let n = self.mesh.n_nodes();
        let phi = x.rows(0, nf);
        let u: Vec<f64> = x.rows(nf, n).iter().copied().collect();
        let ub = DVector::from_iterator(self.surface.n_nodes(), self.surface.nodes.iter().map(|&g| u[g]));
        let mut y = DVector::zeros(nf + n);
        let top = &self.v_g * phi + &self.c * ub;
        y.rows_mut(0, nf).copy_from(&top);
        let ku = if law.is_zero() {
            self.stiffness.mul(&u)
        } else {
            assemble_weighted_stiffness(&self.mesh, &u, law).mul(&u)
        };
        let bt = self.b.mul_transpose(phi.as_slice());
        for i in 0..n {
            y[nf + i] = ku[i];
        }
        for (z, &g) in self.surface.nodes.iter().enumerate() {
            y[nf + g] -= bt[z];
        }
        y + &self.s * self.s.dot(x)
    }

    /// Norm of the product space: `V` on the density, the stiffness on the
    /// potential, plus the stabilization functional.
    pub fn norm(&self, z: &DVector<f64>) -> f64 {
        let nf = self.n_faces();
        let phi = z.rows(0, nf);
        let u = z.rows(nf, self.mesh.n_nodes());
        let vv = phi.dot(&(&self.v_g * phi));
        let uu = self.stiffness.bilinear(u.as_slice(), u.as_slice());
        (vv + uu + self.s.dot(z).powi(2)).max(0.0).sqrt()
    }

    fn precondition(&self, r: &DVector<f64>) -> Result<DVector<f64>, MultiscaleError> {
        self.precond.solve(r).ok_or(MultiscaleError::Singular)
    }

    fn split(&self, x: DVector<f64>, residuals: Vec<f64>, iterations: usize) -> CouplingState {
        let nf = self.n_faces();
        CouplingState {
            phi: x.rows(0, nf).iter().copied().collect(),
            u: x.rows(nf, self.mesh.n_nodes()).iter().copied().collect(),
            residuals,
            iterations,
        }
    }

    /// Relative residual of `x` measured as the preconditioned residual in
    /// the product norm.
    pub fn relative_residual(&self, x: &DVector<f64>, b: &DVector<f64>, law: &MaterialLaw) -> Result<f64, MultiscaleError> {
        let reference = self.norm(&self.precondition(b)?);
        let z = self.precondition(&(self.apply(x, law) - b))?;
        Ok(self.norm(&z) / reference)
    }

    /// Solves the stabilized system for the given data and law.
    pub fn solve(
        &self,
        rhs: &CouplingRhs<'_>,
        law: &MaterialLaw,
        options: &CouplingOptions,
    ) -> Result<CouplingState, MultiscaleError> {
        if law.gamma <= 0.25 {
            return Err(MultiscaleError::MonotonicityHypothesis { gamma: law.gamma });
        }
        let b = self.rhs(rhs);
        if b.iter().all(|v| *v == 0.0) {
            return Ok(self.split(DVector::zeros(self.dim()), vec![0.0], 0));
        }
        let reference = self.norm(&self.precondition(&b)?);
        if law.is_zero() {
            let x = self.precondition(&b)?;
            let r = self.norm(&self.precondition(&(self.apply(&x, law) - &b))?) / reference;
            return Ok(self.split(x, vec![r], 1));
        }
        match (options.scheme, law.is_linear()) {
            (_, true) | (Scheme::Kacanov, _) => self.kacanov(&b, reference, law, options),
            (Scheme::Zarantonello, false) => self.zarantonello(&b, reference, law, options),
        }
    }

    fn kacanov(
        &self,
        b: &DVector<f64>,
        reference: f64,
        law: &MaterialLaw,
        options: &CouplingOptions,
    ) -> Result<CouplingState, MultiscaleError> {
        let mut u = vec![0.0; self.mesh.n_nodes()];
        let mut residuals = Vec::new();
        for it in 1..=options.max_iter {
            let k = assemble_weighted_stiffness(&self.mesh, &u, law);
            let x = self.dense(Some(&k), true).lu().solve(b).ok_or(MultiscaleError::Singular)?;
            let r = self.norm(&self.precondition(&(self.apply(&x, law) - b))?) / reference;
            if !r.is_finite() {
                return Err(MultiscaleError::NotConverged { iterations: it, residuals });
            }
            residuals.push(r);
            log::debug!("kacanov iteration {it}: relative residual {r:e}");
            if r <= options.tol {
                return Ok(self.split(x, residuals, it));
            }
            u = x.rows(self.n_faces(), self.mesh.n_nodes()).iter().copied().collect();
        }
        Err(MultiscaleError::NotConverged { iterations: options.max_iter, residuals })
    }

    fn zarantonello(
        &self,
        b: &DVector<f64>,
        reference: f64,
        law: &MaterialLaw,
        options: &CouplingOptions,
    ) -> Result<CouplingState, MultiscaleError> {
        let delta = law.damping();
        // start from the solution with the plain stiffness
        let mut x = self.precondition(b)?;
        let mut residuals: Vec<f64> = Vec::new();
        for it in 1..=options.max_iter {
            let z = self.precondition(&(self.apply(&x, law) - b))?;
            let r = self.norm(&z) / reference;
            if !r.is_finite() {
                return Err(MultiscaleError::NotConverged { iterations: it, residuals });
            }
            if let Some(&prev) = residuals.last() {
                if r >= prev {
                    return Err(MultiscaleError::NonMonotone { iteration: it, previous: prev, current: r });
                }
            }
            residuals.push(r);
            log::debug!("zarantonello iteration {it}: relative residual {r:e}");
            if r <= options.tol {
                return Ok(self.split(x, residuals, it));
            }
            x -= z * delta;
        }
        Err(MultiscaleError::NotConverged { iterations: options.max_iter, residuals })
    }
}
