//! Linear-implicit tangent-plane integrator for the LLG equation.
//!
//! Each step solves for a nodal tangent field `v` with
//!
//! ```text
//! alpha <v, psi> + C_exch k theta <grad v, grad psi> + <m x v, psi>
//!     = -C_exch <grad m, grad psi> - <pi_h(m), psi> + <f_h, psi>
//! ```
//!
//! for all tangent `psi`, then renormalizes `m <- (m + k v) / |m + k v|`
//! node by node. The tangent space is parametrized by an orthonormal frame,
//! two unknowns per node; the reduced system is solved matrix-free with
//! diagonally preconditioned BiCGStab.

use std::sync::Arc;

use thiserror::Error;

use crate::fem::assembly::mass_norm_sq;
use crate::fem::solve::bicgstab;
use crate::fem::{assemble_mass, assemble_stiffness, SolveError, SparseOperator};
use crate::fields::{sample_applied_field, AppliedField, FieldContribution, FieldError, NondimConstants, Zeta};
use crate::mesh::{check_angle_condition, TetMesh};
use crate::Point;

/// Tolerance of the unit-length constraint on states.
pub const UNIT_TOL: f64 = 1e-12;
/// Tangency tolerance of the update field.
pub const TANGENT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("invalid integrator parameter: {0}")]
    Parameter(String),
    #[error("step {step}: {source}")]
    Field {
        step: usize,
        #[source]
        source: FieldError,
    },
    #[error("step {step}: tangent-plane solve failed: {source}")]
    Solve {
        step: usize,
        #[source]
        source: SolveError,
    },
    #[error("step {step}: node {node} violates {what} ({lhs:e} > {rhs:e})")]
    Constraint { step: usize, node: usize, what: &'static str, lhs: f64, rhs: f64 },
    #[error("magnetization has {got} nodes, mesh has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("initial magnetization vanishes at node {0}")]
    ZeroVector(usize),
}

/// Nodal magnetization with its step index and reduced time.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnetizationState {
    pub m: Vec<Point>,
    pub step: usize,
    pub time: f64,
}

impl MagnetizationState {
    /// Normalizes `m` node by node; warns when a node was off the sphere by
    /// more than `1e-6`.
    pub fn new(mut m: Vec<Point>) -> Result<Self, IntegratorError> {
        let mut worst: f64 = 0.0;
        for (i, v) in m.iter_mut().enumerate() {
            let n = v.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(IntegratorError::ZeroVector(i));
            }
            worst = worst.max((n - 1.0).abs());
            *v /= n;
        }
        if worst > 1e-6 {
            log::warn!("initial magnetization renormalized (largest deviation from unit length {worst:e})");
        }
        Ok(Self { m, step: 0, time: 0.0 })
    }

    /// Largest `| |m(z)| - 1 |`.
    pub fn unit_defect(&self) -> f64 {
        self.m.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Orthonormal tangent frame per node.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub t1: Vec<Point>,
    pub t2: Vec<Point>,
}

impl TangentFrame {
    /// `v(z) = y[2z] t1(z) + y[2z+1] t2(z)`.
    pub fn expand(&self, y: &[f64]) -> Vec<Point> {
        self.t1.iter().zip(&self.t2).enumerate().map(|(i, (a, b))| a * y[2 * i] + b * y[2 * i + 1]).collect()
    }

    /// Frame coefficients of a nodal vector field.
    pub fn project(&self, w: &[Point], out: &mut [f64]) {
        for (i, v) in w.iter().enumerate() {
            out[2 * i] = self.t1[i].dot(v);
            out[2 * i + 1] = self.t2[i].dot(v);
        }
    }
}

/// Frame from the coordinate axis least aligned with `m`:
/// `t1 = normalize(a - (a.m) m)`, `t2 = m x t1`.
pub fn frame_at(m: &Point) -> (Point, Point) {
    let axes = [Point::x(), Point::y(), Point::z()];
    let mut a = axes[0];
    let mut best = m.dot(&a).abs();
    for ax in &axes[1..] {
        let d = m.dot(ax).abs();
        if d < best {
            best = d;
            a = *ax;
        }
    }
    let t1 = (a - m * a.dot(m)).normalize();
    (t1, m.cross(&t1))
}

pub fn build_tangent_frame(m: &[Point]) -> TangentFrame {
    let (t1, t2) = m.iter().map(frame_at).unzip();
    TangentFrame { t1, t2 }
}

/// `int lambda_a lambda_b lambda_c` over a tetrahedron, divided by `|T|`.
fn triple_weight(a: usize, b: usize, c: usize) -> f64 {
    match (a == b, b == c, a == c) {
        (true, true, _) => 1.0 / 20.0,
        (false, false, false) => 1.0 / 120.0,
        _ => 1.0 / 60.0,
    }
}

/// Discrete problem data shared by all steps.
pub struct LlgSystem {
    pub mesh: Arc<TetMesh>,
    pub mass: SparseOperator,
    pub stiffness: SparseOperator,
    pub constants: NondimConstants,
    pub theta: f64,
    pub k: f64,
    pub tol: f64,
    pub contributions: Vec<Box<dyn FieldContribution>>,
    pub applied: AppliedField,
    weights: [[[f64; 4]; 4]; 4],
}

/// Result of one step.
pub struct StepOutput {
    pub v: Vec<Point>,
    pub next: MagnetizationState,
    pub iterations: usize,
}

impl LlgSystem {
    pub fn new(
        mesh: Arc<TetMesh>,
        constants: NondimConstants,
        theta: f64,
        k: f64,
        contributions: Vec<Box<dyn FieldContribution>>,
        applied: AppliedField,
    ) -> Result<Self, IntegratorError> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(IntegratorError::Parameter(format!("theta must lie in [0, 1], got {theta}")));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(IntegratorError::Parameter(format!("time step must be positive, got {k}")));
        }
        if !(constants.alpha > 0.0 && constants.c_exch > 0.0) {
            return Err(IntegratorError::Parameter("alpha and C_exch must be positive".into()));
        }
        if theta <= 0.5 {
            log::warn!("theta = {theta} <= 1/2: convergence needs k/h -> 0 (only conditionally stable)");
        }
        let violations = check_angle_condition(&mesh);
        if !violations.is_empty() {
            log::warn!(
                "mesh violates the angle condition at {} stiffness entries; renormalization may increase the exchange energy",
                violations.len()
            );
        }
        let mut weights = [[[0.0; 4]; 4]; 4];
        for (a, wa) in weights.iter_mut().enumerate() {
            for (b, wb) in wa.iter_mut().enumerate() {
                for (c, w) in wb.iter_mut().enumerate() {
                    *w = triple_weight(a, b, c);
                }
            }
        }
        let mass = assemble_mass(&mesh);
        let stiffness = assemble_stiffness(&mesh, None);
        Ok(Self {
            mesh,
            mass,
            stiffness,
            constants,
            theta,
            k,
            tol: crate::fem::DEFAULT_TOL,
            contributions,
            applied,
            weights,
        })
    }

    /// `int (m x v) . eta_c` for every node `c`, accumulated per element.
    pub fn cross_term(&self, m: &[Point], v: &[Point]) -> Vec<Point> {
        let mut out = vec![Point::zeros(); m.len()];
        for (t, tet) in self.mesh.tets().iter().enumerate() {
            let vol = self.mesh.volume(t);
            let mut cross = [[Point::zeros(); 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    cross[a][b] = m[tet[a]].cross(&v[tet[b]]);
                }
            }
            for c in 0..4 {
                let mut acc = Point::zeros();
                for a in 0..4 {
                    for b in 0..4 {
                        acc += cross[a][b] * self.weights[a][b][c];
                    }
                }
                out[tet[c]] += acc * vol;
            }
        }
        out
    }

    /// Per-contribution values of `pi_h(m, zeta)` at time `t`.
    pub fn evaluate_parts(&self, m: &[Point], time: f64, step: usize) -> Result<Vec<Vec<Point>>, IntegratorError> {
        let zeta = Zeta { time, applied: &self.applied };
        self.contributions
            .iter()
            .map(|c| {
                let p = c.evaluate(m, &zeta).map_err(|source| IntegratorError::Field { step, source })?;
                if let Some(node) = p.iter().position(|v| !v.iter().all(|x| x.is_finite())) {
                    return Err(IntegratorError::Field {
                        step,
                        source: FieldError::NonFinite { name: c.name().to_string(), node },
                    });
                }
                Ok(p)
            })
            .collect()
    }

    /// One step with `pi_h(m)` already evaluated.
    pub fn step_with_field(&self, state: &MagnetizationState, pi: &[Point]) -> Result<StepOutput, IntegratorError> {
        let n = self.mesh.n_nodes();
        if state.m.len() != n {
            return Err(IntegratorError::LengthMismatch { expected: n, got: state.m.len() });
        }
        let m = &state.m;
        let c = self.constants.c_exch;
        let alpha = self.constants.alpha;
        let ckt = c * self.k * self.theta;
        let frame = build_tangent_frame(m);
        let f = sample_applied_field(&self.applied, &self.mesh, state.time);

        // r = -C K m - M pi + M f
        let km = self.stiffness.mul_vec3(m);
        let load: Vec<Point> = f.iter().zip(pi).map(|(f, p)| f - p).collect();
        let ml = self.mass.mul_vec3(&load);
        let r: Vec<Point> = km.iter().zip(&ml).map(|(a, b)| b - a * c).collect();
        let mut rhs = vec![0.0; 2 * n];
        frame.project(&r, &mut rhs);

        let (md, kd) = (self.mass.diagonal(), self.stiffness.diagonal());
        let inv_diag: Vec<f64> = (0..2 * n).map(|r| 1.0 / (alpha * md[r / 2] + ckt * kd[r / 2])).collect();
        let apply = |y: &[f64], out: &mut [f64]| {
            let v = frame.expand(y);
            let mv = self.mass.mul_vec3(&v);
            let kv = self.stiffness.mul_vec3(&v);
            let cr = self.cross_term(m, &v);
            let w: Vec<Point> = (0..n).map(|i| mv[i] * alpha + kv[i] * ckt + cr[i]).collect();
            frame.project(&w, out);
        };
        let (y, iterations) = bicgstab(apply, &inv_diag, &rhs, self.tol, 20 * n.max(50))
            .map_err(|source| IntegratorError::Solve { step: state.step, source })?;
        let mut v = frame.expand(&y);
        for (vi, mi) in v.iter_mut().zip(m) {
            *vi -= mi * vi.dot(mi);
        }

        let k = self.k;
        let mut next = Vec::with_capacity(n);
        for (i, (mi, vi)) in m.iter().zip(&v).enumerate() {
            let tangency = vi.dot(mi).abs();
            if tangency > TANGENT_TOL {
                return Err(IntegratorError::Constraint {
                    step: state.step,
                    node: i,
                    what: "tangency v.m = 0",
                    lhs: tangency,
                    rhs: TANGENT_TOL,
                });
            }
            let w = mi + vi * k;
            let mn = w / w.norm();
            let vn = vi.norm();
            let slack = 1e-14 * (1.0 + k * vn);
            let d1 = (mn - mi).norm();
            if d1 > k * vn + slack {
                return Err(IntegratorError::Constraint {
                    step: state.step,
                    node: i,
                    what: "|m+ - m| <= k|v|",
                    lhs: d1,
                    rhs: k * vn,
                });
            }
            let d2 = (mn - mi - vi * k).norm();
            let bound = 0.5 * (k * vn).powi(2);
            if d2 > bound + slack {
                return Err(IntegratorError::Constraint {
                    step: state.step,
                    node: i,
                    what: "|m+ - m - kv| <= k^2|v|^2/2",
                    lhs: d2,
                    rhs: bound,
                });
            }
            next.push(mn);
        }
        let next = MagnetizationState { m: next, step: state.step + 1, time: (state.step + 1) as f64 * k };
        Ok(StepOutput { v, next, iterations })
    }

    /// One step of the scheme from `state`.
    pub fn llg_step(&self, state: &MagnetizationState) -> Result<StepOutput, IntegratorError> {
        let pi = sum_parts(&self.evaluate_parts(&state.m, state.time, state.step)?, state.m.len());
        self.step_with_field(state, &pi)
    }

    /// `||v||^2` in the mass norm.
    pub fn v_norm_sq(&self, v: &[Point]) -> f64 {
        mass_norm_sq(&self.mass, v)
    }
}

/// Sum of per-contribution fields in list order.
pub fn sum_parts(parts: &[Vec<Point>], n: usize) -> Vec<Point> {
    let mut total = vec![Point::zeros(); n];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Per-step data handed to the observer of [`run`].
pub struct StepRecord<'a> {
    pub state: &'a MagnetizationState,
    /// Field parts at `state`, in contribution order.
    pub pi_parts: &'a [Vec<Point>],
    /// Update field leaving `state` (`None` for the final state).
    pub v: Option<&'a [Point]>,
}

/// Runs `steps` steps from `initial`, calling `observe` for every state
/// including the initial and final ones. Returns the final state.
pub fn run(
    system: &LlgSystem,
    initial: MagnetizationState,
    steps: usize,
    mut observe: impl FnMut(&StepRecord<'_>) -> Result<(), IntegratorError>,
) -> Result<MagnetizationState, IntegratorError> {
    let mut state = initial;
    let n = state.m.len();
    loop {
        let parts = system.evaluate_parts(&state.m, state.time, state.step)?;
        if state.step == steps {
            observe(&StepRecord { state: &state, pi_parts: &parts, v: None })?;
            return Ok(state);
        }
        let out = system.step_with_field(&state, &sum_parts(&parts, n))?;
        observe(&StepRecord { state: &state, pi_parts: &parts, v: Some(&out.v) })?;
        log::trace!("step {} done in {} Krylov iterations", state.step, out.iterations);
        state = out.next;
    }
}
