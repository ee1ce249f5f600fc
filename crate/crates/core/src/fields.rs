//! Effective-field contributions `pi_h(m, zeta)`, anisotropies, applied
//! fields and the non-dimensional constants of the LLG equation.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::fem::quadrature::tet4;
use crate::fem::SparseOperator;
use crate::mesh::TetMesh;
use crate::Point;

/// Vacuum permeability in T m / A.
pub const MU0: f64 = 4.0 * std::f64::consts::PI * 1e-7;
/// Gyromagnetic ratio in m / (A s).
pub const GAMMA0: f64 = 2.210173e5;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("parameter `{0}` must be positive and finite")]
    NonPositive(&'static str),
    #[error("easy axis must have unit length (|e| = {0})")]
    NonUnitAxis(f64),
    #[error("anisotropy constant `{0}` must be non-negative")]
    Negative(&'static str),
    #[error("contribution `{name}` produced a non-finite value at node {node}")]
    NonFinite { name: String, node: usize },
    #[error("contribution `{name}` failed: {message}")]
    Failed { name: String, message: String },
}

/// Non-dimensional constants of the LLG equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NondimConstants {
    pub c_exch: f64,
    pub c_ani: f64,
    pub alpha: f64,
    /// Reduced final time `gamma0 Ms T`.
    pub t_reduced: f64,
}

/// Intrinsic exchange length `sqrt(2A / (mu0 Ms^2))`, for which `C_exch = 1`.
pub fn intrinsic_length(a: f64, ms: f64) -> f64 {
    (2.0 * a / (MU0 * ms * ms)).sqrt()
}

/// `C_exch = 2A/(mu0 Ms^2 L^2)`, `C_ani = K/(mu0 Ms)`, `T' = gamma0 Ms T`.
pub fn compute_constants(
    a: f64,
    k: f64,
    ms: f64,
    alpha: f64,
    length: f64,
    t_physical: f64,
) -> Result<NondimConstants, FieldError> {
    for (v, name) in [(a, "A"), (k, "K"), (ms, "Ms"), (alpha, "alpha"), (length, "length"), (t_physical, "T")] {
        if !(v.is_finite() && v > 0.0) {
            return Err(FieldError::NonPositive(name));
        }
    }
    Ok(NondimConstants {
        c_exch: 2.0 * a / (MU0 * ms * ms * length * length),
        c_ani: k / (MU0 * ms),
        alpha,
        t_reduced: GAMMA0 * ms * t_physical,
    })
}

/// Applied field `f(t, x)` in reduced units.
#[derive(Clone)]
pub enum AppliedField {
    Zero,
    Constant(Point),
    /// `amplitude * sin(omega t + phase)`.
    Sinusoidal { amplitude: Point, omega: f64, phase: f64 },
    Custom(Arc<dyn Fn(f64, &Point) -> Point + Send + Sync>),
}

impl fmt::Debug for AppliedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({}, {}, {})", c.x, c.y, c.z),
            Self::Sinusoidal { amplitude, omega, phase } => {
                write!(f, "Sinusoidal({:?}, omega={omega}, phase={phase})", amplitude.as_slice())
            }
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl AppliedField {
    pub fn at(&self, t: f64, x: &Point) -> Point {
        match self {
            Self::Zero => Point::zeros(),
            Self::Constant(c) => *c,
            Self::Sinusoidal { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
            Self::Custom(f) => f(t, x),
        }
    }

    pub fn is_constant_in_time(&self) -> bool {
        matches!(self, Self::Zero | Self::Constant(_))
    }
}

/// Nodal interpolant `f_h(z) = f(t, z)`.
pub fn sample_applied_field(f: &AppliedField, mesh: &TetMesh, t: f64) -> Vec<Point> {
    mesh.nodes().iter().map(|x| f.at(t, x)).collect()
}

/// Auxiliary datum threaded to the contributions: the reduced time and the
/// applied field, which the multiscale contribution samples on its own mesh.
#[derive(Clone, Debug)]
pub struct Zeta<'a> {
    pub time: f64,
    pub applied: &'a AppliedField,
}

/// One summand of `pi_h(m, zeta)`. The integrator subtracts the sum of all
/// contributions from the applied field.
pub trait FieldContribution: Send + Sync {
    fn name(&self) -> &str;

    fn evaluate(&self, m: &[Point], zeta: &Zeta<'_>) -> Result<Vec<Point>, FieldError>;

    /// Linear and self-adjoint contributions enter the energy as `1/2 <pi(m), m>`.
    fn is_linear_self_adjoint(&self) -> bool {
        false
    }

    /// Energy for contributions outside the linear self-adjoint class, when a
    /// density is available.
    fn energy(&self, _mesh: &TetMesh, _m: &[Point]) -> Option<f64> {
        None
    }
}

/// Uniaxial anisotropy `pi(m) = -C_ani (m . e) e` with density `-1/2 (m . e)^2`.
#[derive(Clone, Debug)]
pub struct Uniaxial {
    pub axis: Point,
    pub c_ani: f64,
}

impl Uniaxial {
    pub fn new(axis: Point, c_ani: f64) -> Result<Self, FieldError> {
        if ((axis.norm() - 1.0).abs()) > 1e-12 {
            return Err(FieldError::NonUnitAxis(axis.norm()));
        }
        if !(c_ani >= 0.0) {
            return Err(FieldError::Negative("C_ani"));
        }
        Ok(Self { axis, c_ani })
    }
}

/// `D phi(m) = -(m . e) e` for the uniaxial density, node by node.
pub fn uniaxial_anisotropy(m: &[Point], axis: &Point) -> Result<Vec<Point>, FieldError> {
    if ((axis.norm() - 1.0).abs()) > 1e-12 {
        return Err(FieldError::NonUnitAxis(axis.norm()));
    }
    Ok(m.iter().map(|x| -axis * x.dot(axis)).collect())
}

impl FieldContribution for Uniaxial {
    fn name(&self) -> &str {
        "uniaxial"
    }

    fn evaluate(&self, m: &[Point], _: &Zeta<'_>) -> Result<Vec<Point>, FieldError> {
        Ok(uniaxial_anisotropy(m, &self.axis)?.into_iter().map(|v| v * self.c_ani).collect())
    }

    fn is_linear_self_adjoint(&self) -> bool {
        true
    }
}

/// Cubic-type density `K1 (x1^2 x2^2 + x2^2 x3^2) + K2 x1^2 x2^2 x3^2`.
pub fn cubic_density(x: &Point, k1: f64, k2: f64) -> f64 {
    let (a, b, c) = (x.x * x.x, x.y * x.y, x.z * x.z);
    k1 * (a * b + b * c) + k2 * a * b * c
}

/// Gradient of [`cubic_density`], node by node.
pub fn cubic_anisotropy(m: &[Point], k1: f64, k2: f64) -> Result<Vec<Point>, FieldError> {
    if !(k1 >= 0.0) {
        return Err(FieldError::Negative("K1"));
    }
    if !(k2 >= 0.0) {
        return Err(FieldError::Negative("K2"));
    }
    Ok(m.iter()
        .map(|p| {
            let (x, y, z) = (p.x, p.y, p.z);
            Point::new(
                2.0 * k1 * x * y * y + 2.0 * k2 * x * y * y * z * z,
                2.0 * k1 * (y * x * x + y * z * z) + 2.0 * k2 * x * x * y * z * z,
                2.0 * k1 * z * y * y + 2.0 * k2 * x * x * y * y * z,
            )
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct Cubic {
    pub k1: f64,
    pub k2: f64,
    pub c_ani: f64,
}

impl FieldContribution for Cubic {
    fn name(&self) -> &str {
        "cubic"
    }

    fn evaluate(&self, m: &[Point], _: &Zeta<'_>) -> Result<Vec<Point>, FieldError> {
        Ok(cubic_anisotropy(m, self.k1, self.k2)?.into_iter().map(|v| v * self.c_ani).collect())
    }

    fn energy(&self, mesh: &TetMesh, m: &[Point]) -> Option<f64> {
        let rule = tet4();
        let mut e = 0.0;
        for (t, tet) in mesh.tets().iter().enumerate() {
            for (l, w) in &rule {
                let x: Point = (0..4).map(|a| m[tet[a]] * l[a]).sum();
                e += w * mesh.volume(t) * cubic_density(&x, self.k1, self.k2);
            }
        }
        Some(self.c_ani * e)
    }
}

/// Sum of contributions evaluated in list order, with a finiteness check.
pub fn evaluate_all(
    contributions: &[Box<dyn FieldContribution>],
    m: &[Point],
    zeta: &Zeta<'_>,
) -> Result<Vec<Point>, FieldError> {
    let mut total = vec![Point::zeros(); m.len()];
    for c in contributions {
        let p = c.evaluate(m, zeta)?;
        if let Some(node) = p.iter().position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite())) {
            return Err(FieldError::NonFinite { name: c.name().to_string(), node });
        }
        for (t, v) in total.iter_mut().zip(&p) {
            *t += v;
        }
    }
    Ok(total)
}

/// `||pi(m)|| / (1 + ||grad m||)` in the mass and stiffness norms: the
/// empirical boundedness constant of a contribution at one input.
pub fn boundedness_ratio(pi: &[Point], m: &[Point], mass: &SparseOperator, stiffness: &SparseOperator) -> f64 {
    let p = crate::fem::assembly::mass_norm_sq(mass, pi).sqrt();
    let g = crate::fem::assembly::stiffness_dot(stiffness, m, m).max(0.0).sqrt();
    p / (1.0 + g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::{assemble_mass, mass_dot};
    use crate::shapes;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constants() {
        let (a, ms) = (1.3e-11, 8.0e5);
        let l = intrinsic_length(a, ms);
        let c = compute_constants(a, 5e4, ms, 0.1, l, 1e-9).unwrap();
        assert!((c.c_exch - 1.0).abs() < 1e-14);
        assert!((c.c_ani - 5e4 / (MU0 * ms)).abs() < 1e-12);
        assert!((c.t_reduced - 2.210173e5 * ms * 1e-9).abs() < 1e-9);
        assert_eq!(MU0, 4.0 * std::f64::consts::PI * 1e-7);
        match compute_constants(a, 5e4, -1.0, 0.1, l, 1.0) {
            Err(FieldError::NonPositive("Ms")) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uniaxial_values() {
        let e = Point::new(0.0, 0.6, 0.8);
        let t = Point::new(1.0, 0.0, 0.0);
        let out = uniaxial_anisotropy(&[e, t, (e + t) / 2f64.sqrt()], &e).unwrap();
        assert!((out[0] + e).norm() < 1e-15);
        assert!(out[1].norm() < 1e-15);
        assert!((out[2] + e / 2f64.sqrt()).norm() < 1e-15);
        assert!(uniaxial_anisotropy(&[e], &(e * 1.1)).is_err());
    }

    #[test]
    fn cubic_values() {
        let out = cubic_anisotropy(&[Point::x()], 1.0, 1.0).unwrap();
        assert_eq!(out[0], Point::zeros());
        let s = 1.0 / 3f64.sqrt();
        let out = cubic_anisotropy(&[Point::repeat(s)], 1.0, 0.0).unwrap();
        let expected = Point::new(1.0, 2.0, 1.0) * (2.0 / (3.0 * 3f64.sqrt()));
        assert!((out[0] - expected).norm() < 1e-15);
        assert!(cubic_anisotropy(&[Point::repeat(s)], 0.0, 0.0).unwrap()[0].norm() == 0.0);
    }

    #[test]
    fn cubic_gradient_matches_finite_differences() {
        let x = Point::new(0.3, -0.7, 0.5);
        let g = cubic_anisotropy(&[x], 1.3, 0.8).unwrap()[0];
        for i in 0..3 {
            let mut d = Point::zeros();
            d[i] = 1e-6;
            let fd = (cubic_density(&(x + d), 1.3, 0.8) - cubic_density(&(x - d), 1.3, 0.8)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn applied_field_sampling() {
        let mesh = shapes::unit_cube_kuhn();
        let f = AppliedField::Sinusoidal { amplitude: Point::z(), omega: 1.0, phase: 0.0 };
        for v in sample_applied_field(&f, &mesh, std::f64::consts::FRAC_PI_2) {
            assert!((v - Point::z()).norm() < 1e-15);
        }
        let c = Point::new(1.0, 2.0, 3.0);
        assert!(sample_applied_field(&AppliedField::Constant(c), &mesh, 4.0).iter().all(|v| *v == c));
        assert!(sample_applied_field(&AppliedField::Zero, &mesh, 4.0).iter().all(|v| *v == Point::zeros()));
    }

    #[test]
    fn uniaxial_is_self_adjoint_in_mass_product() {
        let mesh = shapes::kuhn_box([2, 2, 2], Point::zeros(), Point::repeat(1.0), crate::Region::Micro);
        let mass = assemble_mass(&mesh);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut rand_field = || -> Vec<Point> {
            (0..mesh.n_nodes()).map(|_| Point::new(rng.gen(), rng.gen(), rng.gen()) - Point::repeat(0.5)).collect()
        };
        let u = Uniaxial::new(Point::new(0.0, 0.0, 1.0), 1.0).unwrap();
        let zeta = Zeta { time: 0.0, applied: &AppliedField::Zero };
        for _ in 0..5 {
            let (a, b) = (rand_field(), rand_field());
            let lhs = mass_dot(&mass, &u.evaluate(&a, &zeta).unwrap(), &b);
            let rhs = mass_dot(&mass, &a, &u.evaluate(&b, &zeta).unwrap());
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn anisotropies_are_pointwise() {
        let m = vec![Point::new(0.6, 0.0, 0.8), Point::new(0.0, 1.0, 0.0), Point::new(0.48, 0.6, 0.64)];
        let mut p = m.clone();
        p.swap(1, 2);
        let e = Point::z();
        let (a, b) = (uniaxial_anisotropy(&m, &e).unwrap(), uniaxial_anisotropy(&p, &e).unwrap());
        assert_eq!(a[0], b[0]);
        let (a, b) = (cubic_anisotropy(&m, 1.0, 2.0).unwrap(), cubic_anisotropy(&p, 1.0, 2.0).unwrap());
        assert_eq!(a[0], b[0]);
    }

    proptest! {
        #[test]
        fn uniaxial_bounded_on_unit_sphere(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let v = Point::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let m = v.normalize();
            let out = uniaxial_anisotropy(&[m], &Point::new(0.0, 0.6, 0.8)).unwrap();
            prop_assert!(out[0].norm() <= 1.0 + 1e-15);
        }
    }
}
