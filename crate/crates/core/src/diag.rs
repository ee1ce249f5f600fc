//! Discrete energy and the energy-decay check.
//!
//! `E(m) = C_exch/2 |grad m|^2 + E_int(m) - <f, m>` where `E_int` collects
//! `1/2 <pi(m), m>` of linear self-adjoint contributions and the densities of
//! the others where available. Contributions with neither (the multiscale
//! field) are left out of the bookkeeping.

use crate::fem::assembly::{mass_dot, stiffness_dot};
use crate::fem::SparseOperator;
use crate::fields::FieldContribution;
use crate::mesh::TetMesh;
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRecord {
    pub step: usize,
    pub time: f64,
    pub exchange: f64,
    pub interaction: f64,
    pub zeeman: f64,
    pub total: f64,
    /// `alpha k sum_{i < step} ||v_i||^2`.
    pub dissipation: f64,
}

/// Energy parts without the step bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParts {
    pub exchange: f64,
    pub interaction: f64,
    pub zeeman: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.exchange + self.interaction + self.zeeman
    }

    pub fn record(&self, step: usize, time: f64, dissipation: f64) -> EnergyRecord {
        EnergyRecord {
            step,
            time,
            exchange: self.exchange,
            interaction: self.interaction,
            zeeman: self.zeeman,
            total: self.total(),
            dissipation,
        }
    }
}

/// Energy of `m` given the already evaluated field parts (same order as
/// `contributions`) and the nodal applied field.
#[allow(clippy::too_many_arguments)]
pub fn energy(
    mesh: &TetMesh,
    mass: &SparseOperator,
    stiffness: &SparseOperator,
    c_exch: f64,
    m: &[Point],
    contributions: &[Box<dyn FieldContribution>],
    pi_parts: &[Vec<Point>],
    f: &[Point],
) -> EnergyParts {
    assert_eq!(contributions.len(), pi_parts.len());
    let exchange = 0.5 * c_exch * stiffness_dot(stiffness, m, m);
    let mut interaction = 0.0;
    for (c, p) in contributions.iter().zip(pi_parts) {
        if c.is_linear_self_adjoint() {
            interaction += 0.5 * mass_dot(mass, p, m);
        } else if let Some(e) = c.energy(mesh, m) {
            interaction += e;
        }
    }
    let zeeman = -mass_dot(mass, f, m);
    EnergyParts { exchange, interaction, zeeman }
}

/// Contributions that [`energy`] cannot account for.
pub fn unaccounted(contributions: &[Box<dyn FieldContribution>], mesh: &TetMesh, m: &[Point]) -> Vec<String> {
    contributions
        .iter()
        .filter(|c| !c.is_linear_self_adjoint() && c.energy(mesh, m).is_none())
        .map(|c| c.name().to_string())
        .collect()
}

/// Outcome of [`check_energy_decay`].
#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub passed: bool,
    /// First step whose energy plus dissipation exceeds the bound.
    pub first_violation: Option<usize>,
    /// Largest `E_j + D_j - E_0` over all steps.
    pub max_excess: f64,
    /// Allowed slack at the step of `max_excess`.
    pub slack: f64,
}

/// Checks `E_j + D_j <= E_0 + 1e-8 (1 + |E_0|) + (c / alpha) D_j` for every
/// record, where `D_j` is the accumulated dissipation; the last term is
/// `c k sum ||v_i||^2`.
pub fn check_energy_decay(records: &[EnergyRecord], c: f64, alpha: f64) -> DecayReport {
    let Some(first) = records.first() else {
        return DecayReport { passed: true, first_violation: None, max_excess: 0.0, slack: 0.0 };
    };
    let e0 = first.total;
    let base = 1e-8 * (1.0 + e0.abs());
    let mut report = DecayReport { passed: true, first_violation: None, max_excess: f64::NEG_INFINITY, slack: base };
    for r in records {
        let slack = base + if c > 0.0 { c / alpha * r.dissipation } else { 0.0 };
        let excess = r.total + r.dissipation - e0;
        if excess > report.max_excess {
            report.max_excess = excess;
            report.slack = slack;
        }
        if excess > slack && report.first_violation.is_none() {
            report.first_violation = Some(r.step);
            report.passed = false;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_mass, assemble_stiffness};
    use crate::fields::{Cubic, Uniaxial};
    use crate::shapes;

    fn setup() -> (TetMesh, SparseOperator, SparseOperator) {
        let mesh = shapes::kuhn_box([2, 2, 2], Point::zeros(), Point::new(2.0, 1.0, 1.0), crate::Region::Micro);
        let mass = assemble_mass(&mesh);
        let stiffness = assemble_stiffness(&mesh, None);
        (mesh, mass, stiffness)
    }

    #[test]
    fn uniform_state_energies() {
        let (mesh, mass, k) = setup();
        let e = Point::new(0.0, 0.6, 0.8);
        let m = vec![e; mesh.n_nodes()];
        let none = energy(&mesh, &mass, &k, 1.0, &m, &[], &[], &vec![Point::zeros(); m.len()]);
        assert!(none.total().abs() < 1e-14);
        let uni: Vec<Box<dyn FieldContribution>> = vec![Box::new(Uniaxial::new(e, 1.0).unwrap())];
        let pi = vec![m.iter().map(|x| -e * x.dot(&e)).collect::<Vec<_>>()];
        let c = Point::new(0.1, -0.2, 0.3);
        let parts = energy(&mesh, &mass, &k, 1.0, &m, &uni, &pi, &vec![c; m.len()]);
        let vol = mesh.total_volume();
        assert!((parts.interaction + vol / 2.0).abs() < 1e-13);
        assert!((parts.zeeman + c.dot(&e) * vol).abs() < 1e-13);
        let r = parts.record(3, 0.3, 0.0);
        assert!((r.total - (r.exchange + r.interaction + r.zeeman)).abs() <= 1e-12 * r.total.abs());
    }

    #[test]
    fn exchange_energy_of_linear_field() {
        let (mesh, mass, k) = setup();
        // m = (x, 0, 0) has |grad m|^2 = 1 pointwise
        let m: Vec<Point> = mesh.nodes().iter().map(|p| Point::new(p.x, 0.0, 0.0)).collect();
        let parts = energy(&mesh, &mass, &k, 3.0, &m, &[], &[], &vec![Point::zeros(); m.len()]);
        assert!((parts.exchange - 1.5 * mesh.total_volume()).abs() < 1e-12);
    }

    #[test]
    fn nonlinear_contributions_use_their_density() {
        let (mesh, mass, k) = setup();
        let m = vec![Point::new(1.0, 1.0, 0.0).normalize(); mesh.n_nodes()];
        let cubic: Vec<Box<dyn FieldContribution>> = vec![Box::new(Cubic { k1: 1.0, k2: 0.0, c_ani: 2.0 })];
        let pi = vec![vec![Point::zeros(); m.len()]];
        let parts = energy(&mesh, &mass, &k, 1.0, &m, &cubic, &pi, &vec![Point::zeros(); m.len()]);
        assert_eq!(Some(parts.interaction), cubic[0].energy(&mesh, &m));
        assert!(unaccounted(&cubic, &mesh, &m).is_empty());
    }

    fn records(totals: &[f64]) -> Vec<EnergyRecord> {
        totals
            .iter()
            .enumerate()
            .map(|(i, &t)| EnergyRecord {
                step: i,
                time: i as f64,
                exchange: t,
                interaction: 0.0,
                zeeman: 0.0,
                total: t,
                dissipation: 0.0,
            })
            .collect()
    }

    #[test]
    fn decay_detector() {
        assert!(check_energy_decay(&records(&[1.0]), 0.0, 1.0).passed);
        assert!(check_energy_decay(&[], 0.0, 1.0).passed);
        let ok = check_energy_decay(&records(&[1.0, 0.9, 0.8, 0.8]), 0.0, 1.0);
        assert!(ok.passed);
        let bad = check_energy_decay(&records(&[1.0, 0.9, 0.8, 1.2, 0.7]), 0.0, 1.0);
        assert!(!bad.passed);
        assert_eq!(bad.first_violation, Some(3));
    }

    #[test]
    fn dissipation_counts_against_the_bound() {
        let mut r = records(&[1.0, 0.9]);
        r[1].dissipation = 0.2;
        assert_eq!(check_energy_decay(&r, 0.0, 1.0).first_violation, Some(1));
        // an O(k) defect allowance of c k sum ||v||^2 = (c / alpha) D
        assert!(check_energy_decay(&r, 1.0, 1.0).passed);
    }
}
