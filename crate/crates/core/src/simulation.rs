//! Assembles a run from a configuration and drives the time loop with
//! energy bookkeeping and output.

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::diag::{check_energy_decay, energy, unaccounted, DecayReport, EnergyRecord};
use crate::fields::{sample_applied_field, Cubic, FieldContribution, Uniaxial};
use crate::integrator::{run, IntegratorError, LlgSystem, MagnetizationState};
use crate::io::config::{ConfigError, SimulationConfig};
use crate::io::output::{OutputError, TrajectoryWriter};
use crate::mesh::{Region, TetMesh};
use crate::multiscale::{Multiscale, MultiscaleError, MultiscaleWorkspace};
use crate::strayfield::{Strayfield, StrayfieldError, StrayfieldWorkspace};
use crate::Point;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Strayfield(#[from] StrayfieldError),
    #[error(transparent)]
    Multiscale(#[from] MultiscaleError),
    #[error("initial state: {0}")]
    Initial(String),
    #[error("thread pool: {0}")]
    Threads(String),
}

/// Everything needed to run: the discrete system, the initial state and the
/// step count.
pub struct Simulation {
    pub system: LlgSystem,
    pub initial: MagnetizationState,
    pub steps: usize,
}

/// Per-run diagnostics.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub energies: Vec<EnergyRecord>,
    pub final_state: MagnetizationState,
    /// Largest `| |m(z)| - 1 |` over all nodes and states.
    pub max_unit_defect: f64,
    /// Largest `|v(z) . m(z)|` over all nodes and steps.
    pub max_tangency: f64,
    pub decay: DecayReport,
    /// Contributions left out of the energy.
    pub unaccounted: Vec<String>,
}

/// Initial magnetization presets.
pub fn initial_state(
    kind: &str,
    mesh: &TetMesh,
    direction: Point,
    amplitude: f64,
    seed: u64,
) -> Result<Vec<Point>, SimulationError> {
    let d = direction.try_normalize(0.0).ok_or_else(|| SimulationError::Initial("direction vanishes".into()))?;
    Ok(match kind {
        "uniform" => vec![d; mesh.n_nodes()],
        "vortex" => {
            // in-plane curl around the axis through the centroid along z, with a core
            let (lo, hi) = mesh.bounding_box();
            let c = (lo + hi) / 2.0;
            let core = 0.2 * (hi - lo).norm();
            mesh.nodes().iter().map(|p| Point::new(-(p.y - c.y), p.x - c.x, core).normalize()).collect()
        }
        "perturbed" => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            mesh.nodes()
                .iter()
                .map(|_| {
                    let r = Point::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    (d + r * (2.0 * amplitude)).normalize()
                })
                .collect()
        }
        other => return Err(SimulationError::Initial(format!("unknown preset `{other}`"))),
    })
}

impl Simulation {
    pub fn from_config(cfg: &SimulationConfig) -> Result<Self, SimulationError> {
        let mesh = Arc::new(cfg.mesh.build(Region::Micro, &cfg.base_dir)?);
        let mut constants = cfg.material.constants()?;
        constants.t_reduced = cfg.time.k * cfg.time.steps as f64;
        let mut contributions: Vec<Box<dyn FieldContribution>> = Vec::new();
        match cfg.field.anisotropy.as_deref() {
            Some("uniaxial") => {
                let a = cfg.field.axis.unwrap_or([0.0, 0.0, 1.0]);
                let axis = Point::new(a[0], a[1], a[2]);
                contributions.push(Box::new(Uniaxial::new(axis, constants.c_ani).map_err(ConfigError::from)?));
            }
            Some("cubic") => contributions.push(Box::new(Cubic {
                k1: cfg.field.k1.unwrap_or(0.0),
                k2: cfg.field.k2.unwrap_or(0.0),
                c_ani: constants.c_ani,
            })),
            _ => {}
        }
        if let Some(method) = cfg.field.strayfield_method()? {
            let mut workspace = StrayfieldWorkspace::new(mesh.clone(), method)?;
            if let Some(tol) = cfg.solver.tol {
                workspace.tol = tol;
            }
            contributions.push(Box::new(Strayfield { workspace }));
        }
        if let Some(ms) = &cfg.multiscale {
            let macro_mesh = Arc::new(ms.mesh.build(Region::Macro, &cfg.base_dir)?);
            let workspace = MultiscaleWorkspace::new(mesh.clone(), macro_mesh, ms.law()?, ms.options()?)?;
            log::info!("multiscale field is nonlinear and is not part of the energy bookkeeping");
            contributions.push(Box::new(Multiscale { workspace }));
        }
        let applied = cfg.field.applied()?;
        let mut system = LlgSystem::new(mesh.clone(), constants, cfg.time.theta, cfg.time.k, contributions, applied)?;
        if let Some(tol) = cfg.solver.tol {
            system.tol = tol;
        }
        let init = &cfg.initial;
        let m0 = if init.kind == "file" {
            let path = cfg.base_dir.join(init.file.as_ref().expect("validated"));
            let m = crate::io::read_snapshot(&path)?;
            if m.len() != mesh.n_nodes() {
                return Err(SimulationError::Initial(format!(
                    "{} has {} nodes, mesh has {}",
                    path.display(),
                    m.len(),
                    mesh.n_nodes()
                )));
            }
            m
        } else {
            let d = init.direction.unwrap_or([1.0, 0.0, 0.0]);
            initial_state(
                &init.kind,
                &mesh,
                Point::new(d[0], d[1], d[2]),
                init.amplitude.unwrap_or(0.1),
                init.seed.unwrap_or(0),
            )?
        };
        let initial = MagnetizationState::new(m0)?;
        Ok(Self { system, initial, steps: cfg.time.steps })
    }

    /// Runs all steps, optionally streaming output; `decay_slack` is the
    /// constant `c` of the decay check.
    pub fn run(&self, mut writer: Option<&mut TrajectoryWriter>, decay_slack: f64) -> Result<RunSummary, SimulationError> {
        let sys = &self.system;
        let mut energies = Vec::with_capacity(self.steps + 1);
        let mut dissipation = 0.0;
        let mut max_unit: f64 = 0.0;
        let mut max_tangency: f64 = 0.0;
        let missing = unaccounted(&sys.contributions, &sys.mesh, &self.initial.m);
        if !missing.is_empty() {
            log::warn!("energy excludes {}", missing.join(", "));
        }
        let mut output_error = None;
        let final_state = run(sys, self.initial.clone(), self.steps, |rec| {
            let state = rec.state;
            let f = sample_applied_field(&sys.applied, &sys.mesh, state.time);
            let parts = energy(
                &sys.mesh,
                &sys.mass,
                &sys.stiffness,
                sys.constants.c_exch,
                &state.m,
                &sys.contributions,
                rec.pi_parts,
                &f,
            );
            let record = parts.record(state.step, state.time, dissipation);
            max_unit = max_unit.max(state.unit_defect());
            if let Some(v) = rec.v {
                dissipation += sys.constants.alpha * sys.k * sys.v_norm_sq(v);
                for (vi, mi) in v.iter().zip(&state.m) {
                    max_tangency = max_tangency.max(vi.dot(mi).abs());
                }
            }
            if let Some(w) = writer.as_deref_mut() {
                if let Err(e) = w.record(&record, &state.m, rec.v.is_none()) {
                    output_error = Some(e);
                    return Err(IntegratorError::Parameter("output failed".into()));
                }
            }
            energies.push(record);
            Ok(())
        });
        if let Some(e) = output_error {
            return Err(e.into());
        }
        let final_state = match final_state {
            Ok(s) => s,
            Err(e) => {
                if let Some(w) = writer {
                    w.flush()?;
                }
                return Err(e.into());
            }
        };
        let decay = check_energy_decay(&energies, decay_slack, sys.constants.alpha);
        Ok(RunSummary { energies, final_state, max_unit_defect: max_unit, max_tangency, decay, unaccounted: missing })
    }
}

/// Builds and runs a configuration, writing output into its directory.
pub fn simulate(cfg: &SimulationConfig) -> Result<RunSummary, SimulationError> {
    let body = || -> Result<RunSummary, SimulationError> {
        let sim = Simulation::from_config(cfg)?;
        let dir: PathBuf = cfg.output_dir();
        let mut writer = TrajectoryWriter::create(&dir, cfg.output.cadence)?;
        if cfg.output.vtk {
            writer = writer.with_vtk(&sim.system.mesh);
        }
        sim.run(Some(&mut writer), cfg.solver.decay_slack.unwrap_or(0.0))
    };
    match cfg.solver.threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SimulationError::Threads(e.to_string()))?
            .install(body),
        _ => body(),
    }
}
