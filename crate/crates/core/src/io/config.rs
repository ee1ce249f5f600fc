//! Run configuration read from a TOML file.
//!
//! ```toml
//! [mesh]
//! shape = "ball"          # or file = "body.mesh"; shapes: ball, box, tet
//! level = 2
//! layers = 2
//! radius = 1.0
//!
//! [material]
//! c_exch = 1.0            # reduced constants, or A, K, Ms (and length)
//! c_ani = 0.1
//! alpha = 0.5
//!
//! [time]
//! theta = 1.0
//! k = 0.01
//! steps = 100
//!
//! [field]
//! anisotropy = "uniaxial" # none | uniaxial | cubic
//! axis = [0.0, 0.0, 1.0]
//! strayfield = "fk"       # none | fk | gcr
//! applied = [0.0, 0.0, -0.1]
//!
//! [initial]
//! kind = "perturbed"      # uniform | vortex | perturbed | file
//! direction = [1.0, 0.0, 0.0]
//!
//! [output]
//! dir = "out"
//! cadence = 10
//! ```
//!
//! A `[multiscale]` section with a `[multiscale.mesh]` table adds the
//! macroscopic body. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::fields::{compute_constants, intrinsic_length, AppliedField, FieldError, NondimConstants};
use crate::mesh::{MeshError, Region, TetMesh};
use crate::multiscale::{CouplingOptions, MaterialLaw, Scheme};
use crate::shapes;
use crate::strayfield::StrayfieldMethod;
use crate::Point;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Law(#[from] crate::multiscale::LawError),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub file: Option<PathBuf>,
    pub shape: Option<String>,
    pub level: Option<usize>,
    pub layers: Option<usize>,
    pub radius: Option<f64>,
    /// Cells per direction of a box.
    pub cells: Option<[usize; 3]>,
    pub lower: Option<[f64; 3]>,
    pub upper: Option<[f64; 3]>,
    /// Translation applied after generation or loading.
    pub offset: Option<[f64; 3]>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    #[serde(rename = "Ms")]
    pub ms: Option<f64>,
    /// Length scale in metres; defaults to the exchange length.
    pub length: Option<f64>,
    pub c_exch: Option<f64>,
    pub c_ani: Option<f64>,
    pub alpha: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub k: f64,
    pub steps: usize,
}

fn default_theta() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default)]
    pub anisotropy: Option<String>,
    pub axis: Option<[f64; 3]>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    #[serde(default)]
    pub strayfield: Option<String>,
    /// Constant applied field, or the amplitude of a sinusoidal one.
    pub applied: Option<[f64; 3]>,
    pub omega: Option<f64>,
    pub phase: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MultiscaleConfig {
    pub mesh: MeshConfig,
    pub law: String,
    pub chi: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub tol_nl: Option<f64>,
    pub max_iter: Option<usize>,
    pub scheme: Option<String>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: String,
    pub direction: Option<[f64; 3]>,
    pub file: Option<PathBuf>,
    /// Amplitude of the random perturbation.
    pub amplitude: Option<f64>,
    pub seed: Option<u64>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { kind: "uniform".into(), direction: None, file: None, amplitude: None, seed: None }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: Option<f64>,
    /// Worker threads; 1 gives single-threaded runs, 0 or absent uses all cores.
    pub threads: Option<usize>,
    /// Allowance `c` of the energy-decay check (`c k sum ||v||^2`).
    pub decay_slack: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default)]
    pub vtk: bool,
}

fn default_cadence() -> usize {
    1
}

/// Contents of a configuration file.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub mesh: MeshConfig,
    pub material: MaterialConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub field: FieldConfig,
    pub multiscale: Option<MultiscaleConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub output: OutputConfig,
    /// Directory against which relative paths are resolved.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn vec3(v: [f64; 3]) -> Point {
    Point::new(v[0], v[1], v[2])
}

impl MeshConfig {
    pub fn build(&self, region: Region, base: &Path) -> Result<TetMesh, ConfigError> {
        let mesh = match (&self.file, self.shape.as_deref()) {
            (Some(file), None) => TetMesh::load(base.join(file), region)?,
            (None, Some("ball")) => shapes::ball_with_region(
                self.level.unwrap_or(2),
                self.layers.unwrap_or(2),
                self.radius.unwrap_or(1.0),
                region,
            ),
            (None, Some("box")) => shapes::kuhn_box(
                self.cells.unwrap_or([2, 2, 2]),
                vec3(self.lower.unwrap_or([0.0; 3])),
                vec3(self.upper.unwrap_or([1.0; 3])),
                region,
            ),
            (None, Some("tet")) => shapes::translated(&shapes::regular_tet(), Point::zeros(), region),
            (None, Some(other)) => return Err(invalid(format!("unknown mesh shape `{other}` (ball, box, tet)"))),
            (Some(_), Some(_)) => return Err(invalid("mesh: give either `file` or `shape`, not both")),
            (None, None) => return Err(invalid("mesh: `file` or `shape` is required")),
        };
        Ok(match self.offset {
            Some(o) => shapes::translated(&mesh, vec3(o), region),
            None => mesh,
        })
    }
}

impl MaterialConfig {
    pub fn constants(&self) -> Result<NondimConstants, ConfigError> {
        match (self.c_exch, self.a, self.ms) {
            (Some(c_exch), None, None) => {
                if self.k.is_some() || self.length.is_some() {
                    return Err(invalid("material: reduced constants cannot be mixed with K or length"));
                }
                let c_ani = self.c_ani.unwrap_or(0.0);
                if !(c_exch > 0.0 && c_exch.is_finite()) {
                    return Err(FieldError::NonPositive("c_exch").into());
                }
                if !(c_ani >= 0.0 && c_ani.is_finite()) {
                    return Err(FieldError::Negative("c_ani").into());
                }
                if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                    return Err(FieldError::NonPositive("alpha").into());
                }
                Ok(NondimConstants { c_exch, c_ani, alpha: self.alpha, t_reduced: 0.0 })
            }
            (None, Some(a), Some(ms)) => {
                if self.c_ani.is_some() {
                    return Err(invalid("material: c_ani cannot be mixed with physical constants"));
                }
                let k = self.k.ok_or_else(|| invalid("material: K is required with A and Ms"))?;
                let length = self.length.unwrap_or_else(|| intrinsic_length(a, ms));
                Ok(compute_constants(a, k, ms, self.alpha, length, 1.0)?)
            }
            _ => Err(invalid("material: give either c_exch (reduced) or A and Ms (physical)")),
        }
    }
}

impl FieldConfig {
    pub fn applied(&self) -> Result<AppliedField, ConfigError> {
        Ok(match (self.applied, self.omega) {
            (None, None) => AppliedField::Zero,
            (Some(a), None) => AppliedField::Constant(vec3(a)),
            (Some(a), Some(omega)) => {
                AppliedField::Sinusoidal { amplitude: vec3(a), omega, phase: self.phase.unwrap_or(0.0) }
            }
            (None, Some(_)) => return Err(invalid("field: omega needs an applied amplitude")),
        })
    }

    pub fn strayfield_method(&self) -> Result<Option<StrayfieldMethod>, ConfigError> {
        match self.strayfield.as_deref() {
            None | Some("none") => Ok(None),
            Some(s) => s.parse().map(Some).map_err(invalid),
        }
    }
}

impl MultiscaleConfig {
    pub fn law(&self) -> Result<MaterialLaw, ConfigError> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| invalid(format!("multiscale: `{name}` is required")));
        Ok(match self.law.as_str() {
            "zero" => MaterialLaw::zero(),
            "linear" => MaterialLaw::linear(need(self.chi, "chi")?)?,
            "tanh" => MaterialLaw::tanh(need(self.c1, "c1")?, need(self.c2, "c2")?)?,
            "rational" => MaterialLaw::rational(
                need(self.c1, "c1")?,
                need(self.c2, "c2")?,
                need(self.c3, "c3")?,
                need(self.c4, "c4")?,
            )?,
            other => return Err(invalid(format!("unknown material law `{other}` (zero, linear, tanh, rational)"))),
        })
    }

    pub fn options(&self) -> Result<CouplingOptions, ConfigError> {
        let mut o = CouplingOptions::default();
        if let Some(t) = self.tol_nl {
            o.tol = t;
        }
        if let Some(m) = self.max_iter {
            o.max_iter = m;
        }
        if let Some(s) = &self.scheme {
            o.scheme = s.parse::<Scheme>().map_err(invalid)?;
        }
        Ok(o)
    }
}

impl SimulationConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text)?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks everything that does not need the meshes.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.material.constants()?;
        let t = &self.time;
        if !(0.0..=1.0).contains(&t.theta) {
            return Err(invalid(format!("time: theta must lie in [0, 1], got {}", t.theta)));
        }
        if !(t.k > 0.0 && t.k.is_finite()) {
            return Err(invalid("time: k must be positive"));
        }
        self.field.applied()?;
        self.field.strayfield_method()?;
        match self.field.anisotropy.as_deref() {
            None | Some("none") => {}
            Some("uniaxial") => {
                self.field.axis.ok_or_else(|| invalid("field: uniaxial anisotropy needs `axis`"))?;
            }
            Some("cubic") => {
                self.field.k1.ok_or_else(|| invalid("field: cubic anisotropy needs `k1`"))?;
            }
            Some(other) => return Err(invalid(format!("unknown anisotropy `{other}` (none, uniaxial, cubic)"))),
        }
        if let Some(ms) = &self.multiscale {
            ms.law()?;
            ms.options()?;
        }
        match self.initial.kind.as_str() {
            "uniform" | "vortex" | "perturbed" => {}
            "file" => {
                self.initial.file.as_ref().ok_or_else(|| invalid("initial: kind = \"file\" needs `file`"))?;
            }
            other => return Err(invalid(format!("unknown initial state `{other}` (uniform, vortex, perturbed, file)"))),
        }
        if self.output.cadence == 0 {
            return Err(invalid("output: cadence must be at least 1"));
        }
        if let Some(tol) = self.solver.tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(invalid("solver: tol must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output.dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        [mesh]
        shape = "ball"
        level = 1
        layers = 1

        [material]
        c_exch = 1.0
        c_ani = 0.2
        alpha = 0.5

        [time]
        k = 0.01
        steps = 3

        [field]
        anisotropy = "uniaxial"
        axis = [0.0, 0.0, 1.0]
        strayfield = "gcr"
        applied = [0.0, 0.0, 0.5]

        [output]
        dir = "out"
    "#;

    #[test]
    fn parses_reduced_configuration() {
        let cfg = SimulationConfig::parse(BASIC, "/tmp").unwrap();
        assert_eq!(cfg.time.theta, 1.0);
        assert_eq!(cfg.output.cadence, 1);
        let c = cfg.material.constants().unwrap();
        assert_eq!((c.c_exch, c.c_ani, c.alpha), (1.0, 0.2, 0.5));
        assert_eq!(cfg.field.strayfield_method().unwrap(), Some(StrayfieldMethod::GarciaCerveraRoma));
        assert!(matches!(cfg.field.applied().unwrap(), AppliedField::Constant(_)));
        assert_eq!(cfg.mesh.build(Region::Micro, Path::new("/tmp")).unwrap().n_tets(), 80);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASIC.replace("steps = 3", "steps = 3\nstpes = 4");
        assert!(matches!(SimulationConfig::parse(&text, "."), Err(ConfigError::Parse(_))));
        let text = BASIC.replace("[output]", "[outptu]");
        assert!(SimulationConfig::parse(&text, ".").is_err());
    }

    #[test]
    fn physical_constants() {
        let text = BASIC.replace(
            "c_exch = 1.0\n        c_ani = 0.2",
            "A = 1.3e-11\n        K = 5e4\n        Ms = 8e5",
        );
        let cfg = SimulationConfig::parse(&text, ".").unwrap();
        let c = cfg.material.constants().unwrap();
        assert!((c.c_exch - 1.0).abs() < 1e-12);
        assert!((c.c_ani - 5e4 / (crate::fields::MU0 * 8e5)).abs() < 1e-9);
    }

    #[test]
    fn invalid_values_are_reported() {
        for (from, to) in [
            ("alpha = 0.5", "alpha = -0.5"),
            ("k = 0.01", "k = 0.0"),
            ("strayfield = \"gcr\"", "strayfield = \"fft\""),
            ("anisotropy = \"uniaxial\"", "anisotropy = \"hexagonal\""),
            ("c_exch = 1.0", "c_exch = 1.0\n        Ms = 1.0"),
        ] {
            let text = BASIC.replace(from, to);
            assert!(SimulationConfig::parse(&text, ".").is_err(), "{to}");
        }
    }

    #[test]
    fn multiscale_section() {
        let text = format!(
            "{BASIC}\n[multiscale]\nlaw = \"tanh\"\nc1 = 1.0\nc2 = 1.0\nscheme = \"kacanov\"\n[multiscale.mesh]\nshape = \"ball\"\nlevel = 1\nlayers = 1\noffset = [3.0, 0.0, 0.0]\n"
        );
        let cfg = SimulationConfig::parse(&text, ".").unwrap();
        let ms = cfg.multiscale.unwrap();
        assert_eq!(ms.law().unwrap(), MaterialLaw::tanh(1.0, 1.0).unwrap());
        assert_eq!(ms.options().unwrap().scheme, Scheme::Kacanov);
        let bad = text.replace("c2 = 1.0\n", "");
        assert!(SimulationConfig::parse(&bad, ".").is_err());
    }
}
