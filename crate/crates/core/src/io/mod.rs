//! Configuration, trajectory output and VTK export.

pub mod config;
pub mod output;
pub mod vtk;

pub use config::{ConfigError, SimulationConfig};
pub use output::{read_energies, read_snapshot, write_snapshot, OutputError, TrajectoryWriter};
