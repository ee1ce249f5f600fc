//! Nodal snapshots and the energy table.
//!
//! A snapshot starts with `nodal-field 3 <N>` followed by `N` lines
//! `mx my mz` in mesh node order, written with 17 significant digits.
//! `energies.csv` has one row per recorded step.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diag::EnergyRecord;
use crate::Point;

pub const ENERGY_FILE: &str = "energies.csv";
pub const ENERGY_HEADER: &str = "step,time,E_exch,E_int,E_zeeman,E_total,dissipation_sum";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Format { path: String, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.display().to_string(), source }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Snapshot text of a nodal vector field.
pub fn snapshot_text(m: &[Point]) -> String {
    let mut s = String::with_capacity(72 * m.len() + 32);
    let _ = writeln!(s, "nodal-field 3 {}", m.len());
    for v in m {
        let _ = writeln!(s, "{} {} {}", fmt17(v.x), fmt17(v.y), fmt17(v.z));
    }
    s
}

pub fn parse_snapshot(text: &str, path: &str) -> Result<Vec<Point>, OutputError> {
    let err = |line: usize, message: String| OutputError::Format { path: path.into(), line, message };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty snapshot".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let n: usize = match h.as_slice() {
        ["nodal-field", "3", n] => n.parse().map_err(|_| err(1, format!("bad node count `{n}`")))?,
        _ => return Err(err(1, format!("expected `nodal-field 3 <N>`, found `{header}`"))),
    };
    let mut out = Vec::with_capacity(n);
    for (i, line) in lines {
        let xs: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        match xs {
            Ok(x) if x.len() == 3 => out.push(Point::new(x[0], x[1], x[2])),
            _ => return Err(err(i + 1, format!("expected three numbers, found `{line}`"))),
        }
    }
    if out.len() != n {
        return Err(err(text.lines().count(), format!("expected {n} rows, found {}", out.len())));
    }
    Ok(out)
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Vec<Point>, OutputError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_snapshot(&text, &path.display().to_string())
}

pub fn write_snapshot(path: impl AsRef<Path>, m: &[Point]) -> Result<(), OutputError> {
    let path = path.as_ref();
    fs::write(path, snapshot_text(m)).map_err(io_err(path))
}

pub fn snapshot_name(step: usize) -> String {
    format!("m_{step:06}.txt")
}

/// One CSV row.
pub fn energy_row(r: &EnergyRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.step,
        fmt17(r.time),
        fmt17(r.exchange),
        fmt17(r.interaction),
        fmt17(r.zeeman),
        fmt17(r.total),
        fmt17(r.dissipation)
    )
}

pub fn read_energies(path: impl AsRef<Path>) -> Result<Vec<EnergyRecord>, OutputError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let p = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == ENERGY_HEADER => {}
        _ => return Err(OutputError::Format { path: p, line: 1, message: format!("expected header `{ENERGY_HEADER}`") }),
    }
    let mut out = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |message: String| OutputError::Format { path: p.clone(), line: i + 1, message };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 7 {
            return Err(bad(format!("expected 7 columns, found {}", cols.len())));
        }
        let step = cols[0].parse().map_err(|_| bad(format!("bad step `{}`", cols[0])))?;
        let mut v = [0.0; 6];
        for (k, c) in cols[1..].iter().enumerate() {
            v[k] = c.parse().map_err(|_| bad(format!("bad number `{c}`")))?;
        }
        out.push(EnergyRecord {
            step,
            time: v[0],
            exchange: v[1],
            interaction: v[2],
            zeeman: v[3],
            total: v[4],
            dissipation: v[5],
        });
    }
    Ok(out)
}

/// Streams snapshots and energies of a run into a directory.
pub struct TrajectoryWriter {
    dir: PathBuf,
    cadence: usize,
    energies: BufWriter<fs::File>,
    vtk: Option<crate::io::vtk::VtkWriter>,
    written: Vec<usize>,
}

impl TrajectoryWriter {
    pub fn create(dir: impl Into<PathBuf>, cadence: usize) -> Result<Self, OutputError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(ENERGY_FILE);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut energies = BufWriter::new(file);
        writeln!(energies, "{ENERGY_HEADER}").map_err(io_err(&path))?;
        Ok(Self { dir, cadence: cadence.max(1), energies, vtk: None, written: Vec::new() })
    }

    /// Also writes a VTK file with every snapshot.
    pub fn with_vtk(mut self, mesh: &crate::mesh::TetMesh) -> Self {
        self.vtk = Some(crate::io::vtk::VtkWriter::new(mesh));
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Steps for which snapshots were written.
    pub fn snapshot_steps(&self) -> &[usize] {
        &self.written
    }

    /// Records one state; snapshots follow the cadence, and `last` forces one.
    pub fn record(&mut self, energy: &EnergyRecord, m: &[Point], last: bool) -> Result<(), OutputError> {
        let path = self.dir.join(ENERGY_FILE);
        writeln!(self.energies, "{}", energy_row(energy)).map_err(io_err(&path))?;
        if energy.step % self.cadence == 0 || last {
            write_snapshot(self.dir.join(snapshot_name(energy.step)), m)?;
            if let Some(vtk) = &self.vtk {
                let p = self.dir.join(format!("m_{:06}.vtk", energy.step));
                fs::write(&p, vtk.render(m, energy.time)).map_err(io_err(&p))?;
            }
            self.written.push(energy.step);
        }
        if last {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), OutputError> {
        let path = self.dir.join(ENERGY_FILE);
        self.energies.flush().map_err(io_err(&path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn record(step: usize) -> EnergyRecord {
        EnergyRecord {
            step,
            time: step as f64 * 0.1,
            exchange: 1.0 / 3.0,
            interaction: -0.25,
            zeeman: 1e-300,
            total: 1.0 / 3.0 - 0.25 + 1e-300,
            dissipation: 0.1 * step as f64,
        }
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let m: Vec<Point> = (0..50)
            .map(|_| Point::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() * 1e-9, -rng.gen::<f64>()).normalize())
            .collect();
        let back = parse_snapshot(&snapshot_text(&m), "mem").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_snapshots() {
        assert!(parse_snapshot("nodal-field 3 2\n1 2 3\n", "x").is_err());
        assert!(parse_snapshot("field 3 1\n1 2 3\n", "x").is_err());
        assert!(parse_snapshot("nodal-field 3 1\n1 2\n", "x").is_err());
    }

    #[test]
    fn cadence_and_final_step() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = TrajectoryWriter::create(dir.path(), 10).unwrap();
        let m = vec![Point::z(); 4];
        for s in 0..=25 {
            w.record(&record(s), &m, s == 25).unwrap();
        }
        assert_eq!(w.snapshot_steps(), &[0, 10, 20, 25]);
        let e = read_energies(dir.path().join(ENERGY_FILE)).unwrap();
        assert_eq!(e.len(), 26);
        assert_eq!(e[7], record(7));
    }

    #[test]
    fn two_step_run_with_cadence_one() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = TrajectoryWriter::create(dir.path(), 1).unwrap();
        for s in 0..=2 {
            w.record(&record(s), &[Point::x()], s == 2).unwrap();
        }
        let snaps = fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("m_")).count();
        assert_eq!(snaps, 3);
        assert_eq!(read_energies(dir.path().join(ENERGY_FILE)).unwrap().len(), 3);
        assert_eq!(read_snapshot(dir.path().join(snapshot_name(2))).unwrap(), vec![Point::x()]);
    }
}
