//! Legacy ASCII VTK export of nodal vector fields on tetrahedral meshes.

use std::fmt::Write as _;

use crate::mesh::TetMesh;
use crate::Point;

/// VTK cell type of a linear tetrahedron.
const VTK_TETRA: u8 = 10;

/// Caches the geometry block so each snapshot only appends point data.
pub struct VtkWriter {
    geometry: String,
}

impl VtkWriter {
    pub fn new(mesh: &TetMesh) -> Self {
        let mut g = String::new();
        let _ = writeln!(g, "DATASET UNSTRUCTURED_GRID");
        let _ = writeln!(g, "POINTS {} double", mesh.n_nodes());
        for p in mesh.nodes() {
            let _ = writeln!(g, "{:?} {:?} {:?}", p.x, p.y, p.z);
        }
        let _ = writeln!(g, "CELLS {} {}", mesh.n_tets(), 5 * mesh.n_tets());
        for t in mesh.tets() {
            let _ = writeln!(g, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
        }
        let _ = writeln!(g, "CELL_TYPES {}", mesh.n_tets());
        for _ in 0..mesh.n_tets() {
            let _ = writeln!(g, "{VTK_TETRA}");
        }
        Self { geometry: g }
    }

    pub fn render(&self, m: &[Point], time: f64) -> String {
        let mut s = String::with_capacity(self.geometry.len() + 64 * m.len() + 128);
        s.push_str("# vtk DataFile Version 3.0\n");
        let _ = writeln!(s, "magnetization t={time:?}");
        s.push_str("ASCII\n");
        s.push_str(&self.geometry);
        let _ = writeln!(s, "POINT_DATA {}", m.len());
        s.push_str("VECTORS m double\n");
        for v in m {
            let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
        }
        s
    }
}
