//! Tetrahedral volume meshes and their oriented boundary triangulations.
//!
//! Meshes are read from a small plain-text format:
//!
//! ```text
//! # comment
//! nodes 4
//! 0 0 0
//! 1 0 0
//! 0 1 0
//! 0 0 1
//! tets 1
//! 0 1 2 3
//! ```
//!
//! Node indices are 0-based. Every tetrahedron must have positive signed volume
//! `det[p1-p0, p2-p0, p3-p0] / 6 > 0`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::Path;

use thiserror::Error;

use crate::Point;

/// Nodes closer than this are reported as duplicates.
pub const DUPLICATE_NODE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("tet {tet} references node {node}, but the mesh has {nodes} nodes")]
    IndexOutOfRange { tet: usize, node: usize, nodes: usize },
    #[error("tet {tet} has non-positive signed volume {volume:e}")]
    NonPositiveVolume { tet: usize, volume: f64 },
    #[error("nodes {first} and {second} coincide")]
    DuplicateNode { first: usize, second: usize },
    #[error("mesh is not conforming: {0}")]
    NonConforming(String),
    #[error("mesh contains no tetrahedra")]
    Empty,
}

/// Which body a mesh discretizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// The microscopic body where LLG is solved.
    Micro,
    /// The macroscopic body described by a material law.
    Macro,
}

/// A validated, conforming tetrahedral mesh with cached element geometry.
#[derive(Clone, Debug)]
pub struct TetMesh {
    nodes: Vec<Point>,
    tets: Vec<[usize; 4]>,
    region: Region,
    volumes: Vec<f64>,
    gradients: Vec<[Point; 4]>,
    diameters: Vec<f64>,
}

fn signed_volume(p: [&Point; 4]) -> f64 {
    (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0])) / 6.0
}

impl TetMesh {
    /// Builds a mesh and checks every invariant: index range, positive
    /// volumes, distinct nodes and combinatorial conformity.
    pub fn new(nodes: Vec<Point>, tets: Vec<[usize; 4]>, region: Region) -> Result<Self, MeshError> {
        if tets.is_empty() {
            return Err(MeshError::Empty);
        }
        for (t, tet) in tets.iter().enumerate() {
            for &node in tet {
                if node >= nodes.len() {
                    return Err(MeshError::IndexOutOfRange { tet: t, node, nodes: nodes.len() });
                }
            }
        }
        let mut volumes = Vec::with_capacity(tets.len());
        let mut gradients = Vec::with_capacity(tets.len());
        let mut diameters = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter().enumerate() {
            let p = [&nodes[tet[0]], &nodes[tet[1]], &nodes[tet[2]], &nodes[tet[3]]];
            let volume = signed_volume(p);
            if !(volume > 0.0) {
                return Err(MeshError::NonPositiveVolume { tet: t, volume });
            }
            volumes.push(volume);
            gradients.push(barycentric_gradients(p, volume));
            let mut diam: f64 = 0.0;
            for a in 0..4 {
                for b in a + 1..4 {
                    diam = diam.max((p[a] - p[b]).norm());
                }
            }
            diameters.push(diam);
        }
        check_duplicates(&nodes)?;
        check_conformity(&tets)?;
        Ok(Self { nodes, tets, region, volumes, gradients, diameters })
    }

    /// Parses the plain-text mesh format.
    pub fn parse(text: &str, region: Region) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let n_nodes = parse_header(lines.next(), "nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (line, content) = lines.next().ok_or(MeshError::Parse {
                line: text.lines().count(),
                message: format!("expected {n_nodes} node lines"),
            })?;
            let xs = parse_numbers::<f64>(line, content, 3)?;
            nodes.push(Point::new(xs[0], xs[1], xs[2]));
        }
        let n_tets = parse_header(lines.next(), "tets")?;
        let mut tets = Vec::with_capacity(n_tets);
        for _ in 0..n_tets {
            let (line, content) = lines.next().ok_or(MeshError::Parse {
                line: text.lines().count(),
                message: format!("expected {n_tets} tet lines"),
            })?;
            let ids = parse_numbers::<usize>(line, content, 4)?;
            tets.push([ids[0], ids[1], ids[2], ids[3]]);
        }
        if let Some((line, _)) = lines.next() {
            return Err(MeshError::Parse { line, message: "unexpected trailing content".into() });
        }
        Self::new(nodes, tets, region)
    }

    pub fn load(path: impl AsRef<Path>, region: Region) -> Result<Self, MeshError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| MeshError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, region)
    }

    /// Serializes to the plain-text format; coordinates round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
        }
        let _ = writeln!(out, "tets {}", self.tets.len());
        for t in &self.tets {
            let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
        }
        out
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn volume(&self, t: usize) -> f64 {
        self.volumes[t]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Constant gradients of the four barycentric coordinates of tet `t`.
    pub fn gradients(&self, t: usize) -> &[Point; 4] {
        &self.gradients[t]
    }

    pub fn centroid(&self, t: usize) -> Point {
        self.tets[t].iter().map(|&i| self.nodes[i]).sum::<Point>() / 4.0
    }

    /// Largest element diameter.
    pub fn mesh_size(&self) -> f64 {
        self.diameters.iter().cloned().fold(0.0, f64::max)
    }

    /// Ratio of largest to smallest element diameter (diagnostic only).
    pub fn quasi_uniformity_ratio(&self) -> f64 {
        let min = self.diameters.iter().cloned().fold(f64::INFINITY, f64::min);
        self.mesh_size() / min
    }

    /// Lumped nodal volumes, `|T|/4` summed over the patch of each node.
    pub fn nodal_volumes(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        for (tet, vol) in self.tets.iter().zip(&self.volumes) {
            for &i in tet {
                w[i] += vol / 4.0;
            }
        }
        w
    }

    /// Hash of the exact node coordinates and connectivity.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.nodes.len().hash(&mut h);
        for p in &self.nodes {
            p.x.to_bits().hash(&mut h);
            p.y.to_bits().hash(&mut h);
            p.z.to_bits().hash(&mut h);
        }
        self.tets.hash(&mut h);
        h.finish()
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        for p in &self.nodes {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

fn barycentric_gradients(p: [&Point; 4], volume: f64) -> [Point; 4] {
    // grad(lambda_i) is the inward face normal of the opposite face scaled by area / (3 |T|).
    let mut g = [Point::zeros(); 4];
    for i in 0..4 {
        let o = [(i + 1) % 4, (i + 2) % 4, (i + 3) % 4];
        let n = (p[o[1]] - p[o[0]]).cross(&(p[o[2]] - p[o[0]]));
        let s = if n.dot(&(p[i] - p[o[0]])) > 0.0 { 1.0 } else { -1.0 };
        g[i] = n * (s / (6.0 * volume));
    }
    g
}

fn parse_header(entry: Option<(usize, &str)>, keyword: &str) -> Result<usize, MeshError> {
    let (line, content) = entry.ok_or(MeshError::Parse { line: 0, message: format!("missing `{keyword}` header") })?;
    let mut it = content.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(k), Some(n), None) if k == keyword => n.parse().map_err(|_| MeshError::Parse {
            line,
            message: format!("invalid count `{n}`"),
        }),
        _ => Err(MeshError::Parse { line, message: format!("expected `{keyword} <count>`") }),
    }
}

fn parse_numbers<T: std::str::FromStr>(line: usize, content: &str, count: usize) -> Result<Vec<T>, MeshError> {
    let values: Vec<T> = content
        .split_whitespace()
        .map(|tok| tok.parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| MeshError::Parse { line, message: format!("cannot parse `{content}`") })?;
    if values.len() != count {
        return Err(MeshError::Parse { line, message: format!("expected {count} values, found {}", values.len()) });
    }
    Ok(values)
}

fn check_duplicates(nodes: &[Point]) -> Result<(), MeshError> {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a].x.total_cmp(&nodes[b].x));
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if nodes[b].x - nodes[a].x > DUPLICATE_NODE_TOL {
                break;
            }
            if (nodes[a] - nodes[b]).norm() <= DUPLICATE_NODE_TOL {
                return Err(MeshError::DuplicateNode { first: a.min(b), second: a.max(b) });
            }
        }
    }
    Ok(())
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

fn face_table(tets: &[[usize; 4]]) -> HashMap<[usize; 3], Vec<(usize, usize)>> {
    let mut faces: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::with_capacity(2 * tets.len());
    for (t, tet) in tets.iter().enumerate() {
        for (opp, lf) in LOCAL_FACES.iter().enumerate() {
            let key = sorted3([tet[lf[0]], tet[lf[1]], tet[lf[2]]]);
            faces.entry(key).or_default().push((t, opp));
        }
    }
    faces
}

/// Combinatorial conformity: no face is shared by more than two tets, no tet
/// repeats a node, and the boundary triangulation is a closed edge-manifold.
fn check_conformity(tets: &[[usize; 4]]) -> Result<(), MeshError> {
    for (t, tet) in tets.iter().enumerate() {
        let mut s = *tet;
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(MeshError::NonConforming(format!("tet {t} repeats a node")));
        }
    }
    let faces = face_table(tets);
    let mut edge_count: HashMap<[usize; 2], usize> = HashMap::new();
    for (key, owners) in &faces {
        if owners.len() > 2 {
            return Err(MeshError::NonConforming(format!("face {key:?} is shared by {} tets", owners.len())));
        }
        if owners.len() == 1 {
            for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                *edge_count.entry([key[a], key[b]]).or_default() += 1;
            }
        }
    }
    let mut bad: Vec<_> = edge_count.iter().filter(|(_, &c)| c != 2).map(|(e, _)| *e).collect();
    if !bad.is_empty() {
        bad.sort_unstable();
        return Err(MeshError::NonConforming(format!(
            "boundary edge {:?} is shared by {} boundary faces",
            bad[0], edge_count[&bad[0]]
        )));
    }
    Ok(())
}

/// Oriented boundary triangulation of a [`TetMesh`].
///
/// Faces keep the node numbering of the parent mesh; `nodes` lists the
/// boundary nodes in increasing order and `local_faces` indexes into it.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub faces: Vec<[usize; 3]>,
    pub local_faces: Vec<[usize; 3]>,
    pub nodes: Vec<usize>,
    pub points: Vec<Point>,
    pub outward_unit_normals: Vec<Point>,
    pub face_areas: Vec<f64>,
    pub parent_tet: Vec<usize>,
    local_index: HashMap<usize, usize>,
}

impl SurfaceMesh {
    /// Extracts the faces owned by exactly one tet, oriented so that
    /// `(p1 - p0) x (p2 - p0)` points out of the mesh.
    pub fn extract(mesh: &TetMesh) -> Self {
        let table = face_table(mesh.tets());
        let mut owned: Vec<(usize, usize)> =
            table.values().filter(|o| o.len() == 1).map(|o| o[0]).collect();
        owned.sort_unstable();

        let nodes = mesh.nodes();
        let mut faces = Vec::with_capacity(owned.len());
        let mut normals = Vec::with_capacity(owned.len());
        let mut areas = Vec::with_capacity(owned.len());
        let mut parent = Vec::with_capacity(owned.len());
        for (t, opp) in owned {
            let tet = mesh.tets()[t];
            let lf = LOCAL_FACES[opp];
            let mut f = [tet[lf[0]], tet[lf[1]], tet[lf[2]]];
            let mut n = (nodes[f[1]] - nodes[f[0]]).cross(&(nodes[f[2]] - nodes[f[0]]));
            if n.dot(&(nodes[f[0]] - nodes[tet[opp]])) < 0.0 {
                f.swap(1, 2);
                n = -n;
            }
            let norm = n.norm();
            faces.push(f);
            normals.push(n / norm);
            areas.push(0.5 * norm);
            parent.push(t);
        }

        let mut bnodes: Vec<usize> = faces.iter().flatten().cloned().collect();
        bnodes.sort_unstable();
        bnodes.dedup();
        let local_index: HashMap<usize, usize> = bnodes.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let local_faces = faces.iter().map(|f| [local_index[&f[0]], local_index[&f[1]], local_index[&f[2]]]).collect();
        let points = bnodes.iter().map(|&g| nodes[g]).collect();
        Self {
            faces,
            local_faces,
            nodes: bnodes,
            points,
            outward_unit_normals: normals,
            face_areas: areas,
            parent_tet: parent,
            local_index,
        }
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Local boundary index of a parent-mesh node, if it lies on the boundary.
    pub fn local_of(&self, global: usize) -> Option<usize> {
        self.local_index.get(&global).copied()
    }

    pub fn vertices(&self, f: usize) -> [Point; 3] {
        let lf = self.local_faces[f];
        [self.points[lf[0]], self.points[lf[1]], self.points[lf[2]]]
    }

    pub fn centroid(&self, f: usize) -> Point {
        let v = self.vertices(f);
        (v[0] + v[1] + v[2]) / 3.0
    }

    pub fn face_diameter(&self, f: usize) -> f64 {
        let v = self.vertices(f);
        (v[0] - v[1]).norm().max((v[1] - v[2]).norm()).max((v[0] - v[2]).norm())
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// `sum_F |F| nu_F`, which vanishes for a closed surface.
    pub fn closure_residual(&self) -> Point {
        self.face_areas.iter().zip(&self.outward_unit_normals).map(|(a, n)| n * *a).sum()
    }

    /// Sum of adjacent face areas for every boundary node.
    pub fn patch_areas(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        for (lf, a) in self.local_faces.iter().zip(&self.face_areas) {
            for &i in lf {
                w[i] += a;
            }
        }
        w
    }
}

/// Same as [`SurfaceMesh::extract`].
pub fn boundary_faces(mesh: &TetMesh) -> SurfaceMesh {
    SurfaceMesh::extract(mesh)
}

/// Unordered node pairs `(i, j)`, `i < j`, whose P1 stiffness coupling
/// `<grad eta_i, grad eta_j>` is positive, i.e. which violate the angle
/// condition. The threshold is `1e-12` relative to the largest diagonal entry.
pub fn check_angle_condition(mesh: &TetMesh) -> Vec<(usize, usize)> {
    let mut offdiag: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut diag = vec![0.0; mesh.n_nodes()];
    for (t, tet) in mesh.tets().iter().enumerate() {
        let g = mesh.gradients(t);
        let vol = mesh.volume(t);
        for a in 0..4 {
            diag[tet[a]] += vol * g[a].dot(&g[a]);
            for b in a + 1..4 {
                let key = (tet[a].min(tet[b]), tet[a].max(tet[b]));
                *offdiag.entry(key).or_default() += vol * g[a].dot(&g[b]);
            }
        }
    }
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    offdiag.into_iter().filter(|(_, v)| *v > 1e-12 * scale).map(|(k, _)| k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE_TET: &str = "nodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ntets 1\n0 1 2 3\n";

    #[test]
    fn reference_tet_loads() {
        let mesh = TetMesh::parse(REFERENCE_TET, Region::Micro).unwrap();
        assert_eq!(mesh.n_tets(), 1);
        assert!((mesh.total_volume() - 1.0 / 6.0).abs() < 1e-15);
        // gradients of barycentric coordinates sum to zero
        let s: Point = mesh.gradients(0).iter().sum();
        assert!(s.norm() < 1e-14);
        assert!((mesh.gradients(0)[1] - Point::x()).norm() < 1e-14);
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# header\n\nnodes 4 # four\n0 0 0\n1 0 0\n\n0 1 0\n0 0 1\ntets 1\n0 1 2 3 # the tet\n";
        assert!(TetMesh::parse(text, Region::Micro).is_ok());
    }

    #[test]
    fn out_of_range_index() {
        let text = "nodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ntets 1\n0 1 2 9\n";
        match TetMesh::parse(text, Region::Micro) {
            Err(MeshError::IndexOutOfRange { tet: 0, node: 9, nodes: 4 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "nodes 2\n0 0 0\n1 x 0\ntets 0\n";
        match TetMesh::parse(text, Region::Micro) {
            Err(MeshError::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverted_tet_rejected() {
        let text = "nodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ntets 1\n0 2 1 3\n";
        match TetMesh::parse(text, Region::Micro) {
            Err(MeshError::NonPositiveVolume { tet: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_node_rejected() {
        let text = "nodes 5\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n1 0 0\ntets 1\n0 1 2 3\n";
        assert!(matches!(
            TetMesh::parse(text, Region::Micro),
            Err(MeshError::DuplicateNode { first: 1, second: 4 })
        ));
    }

    #[test]
    fn face_shared_by_three_tets_rejected() {
        let nodes = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
            Point::new(0.0, 0.0, -1.0),
            Point::new(0.0, 0.0, 2.0),
        ];
        // tets 0 and 2 overlap and both sit on face (0,1,2)
        let tets = vec![[0, 1, 2, 3], [0, 2, 1, 4], [0, 1, 2, 5]];
        assert!(matches!(TetMesh::new(nodes, tets, Region::Micro), Err(MeshError::NonConforming(_))));
    }

    #[test]
    fn single_tet_boundary_closes() {
        let mesh = TetMesh::parse(REFERENCE_TET, Region::Micro).unwrap();
        let s = boundary_faces(&mesh);
        assert_eq!(s.n_faces(), 4);
        assert!(s.closure_residual().norm() < 1e-12);
        for (f, n) in s.outward_unit_normals.iter().enumerate() {
            assert!((n.norm() - 1.0).abs() < 1e-14);
            // outward: points away from the centroid
            assert!(n.dot(&(s.centroid(f) - mesh.centroid(0))) > 0.0);
        }
    }

    #[test]
    fn shared_face_is_interior() {
        let nodes = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
            Point::new(0.0, 0.0, -1.0),
        ];
        let mesh = TetMesh::new(nodes, vec![[0, 1, 2, 3], [0, 2, 1, 4]], Region::Micro).unwrap();
        let s = boundary_faces(&mesh);
        assert_eq!(s.n_faces(), 6);
        assert!(s.faces.iter().all(|f| sorted3(*f) != [0, 1, 2]));
        assert!(s.closure_residual().norm() < 1e-12);
    }

    #[test]
    fn extraction_is_idempotent() {
        let mesh = crate::shapes::unit_cube_kuhn();
        let a = boundary_faces(&mesh);
        let b = boundary_faces(&mesh);
        assert_eq!(a.faces, b.faces);
        assert_eq!(a.parent_tet, b.parent_tet);
    }

    #[test]
    fn text_round_trip() {
        let mesh = crate::shapes::ball(1, 2, 1.0);
        let again = TetMesh::parse(&mesh.to_text(), Region::Macro).unwrap();
        assert_eq!(mesh.fingerprint(), again.fingerprint());
        assert_eq!(again.region(), Region::Macro);
    }
}
