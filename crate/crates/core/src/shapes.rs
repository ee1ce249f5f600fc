//! Small structured meshes used by tests, examples and the CLI oracles.

use std::collections::HashMap;

use crate::mesh::{Region, TetMesh};
use crate::Point;

/// Box `[lo, hi]` split into `n[0] x n[1] x n[2]` cubes, each cut into six
/// tetrahedra around its main diagonal (Kuhn/Freudenthal subdivision).
///
/// All Kuhn tetrahedra have dihedral angles of 45, 60 or 90 degrees, so the
/// mesh satisfies the angle condition when the cells are cubes.
pub fn kuhn_box(n: [usize; 3], lo: Point, hi: Point, region: Region) -> TetMesh {
    let idx = |i: usize, j: usize, k: usize| i + (n[0] + 1) * (j + (n[1] + 1) * k);
    let mut nodes = Vec::with_capacity((n[0] + 1) * (n[1] + 1) * (n[2] + 1));
    for k in 0..=n[2] {
        for j in 0..=n[1] {
            for i in 0..=n[0] {
                let s = Point::new(i as f64 / n[0] as f64, j as f64 / n[1] as f64, k as f64 / n[2] as f64);
                nodes.push(lo + (hi - lo).component_mul(&s));
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [idx(c[0], c[1], c[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = idx(c[0], c[1], c[2]);
                    }
                    orient(&nodes, &mut tet);
                    tets.push(tet);
                }
            }
        }
    }
    TetMesh::new(nodes, tets, region).expect("structured box mesh is valid")
}

/// The unit cube as six Kuhn tetrahedra.
pub fn unit_cube_kuhn() -> TetMesh {
    kuhn_box([1, 1, 1], Point::zeros(), Point::repeat(1.0), Region::Micro)
}

/// The reference tetrahedron with vertices 0, e1, e2, e3.
pub fn reference_tet() -> TetMesh {
    let nodes = vec![Point::zeros(), Point::x(), Point::y(), Point::z()];
    TetMesh::new(nodes, vec![[0, 1, 2, 3]], Region::Micro).expect("reference tet is valid")
}

/// A regular tetrahedron with unit edge length.
pub fn regular_tet() -> TetMesh {
    let s = 1.0 / 8f64.sqrt();
    let nodes = vec![
        Point::new(s, s, s),
        Point::new(s, -s, -s),
        Point::new(-s, s, -s),
        Point::new(-s, -s, s),
    ];
    let mut tet = [0, 1, 2, 3];
    orient(&nodes, &mut tet);
    TetMesh::new(nodes, vec![tet], Region::Micro).expect("regular tet is valid")
}

/// Triangulated sphere obtained by `level` midpoint refinements of an
/// icosahedron; `20 * 4^level` faces oriented counter-clockwise seen from outside.
pub fn icosphere(level: usize, radius: f64) -> (Vec<Point>, Vec<[usize; 3]>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut points: Vec<Point> = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, points: &mut Vec<Point>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                points.push(((points[a] + points[b]) / 2.0).normalize());
                points.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * faces.len());
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut points);
            let bc = mid(b, c, &mut points);
            let ca = mid(c, a, &mut points);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for f in &mut faces {
        let n = (points[f[1]] - points[f[0]]).cross(&(points[f[2]] - points[f[0]]));
        if n.dot(&points[f[0]]) < 0.0 {
            f.swap(1, 2);
        }
    }
    for x in &mut points {
        *x *= radius;
    }
    (points, faces)
}

/// Ball of the given radius centred at the origin: an icosphere of the given
/// refinement level, extruded into `layers` equidistant radial shells. The
/// innermost shell is coned to the centre; prisms between shells are split
/// consistently using the global vertex order.
pub fn ball(level: usize, layers: usize, radius: f64) -> TetMesh {
    ball_with_region(level, layers, radius, Region::Micro)
}

pub fn ball_with_region(level: usize, layers: usize, radius: f64, region: Region) -> TetMesh {
    assert!(layers >= 1);
    let (sphere, faces) = icosphere(level, 1.0);
    let nv = sphere.len();
    let mut nodes = vec![Point::zeros()];
    for l in 1..=layers {
        let r = radius * l as f64 / layers as f64;
        nodes.extend(sphere.iter().map(|p| p * r));
    }
    let shell = |l: usize, i: usize| 1 + (l - 1) * nv + i;
    let mut tets = Vec::with_capacity(faces.len() * (3 * layers - 2));
    for f in &faces {
        let mut tet = [0, shell(1, f[0]), shell(1, f[1]), shell(1, f[2])];
        orient(&nodes, &mut tet);
        tets.push(tet);
    }
    for l in 1..layers {
        for f in &faces {
            let mut s = *f;
            s.sort_unstable();
            let inner = |i: usize| shell(l, s[i]);
            let outer = |i: usize| shell(l + 1, s[i]);
            for mut tet in [
                [inner(0), inner(1), inner(2), outer(0)],
                [inner(1), inner(2), outer(0), outer(1)],
                [inner(2), outer(0), outer(1), outer(2)],
            ] {
                orient(&nodes, &mut tet);
                tets.push(tet);
            }
        }
    }
    TetMesh::new(nodes, tets, region).expect("ball mesh is valid")
}

/// Copy of `mesh` shifted by `offset` and tagged with `region`.
pub fn translated(mesh: &TetMesh, offset: Point, region: Region) -> TetMesh {
    let nodes = mesh.nodes().iter().map(|p| p + offset).collect();
    TetMesh::new(nodes, mesh.tets().to_vec(), region).expect("translation preserves validity")
}

fn orient(nodes: &[Point], tet: &mut [usize; 4]) {
    let p = |i: usize| nodes[tet[i]];
    let vol = (p(1) - p(0)).cross(&(p(2) - p(0))).dot(&(p(3) - p(0)));
    if vol < 0.0 {
        tet.swap(2, 3);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{boundary_faces, check_angle_condition};

    #[test]
    fn unit_cube_counts() {
        let mesh = unit_cube_kuhn();
        assert_eq!(mesh.n_nodes(), 8);
        assert_eq!(mesh.n_tets(), 6);
        assert!((mesh.total_volume() - 1.0).abs() < 1e-14);
        let s = boundary_faces(&mesh);
        assert_eq!(s.n_faces(), 12);
        assert!((s.total_area() - 6.0).abs() < 1e-13);
        assert!(s.closure_residual().norm() < 1e-12);
    }

    #[test]
    fn kuhn_box_passes_angle_condition() {
        let mesh = kuhn_box([3, 2, 2], Point::zeros(), Point::new(3.0, 2.0, 2.0), Region::Micro);
        assert!(check_angle_condition(&mesh).is_empty());
        assert!((mesh.total_volume() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn regular_tet_passes_angle_condition() {
        let mesh = regular_tet();
        assert!(check_angle_condition(&mesh).is_empty());
        for (a, b) in [(0, 1), (1, 2), (2, 3), (0, 3)] {
            assert!(((mesh.nodes()[a] - mesh.nodes()[b]).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn icosphere_counts() {
        let (pts, faces) = icosphere(2, 1.0);
        assert_eq!(faces.len(), 320);
        assert_eq!(pts.len(), 162);
    }

    #[test]
    fn ball_is_closed_and_sized() {
        let mesh = ball(2, 2, 1.0);
        assert_eq!(mesh.n_tets(), 1280);
        assert_eq!(mesh.n_nodes(), 325);
        let s = boundary_faces(&mesh);
        assert_eq!(s.n_faces(), 320);
        assert!(s.closure_residual().norm() < 1e-12);
        // inscribed polyhedron: slightly smaller than the sphere
        let v = mesh.total_volume();
        assert!(v < 4.0 / 3.0 * std::f64::consts::PI && v > 3.9);
    }
}
