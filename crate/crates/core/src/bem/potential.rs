//! Off-surface evaluation of single- and double-layer potentials.
//!
//! Each face is integrated with the 7-point rule; faces that are large
//! compared to their distance to the target are split recursively into four
//! until `diameter / distance < SUBDIVISION_RATIO`. At the depth cap the
//! remaining sub-triangle is integrated in closed form.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::analytic::Triangle;
use super::{triangles, BemError};
use crate::fem::quadrature::triangle7;
use crate::mesh::SurfaceMesh;
use crate::Point;

pub const SUBDIVISION_RATIO: f64 = 0.5;
pub const MAX_DEPTH: usize = 6;
/// Targets closer than this to the surface are rejected.
pub const ON_SURFACE_TOL: f64 = 1e-12;

type Bary = [[f64; 3]; 3];

fn to_physical(tri: &Triangle, b: &[f64; 3]) -> Point {
    tri.v[0] * b[0] + tri.v[1] * b[1] + tri.v[2] * b[2]
}

fn split(sub: &Bary) -> [Bary; 4] {
    let mid = |a: usize, b: usize| [0, 1, 2].map(|k| 0.5 * (sub[a][k] + sub[b][k]));
    let (m01, m12, m20) = (mid(0, 1), mid(1, 2), mid(2, 0));
    [[sub[0], m01, m20], [m01, sub[1], m12], [m20, m12, sub[2]], [m01, m12, m20]]
}

/// Adaptive integration of `kernel(y) * lambda_j(y)` over the parent triangle,
/// returned per parent vertex. `analytic` gives the sub-triangle vertex weights.
fn integrate(
    x: &Point,
    parent: &Triangle,
    sub: &Bary,
    depth: usize,
    kernel: &impl Fn(&Point) -> f64,
    analytic: &impl Fn(&Triangle) -> [f64; 3],
    out: &mut [f64; 3],
) {
    let verts = [to_physical(parent, &sub[0]), to_physical(parent, &sub[1]), to_physical(parent, &sub[2])];
    let diam = parent.diameter / f64::from(1u32 << depth);
    let dist = (x - super::analytic::closest_point(x, &verts)).norm();
    if diam < SUBDIVISION_RATIO * dist {
        let area = parent.area / 4f64.powi(depth as i32);
        for (l, w) in triangle7() {
            let b = [0, 1, 2].map(|j| l[0] * sub[0][j] + l[1] * sub[1][j] + l[2] * sub[2][j]);
            let k = w * area * kernel(&to_physical(parent, &b));
            for j in 0..3 {
                out[j] += k * b[j];
            }
        }
    } else if depth == MAX_DEPTH {
        let w = analytic(&Triangle::new(verts));
        for k in 0..3 {
            for j in 0..3 {
                out[j] += w[k] * sub[k][j];
            }
        }
    } else {
        for child in split(sub) {
            integrate(x, parent, &child, depth + 1, kernel, analytic, out);
        }
    }
}

const WHOLE: Bary = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn check_points(tris: &[Triangle], points: &[Point]) -> Result<(), BemError> {
    for (index, x) in points.iter().enumerate() {
        let distance = tris.iter().map(|t| t.distance(x)).fold(f64::INFINITY, f64::min);
        if distance < ON_SURFACE_TOL {
            return Err(BemError::PointOnSurface { index, distance });
        }
    }
    Ok(())
}

/// `(V phi)(x)` for a piecewise-constant density at each point.
pub fn eval_single_layer(surface: &SurfaceMesh, density: &[f64], points: &[Point]) -> Result<Vec<f64>, BemError> {
    if density.len() != surface.n_faces() {
        return Err(BemError::LengthMismatch { expected: surface.n_faces(), got: density.len() });
    }
    let tris = triangles(surface)?;
    check_points(&tris, points)?;
    if density.iter().all(|&d| d == 0.0) {
        return Ok(vec![0.0; points.len()]);
    }
    Ok(points
        .par_iter()
        .map(|x| {
            let mut sum = 0.0;
            for (tri, &phi) in tris.iter().zip(density) {
                if phi == 0.0 {
                    continue;
                }
                let mut acc = [0.0; 3];
                integrate(
                    x,
                    tri,
                    &WHOLE,
                    0,
                    &|y: &Point| 1.0 / (x - y).norm(),
                    &|t: &Triangle| [t.newton_potential(x) / 3.0; 3],
                    &mut acc,
                );
                sum += phi * (acc[0] + acc[1] + acc[2]);
            }
            sum / (4.0 * PI)
        })
        .collect())
}

/// `(K v)(x)` for a P1 trace `v` given at the local boundary nodes.
pub fn eval_double_layer(surface: &SurfaceMesh, trace: &[f64], points: &[Point]) -> Result<Vec<f64>, BemError> {
    if trace.len() != surface.n_nodes() {
        return Err(BemError::LengthMismatch { expected: surface.n_nodes(), got: trace.len() });
    }
    let tris = triangles(surface)?;
    check_points(&tris, points)?;
    if trace.iter().all(|&d| d == 0.0) {
        return Ok(vec![0.0; points.len()]);
    }
    Ok(points
        .par_iter()
        .map(|x| {
            let mut sum = 0.0;
            for (f, tri) in tris.iter().enumerate() {
                let lf = surface.local_faces[f];
                let vals = [trace[lf[0]], trace[lf[1]], trace[lf[2]]];
                if vals.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let n = tri.normal;
                let mut acc = [0.0; 3];
                integrate(
                    x,
                    tri,
                    &WHOLE,
                    0,
                    &|y: &Point| {
                        let r = x - y;
                        r.dot(&n) / r.norm().powi(3)
                    },
                    &|t: &Triangle| t.double_layer_weights(x),
                    &mut acc,
                );
                sum += acc[0] * vals[0] + acc[1] * vals[1] + acc[2] * vals[2];
            }
            sum / (4.0 * PI)
        })
        .collect())
}
