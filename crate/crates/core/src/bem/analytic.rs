//! Closed-form potentials of flat triangles: the Newton potential of a
//! constant density and the double-layer potential of an affine density.

use crate::Point;

/// Flat triangle with cached edge frames. Vertices are counter-clockwise
/// seen from the side the unit normal points to.
#[derive(Clone, Debug)]
pub struct Triangle {
    pub v: [Point; 3],
    pub normal: Point,
    pub area: f64,
    pub diameter: f64,
    /// Unit tangent of edge `k` (from `v[k]` to `v[k+1]`).
    tangent: [Point; 3],
    /// Outward in-plane unit normal of edge `k`.
    edge_normal: [Point; 3],
    /// In-plane gradients of the barycentric coordinates.
    pub grad_lambda: [Point; 3],
}

impl Triangle {
    pub fn new(v: [Point; 3]) -> Self {
        let c = (v[1] - v[0]).cross(&(v[2] - v[0]));
        let area = 0.5 * c.norm();
        let normal = c / (2.0 * area);
        let mut tangent = [Point::zeros(); 3];
        let mut edge_normal = [Point::zeros(); 3];
        let mut grad_lambda = [Point::zeros(); 3];
        let mut diameter: f64 = 0.0;
        for k in 0..3 {
            let e = v[(k + 1) % 3] - v[k];
            diameter = diameter.max(e.norm());
            tangent[k] = e.normalize();
            edge_normal[k] = tangent[k].cross(&normal);
            // lambda_k grows towards v[k] from the opposite edge
            let opp = v[(k + 2) % 3] - v[(k + 1) % 3];
            grad_lambda[k] = normal.cross(&opp) / (2.0 * area);
        }
        Self { v, normal, area, diameter, tangent, edge_normal, grad_lambda }
    }

    pub fn centroid(&self) -> Point {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }

    /// Barycentric coordinates of the in-plane projection of `x`.
    pub fn barycentric(&self, x: &Point) -> [f64; 3] {
        let mut l = [0.0; 3];
        for k in 0..3 {
            l[k] = 1.0 / 3.0 + self.grad_lambda[k].dot(&(x - self.centroid()));
        }
        l
    }

    /// Euclidean distance from `x` to the closed triangle.
    pub fn distance(&self, x: &Point) -> f64 {
        (x - closest_point(x, &self.v)).norm()
    }

    fn edge_terms(&self, x: &Point) -> EdgeTerms {
        let d = (x - self.v[0]).dot(&self.normal);
        let x0 = x - self.normal * d;
        let scale = self.diameter;
        let mut t = EdgeTerms { d, p: [0.0; 3], log: [0.0; 3], s: [[0.0; 2]; 3], r: [[0.0; 2]; 3], r0sq: [0.0; 3] };
        for k in 0..3 {
            let a = self.v[k];
            let b = self.v[(k + 1) % 3];
            let p = (a - x0).dot(&self.edge_normal[k]);
            let sm = (a - x0).dot(&self.tangent[k]);
            let sp = (b - x0).dot(&self.tangent[k]);
            let r0sq = p * p + d * d;
            let r0 = r0sq.sqrt();
            t.p[k] = p;
            t.s[k] = [sm, sp];
            t.r[k] = [(sm * sm + r0sq).sqrt(), (sp * sp + r0sq).sqrt()];
            t.r0sq[k] = r0sq;
            // int_edge 1/R ds; left at zero on the edge line itself, where
            // every term using it carries a vanishing factor
            if r0 > 1e-14 * scale {
                t.log[k] = (sp / r0).asinh() - (sm / r0).asinh();
            }
        }
        t
    }

    /// `int_T 1/|x - y| dy`.
    pub fn newton_potential(&self, x: &Point) -> f64 {
        let e = self.edge_terms(x);
        let ad = e.d.abs();
        let mut sum = 0.0;
        for k in 0..3 {
            let p = e.p[k];
            sum += p * e.log[k];
            if ad > 0.0 && p != 0.0 {
                let [sm, sp] = e.s[k];
                let [rm, rp] = e.r[k];
                sum -= ad * ((p * sp / (e.r0sq[k] + ad * rp)).atan() - (p * sm / (e.r0sq[k] + ad * rm)).atan());
            }
        }
        sum
    }

    /// Signed solid angle `int_T (x - y).n / |x - y|^3 dy`; zero for points
    /// in the plane of the triangle.
    pub fn solid_angle(&self, x: &Point) -> f64 {
        let d = (x - self.v[0]).dot(&self.normal);
        if d.abs() <= 1e-13 * self.diameter {
            return 0.0;
        }
        let r = [self.v[0] - x, self.v[1] - x, self.v[2] - x];
        let n = [r[0].norm(), r[1].norm(), r[2].norm()];
        let det = r[0].dot(&r[1].cross(&r[2]));
        let den = n[0] * n[1] * n[2] + r[0].dot(&r[1]) * n[2] + r[0].dot(&r[2]) * n[1] + r[1].dot(&r[2]) * n[0];
        -2.0 * det.atan2(den)
    }

    /// Vertex weights `w_j` with
    /// `int_T (x - y).n / |x - y|^3 lambda_j(y) dy = w_j`.
    pub fn double_layer_weights(&self, x: &Point) -> [f64; 3] {
        let omega = self.solid_angle(x);
        if omega == 0.0 {
            return [0.0; 3];
        }
        let e = self.edge_terms(x);
        // int_T d (y - x0) / R^3 dy = -d sum_e m_e int_e 1/R ds
        let mut first: Point = Point::zeros();
        for k in 0..3 {
            first -= self.edge_normal[k] * e.log[k];
        }
        first *= e.d;
        let l = self.barycentric(x);
        [0, 1, 2].map(|j| l[j] * omega + self.grad_lambda[j].dot(&first))
    }
}

struct EdgeTerms {
    d: f64,
    p: [f64; 3],
    log: [f64; 3],
    s: [[f64; 2]; 3],
    r: [[f64; 2]; 3],
    r0sq: [f64; 3],
}

/// Closest point of the triangle `v` to `x`.
pub fn closest_point(x: &Point, v: &[Point; 3]) -> Point {
    let (a, b, c) = (v[0], v[1], v[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = x - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = x - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = x - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
