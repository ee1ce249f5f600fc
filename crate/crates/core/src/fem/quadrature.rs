//! Fixed quadrature rules on triangles and tetrahedra.

use crate::Point;

/// Barycentric points and weights (summing to one) of the 7-point, degree-5
/// symmetric triangle rule.
pub fn triangle7() -> [([f64; 3], f64); 7] {
    let s15 = 15f64.sqrt();
    let a1 = (9.0 - 2.0 * s15) / 21.0;
    let b1 = (6.0 + s15) / 21.0;
    let a2 = (9.0 + 2.0 * s15) / 21.0;
    let b2 = (6.0 - s15) / 21.0;
    let w1 = (155.0 + s15) / 1200.0;
    let w2 = (155.0 - s15) / 1200.0;
    let third = 1.0 / 3.0;
    [
        ([third, third, third], 9.0 / 40.0),
        ([a1, b1, b1], w1),
        ([b1, a1, b1], w1),
        ([b1, b1, a1], w1),
        ([a2, b2, b2], w2),
        ([b2, a2, b2], w2),
        ([b2, b2, a2], w2),
    ]
}

/// Barycentric points and weights (summing to one) of the 4-point, degree-2
/// tetrahedron rule.
pub fn tet4() -> [([f64; 4], f64); 4] {
    let a = (5.0 + 3.0 * 5f64.sqrt()) / 20.0;
    let b = (5.0 - 5f64.sqrt()) / 20.0;
    [([a, b, b, b], 0.25), ([b, a, b, b], 0.25), ([b, b, a, b], 0.25), ([b, b, b, a], 0.25)]
}

/// Physical points and weights (summing to the area) of [`triangle7`] on a triangle.
pub fn triangle_points(v: &[Point; 3], area: f64) -> [(Point, f64); 7] {
    triangle7().map(|(l, w)| (v[0] * l[0] + v[1] * l[1] + v[2] * l[2], w * area))
}
