//! P1 mass and stiffness assembly and element-wise gradient operations.

use rayon::prelude::*;

use super::sparse::SparseOperator;
use crate::mesh::TetMesh;
use crate::multiscale::law::MaterialLaw;
use crate::Point;

/// Element stiffness `|T| grad(eta_a) . grad(eta_b)`.
pub fn element_stiffness(mesh: &TetMesh, t: usize) -> [[f64; 4]; 4] {
    let g = mesh.gradients(t);
    let vol = mesh.volume(t);
    let mut k = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            k[a][b] = vol * g[a].dot(&g[b]);
        }
    }
    k
}

/// Element mass `|T|/20 (1 + delta_ab)`.
pub fn element_mass(mesh: &TetMesh, t: usize) -> [[f64; 4]; 4] {
    let vol = mesh.volume(t);
    let mut m = [[vol / 20.0; 4]; 4];
    for (a, row) in m.iter_mut().enumerate() {
        row[a] = vol / 10.0;
    }
    m
}

fn assemble(mesh: &TetMesh, element: impl Fn(usize) -> [[f64; 4]; 4] + Sync + Send) -> SparseOperator {
    // element matrices in parallel, scatter in element order
    let local: Vec<[[f64; 4]; 4]> = (0..mesh.n_tets()).into_par_iter().map(element).collect();
    let mut triplets = Vec::with_capacity(16 * mesh.n_tets());
    for (tet, k) in mesh.tets().iter().zip(&local) {
        for a in 0..4 {
            for b in 0..4 {
                triplets.push((tet[a], tet[b], k[a][b]));
            }
        }
    }
    SparseOperator::from_triplets(mesh.n_nodes(), mesh.n_nodes(), triplets, true)
}

/// P1 stiffness matrix with an optional positive coefficient per element.
pub fn assemble_stiffness(mesh: &TetMesh, coeff: Option<&[f64]>) -> SparseOperator {
    if let Some(c) = coeff {
        assert_eq!(c.len(), mesh.n_tets());
        assert!(c.iter().all(|x| x.is_finite() && *x > 0.0), "stiffness coefficients must be positive");
    }
    assemble(mesh, |t| {
        let mut k = element_stiffness(mesh, t);
        if let Some(c) = coeff {
            k.iter_mut().flatten().for_each(|x| *x *= c[t]);
        }
        k
    })
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &TetMesh) -> SparseOperator {
    assemble(mesh, |t| element_mass(mesh, t))
}

/// Stiffness weighted by `1 + chi(|grad u|_T)` with the law frozen at `u`.
pub fn assemble_weighted_stiffness(mesh: &TetMesh, u: &[f64], law: &MaterialLaw) -> SparseOperator {
    let weights = material_weights(mesh, u, law);
    assemble_stiffness(mesh, Some(&weights))
}

/// Per-element weights `1 + chi(|grad u|_T)`.
pub fn material_weights(mesh: &TetMesh, u: &[f64], law: &MaterialLaw) -> Vec<f64> {
    element_gradients(mesh, u).iter().map(|g| 1.0 + law.chi(g.norm())).collect()
}

/// Constant gradient of a P1 function on every element.
pub fn element_gradients(mesh: &TetMesh, u: &[f64]) -> Vec<Point> {
    assert_eq!(u.len(), mesh.n_nodes());
    mesh.tets()
        .iter()
        .enumerate()
        .map(|(t, tet)| {
            let g = mesh.gradients(t);
            (0..4).map(|a| g[a] * u[tet[a]]).sum()
        })
        .collect()
}

/// Volume-weighted average of element vectors at the nodes.
pub fn lift_to_nodes(mesh: &TetMesh, element_values: &[Point]) -> Vec<Point> {
    assert_eq!(element_values.len(), mesh.n_tets());
    let mut acc = vec![Point::zeros(); mesh.n_nodes()];
    let mut w = vec![0.0; mesh.n_nodes()];
    for (t, tet) in mesh.tets().iter().enumerate() {
        let vol = mesh.volume(t);
        for &i in tet {
            acc[i] += element_values[t] * vol;
            w[i] += vol;
        }
    }
    acc.iter().zip(&w).map(|(a, w)| a / *w).collect()
}

/// Nodal lift of the element gradients of `u`.
pub fn nodal_gradient(mesh: &TetMesh, u: &[f64]) -> Vec<Point> {
    lift_to_nodes(mesh, &element_gradients(mesh, u))
}

/// Load vector `<m, grad eta_j>` for a P1 vector field `m` (exact).
pub fn divergence_load(mesh: &TetMesh, m: &[Point]) -> Vec<f64> {
    assert_eq!(m.len(), mesh.n_nodes());
    let mut b = vec![0.0; mesh.n_nodes()];
    for (t, tet) in mesh.tets().iter().enumerate() {
        let mean: Point = tet.iter().map(|&i| m[i]).sum::<Point>() / 4.0;
        let g = mesh.gradients(t);
        let vol = mesh.volume(t);
        for a in 0..4 {
            b[tet[a]] += vol * g[a].dot(&mean);
        }
    }
    b
}

/// `||v||^2` in the P1 mass inner product for a vector field.
pub fn mass_norm_sq(mass: &SparseOperator, v: &[Point]) -> f64 {
    mass_dot(mass, v, v)
}

/// `<a, b>` with the consistent mass matrix for vector fields.
pub fn mass_dot(mass: &SparseOperator, a: &[Point], b: &[Point]) -> f64 {
    let mb = mass.mul_vec3(b);
    a.iter().zip(&mb).map(|(x, y)| x.dot(y)).sum()
}

/// `sum_ij K_ij a_i . b_j`, e.g. `<grad a, grad b>` for the stiffness matrix.
pub fn stiffness_dot(stiffness: &SparseOperator, a: &[Point], b: &[Point]) -> f64 {
    mass_dot(stiffness, a, b)
}
