//! Krylov solvers with diagonal preconditioning and the constrained SPD
//! solve used for Neumann and Dirichlet problems.

use thiserror::Error;

use super::sparse::SparseOperator;

/// Default relative tolerance of all module-level linear solves.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { method: &'static str, iterations: usize, residual: f64 },
    #[error("{method} broke down at iteration {iteration}")]
    Breakdown { method: &'static str, iteration: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Side condition of [`solve_spd`].
#[derive(Clone, Debug)]
pub enum Constraint<'a> {
    None,
    /// Solution in the complement of the constants; the rhs is projected to
    /// be compatible and the result is shifted to `sum_i w_i u_i = 0`.
    ZeroMean { weights: &'a [f64] },
    /// Prescribed values on a node set.
    Dirichlet { nodes: &'a [usize], values: &'a [f64] },
}

/// Sequential dot product (fixed summation order).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn check_finite(v: &[f64], what: &'static str) -> Result<(), SolveError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SolveError::NonFinite(what))
    }
}

/// Preconditioned conjugate gradients for `A x = b` with `A` SPD on the
/// subspace kept invariant by `project`. Returns the solution and the
/// iteration count.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    project: impl Fn(&mut [f64]),
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), SolveError> {
    let n = b.len();
    check_finite(b, "right-hand side")?;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    project(&mut r);
    let bnorm = norm(&r);
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolveError::Breakdown { method: "PCG", iteration: it });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let res = norm(&r) / bnorm;
        if !res.is_finite() {
            return Err(SolveError::NonFinite("PCG residual"));
        }
        if res <= tol {
            project(&mut x);
            return Ok((x, it));
        }
        z.iter_mut().zip(r.iter().zip(inv_diag)).for_each(|(zi, (ri, di))| *zi = ri * di);
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(SolveError::NotConverged { method: "PCG", iterations: max_iter, residual: norm(&r) / bnorm })
}

/// Right-preconditioned BiCGStab for nonsymmetric systems. The relative
/// residual `|b - A x| / |b|` is checked against `tol`.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), SolveError> {
    let n = b.len();
    check_finite(b, "right-hand side")?;
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(SolveError::Breakdown { method: "BiCGStab", iteration: it });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            phat[i] = p[i] * inv_diag[i];
        }
        apply(&phat, &mut v);
        let r0v = dot(&r0, &v);
        if r0v == 0.0 {
            return Err(SolveError::Breakdown { method: "BiCGStab", iteration: it });
        }
        alpha = rho / r0v;
        // r becomes s
        axpy(-alpha, &v, &mut r);
        axpy(alpha, &phat, &mut x);
        let snorm = norm(&r) / bnorm;
        if !snorm.is_finite() {
            return Err(SolveError::NonFinite("BiCGStab residual"));
        }
        if snorm <= tol {
            return Ok((x, it));
        }
        for i in 0..n {
            shat[i] = r[i] * inv_diag[i];
        }
        apply(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(SolveError::Breakdown { method: "BiCGStab", iteration: it });
        }
        omega = dot(&t, &r) / tt;
        axpy(omega, &shat, &mut x);
        axpy(-omega, &t, &mut r);
        let res = norm(&r) / bnorm;
        if res <= tol {
            return Ok((x, it));
        }
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let res = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt() / bnorm;
    Err(SolveError::NotConverged { method: "BiCGStab", iterations: max_iter, residual: res })
}

fn inverse_diagonal(op: &SparseOperator) -> Vec<f64> {
    op.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect()
}

/// Solves `op u = rhs` under `constraint` with diagonally preconditioned CG,
/// relative tolerance `tol` and iteration cap `10 n`.
///
/// For [`Constraint::Dirichlet`] the rows of the prescribed nodes are
/// replaced by the constraint and the remaining rows are solved for the
/// free unknowns.
pub fn solve_spd(op: &SparseOperator, rhs: &[f64], constraint: Constraint<'_>, tol: f64) -> Result<Vec<f64>, SolveError> {
    let n = op.nrows();
    assert_eq!(rhs.len(), n);
    let cap = 10 * n.max(1);
    match constraint {
        Constraint::None => {
            let d = inverse_diagonal(op);
            Ok(pcg(|x, y| op.mul_into(x, y), &d, rhs, |_| {}, tol, cap)?.0)
        }
        Constraint::ZeroMean { weights } => {
            assert_eq!(weights.len(), n);
            let d = inverse_diagonal(op);
            let project = |v: &mut [f64]| {
                let mean = v.iter().sum::<f64>() / n as f64;
                v.iter_mut().for_each(|x| *x -= mean);
            };
            let (mut u, _) = pcg(|x, y| op.mul_into(x, y), &d, rhs, project, tol, cap)?;
            let wsum: f64 = weights.iter().sum();
            let shift = dot(weights, &u) / wsum;
            u.iter_mut().for_each(|x| *x -= shift);
            Ok(u)
        }
        Constraint::Dirichlet { nodes, values } => {
            assert_eq!(nodes.len(), values.len());
            let mut fixed = vec![false; n];
            let mut u0 = vec![0.0; n];
            for (&i, &v) in nodes.iter().zip(values) {
                fixed[i] = true;
                u0[i] = v;
            }
            // rhs for the free unknowns: rhs - A u0, masked
            let a_u0 = op.mul(&u0);
            let mut b: Vec<f64> = rhs.iter().zip(&a_u0).map(|(r, a)| r - a).collect();
            for (bi, &f) in b.iter_mut().zip(&fixed) {
                if f {
                    *bi = 0.0;
                }
            }
            let d: Vec<f64> = inverse_diagonal(op).into_iter().zip(&fixed).map(|(d, &f)| if f { 0.0 } else { d }).collect();
            let mask = |v: &mut [f64]| {
                for (vi, &f) in v.iter_mut().zip(&fixed) {
                    if f {
                        *vi = 0.0;
                    }
                }
            };
            let (w, _) = pcg(|x, y| op.mul_into(x, y), &d, &b, mask, tol, cap)?;
            Ok(w.iter().zip(&u0).map(|(a, b)| a + b).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> SparseOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseOperator::from_triplets(n, n, t, true)
    }

    #[test]
    fn identity_solve() {
        let id = SparseOperator::identity(4);
        let u = solve_spd(&id, &[1.0, 0.0, 0.0, 0.0], Constraint::None, 1e-12).unwrap();
        assert_eq!(u, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn cg_matches_dense() {
        let a = laplace_1d(20);
        let b: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let u = solve_spd(&a, &b, Constraint::None, 1e-12).unwrap();
        let exact = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for (x, y) in u.iter().zip(exact.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn bicgstab_nonsymmetric() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
                t.push((i + 1, i, -0.5));
            }
        }
        let a = SparseOperator::from_triplets(n, n, t, false);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let d = vec![0.25; n];
        let (x, _) = bicgstab(|x, y| a.mul_into(x, y), &d, &b, 1e-12, 200).unwrap();
        let r: Vec<f64> = a.mul(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) <= 1e-11 * norm(&b));
    }

    #[test]
    fn not_converged_reports_residual() {
        let a = laplace_1d(50);
        let b = vec![1.0; 50];
        let d = vec![0.5; 50];
        match pcg(|x, y| a.mul_into(x, y), &d, &b, |_| {}, 1e-14, 3) {
            Err(SolveError::NotConverged { iterations: 3, residual, .. }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
