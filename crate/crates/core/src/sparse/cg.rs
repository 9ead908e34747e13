use super::csr::{dot, norm2, CsrMatrix};

pub const DEFAULT_CG_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Stops once `|b - A x| / |b| <= tol` (checked on the true residual) or
/// after `max_iter` iterations; `max_iter = None` means `10 n`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: Option<usize>) -> (Vec<f64>, SolveReport) {
    cg_solve_from(a, b, vec![0.0; b.len()], tol, max_iter)
}

/// As [`cg_solve`], starting from `x`.
pub fn cg_solve_from(a: &CsrMatrix, b: &[f64], mut x: Vec<f64>, tol: f64, max_iter: Option<usize>) -> (Vec<f64>, SolveReport) {
    let n = a.n();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let max_iter = max_iter.unwrap_or(10 * n.max(1));
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return (vec![0.0; n], SolveReport { iterations: 0, final_relative_residual: 0.0, converged: true });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();

    let true_residual = |x: &[f64], r: &mut Vec<f64>| {
        a.matvec_into(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
    };
    let mut r = vec![0.0; n];
    true_residual(&x, &mut r);
    let mut rel = norm2(&r) / bnorm;
    if rel <= tol {
        return (x, SolveReport { iterations: 0, final_relative_residual: rel, converged: true });
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm2(&r) / bnorm;
        if rel <= tol {
            // confirm on the true residual; restart from it if recursion drifted
            true_residual(&x, &mut r);
            rel = norm2(&r) / bnorm;
            if rel <= tol {
                return (x, SolveReport { iterations, final_relative_residual: rel, converged: true });
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    true_residual(&x, &mut r);
    rel = norm2(&r) / bnorm;
    (x, SolveReport { iterations, final_relative_residual: rel, converged: rel <= tol })
}
