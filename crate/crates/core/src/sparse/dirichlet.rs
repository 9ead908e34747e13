use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::cg::{cg_solve_from, SolveReport};
use super::csr::CsrMatrix;

/// Symmetric elimination of a fixed set of constrained DOFs.
///
/// The reduced matrix keeps the free-free block, with constrained rows and
/// columns replaced by a unit diagonal. Constraint values may change between
/// solves; only the right-hand side has to be rebuilt.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    original: CsrMatrix,
    reduced: CsrMatrix,
    constrained: Vec<bool>,
    dofs: Vec<usize>,
}

impl ConstrainedSystem {
    pub fn new(a: CsrMatrix, dofs: &[usize]) -> Result<Self> {
        let n = a.n();
        let mut constrained = vec![false; n];
        for &d in dofs {
            if d >= n {
                return Err(Error::IndexOutOfRange { row: d, col: d, n });
            }
            constrained[d] = true;
        }
        let mut dofs = dofs.to_vec();
        dofs.sort_unstable();
        dofs.dedup();

        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(a.nnz());
        let mut values = Vec::with_capacity(a.nnz());
        for i in 0..n {
            if constrained[i] {
                col_idx.push(i);
                values.push(1.0);
            } else {
                for (j, v) in a.row(i) {
                    if !constrained[j] {
                        col_idx.push(j);
                        values.push(v);
                    }
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        let reduced = CsrMatrix::from_parts(n, row_ptr, col_idx, values);
        Ok(Self { original: a, reduced, constrained, dofs })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.reduced
    }

    pub fn original(&self) -> &CsrMatrix {
        &self.original
    }

    /// Constrained DOFs, sorted.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    /// Lifted right-hand side `b - A g` with constrained entries set to the
    /// prescribed values. `values[k]` belongs to `dofs()[k]`.
    pub fn rhs(&self, b: &[f64], values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.dofs.len());
        let mut g = vec![0.0; self.original.n()];
        for (&d, &v) in self.dofs.iter().zip(values) {
            g[d] = v;
        }
        let ag = self.original.matvec(&g);
        let mut out: Vec<f64> = b.iter().zip(&ag).map(|(bi, agi)| bi - agi).collect();
        for (&d, &v) in self.dofs.iter().zip(values) {
            out[d] = v;
        }
        out
    }

    /// Solves with CG from `guess` (zero when absent); constrained entries of
    /// the guess are overwritten with their values.
    pub fn solve(&self, b: &[f64], values: &[f64], guess: Option<&[f64]>, tol: f64, max_iter: Option<usize>) -> Result<(Vec<f64>, SolveReport)> {
        let rhs = self.rhs(b, values);
        let mut x0 = guess.map_or_else(|| vec![0.0; rhs.len()], <[f64]>::to_vec);
        for (&d, &v) in self.dofs.iter().zip(values) {
            x0[d] = v;
        }
        let (x, rep) = cg_solve_from(&self.reduced, &rhs, x0, tol, max_iter);
        if !rep.converged {
            return Err(Error::CgNotConverged { iterations: rep.iterations, residual: rep.final_relative_residual });
        }
        Ok((x, rep))
    }
}

/// One-shot symmetric elimination of `constraints` from `A x = b`.
pub fn apply_dirichlet(a: &CsrMatrix, b: &[f64], constraints: &BTreeMap<usize, f64>) -> Result<(CsrMatrix, Vec<f64>)> {
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: b.len() });
    }
    let dofs: Vec<usize> = constraints.keys().copied().collect();
    let values: Vec<f64> = constraints.values().copied().collect();
    let sys = ConstrainedSystem::new(a.clone(), &dofs)?;
    let rhs = sys.rhs(b, &values);
    Ok((sys.reduced, rhs))
}
