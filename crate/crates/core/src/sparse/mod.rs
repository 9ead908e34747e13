//! Sparse symmetric linear algebra: CSR storage, Jacobi-preconditioned CG
//! and symmetric Dirichlet elimination.

use std::sync::atomic::{AtomicBool, Ordering};

mod cg;
mod csr;
mod dirichlet;

pub use cg::{cg_solve, cg_solve_from, SolveReport, DEFAULT_CG_TOL};
pub use csr::{assemble_csr, dot, norm2, CsrMatrix};
pub use dirichlet::{apply_dirichlet, ConstrainedSystem};

static PARALLEL: AtomicBool = AtomicBool::new(false);

/// Enables row-parallel matrix-vector products. Off by default; results are
/// bitwise identical either way.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// Sets up `n` worker threads for matrix-vector products; `n <= 1` keeps
/// the sequential path. The pool can only be sized once per process.
pub fn set_threads(n: usize) {
    if n > 1 {
        // a second call keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    set_parallel(n > 1);
}
