use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Builds an `n x n` matrix from `(row, col, value)` triplets, summing duplicates.
///
/// Duplicates are summed in a canonical order (sorted by value), so the
/// result does not depend on the order of the triplets.
pub fn assemble_csr(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<CsrMatrix> {
    if let Some(&(row, col, _)) = triplets.iter().find(|(r, c, _)| *r >= n || *c >= n) {
        return Err(Error::IndexOutOfRange { row, col, n });
    }
    triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    let mut row_ptr = vec![0; n + 1];
    let mut col_idx = Vec::with_capacity(triplets.len() / 4);
    let mut values: Vec<f64> = Vec::with_capacity(triplets.len() / 4);
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in triplets {
        if last == Some((r, c)) {
            *values.last_mut().unwrap() += v;
        } else {
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    Ok(CsrMatrix { n, row_ptr, col_idx, values })
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::identity(d.len());
        m.values.copy_from_slice(d);
        m
    }

    pub(crate) fn from_parts(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        debug_assert_eq!(col_idx.len(), values.len());
        Self { n, row_ptr, col_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().zip(&self.values[r]).map(|(&j, &a)| a * x[j]).sum()
    }

    /// `y = A x`. Rows are split across threads when parallel mode is enabled;
    /// each row is still summed sequentially, so results are bitwise identical.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        if super::parallel_enabled() && self.n > 4096 {
            use rayon::prelude::*;
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `a * self + b * other`; both must share a dimension.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> Result<CsrMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        let mut row_ptr = vec![0; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        for i in 0..self.n {
            let mut p = self.row(i).peekable();
            let mut q = other.row(i).peekable();
            loop {
                let (c, v) = match (p.peek(), q.peek()) {
                    (Some(&(cp, vp)), Some(&(cq, vq))) if cp == cq => {
                        p.next();
                        q.next();
                        (cp, a * vp + b * vq)
                    }
                    (Some(&(cp, vp)), Some(&(cq, _))) if cp < cq => {
                        p.next();
                        (cp, a * vp)
                    }
                    (Some(_), Some(&(cq, vq))) => {
                        q.next();
                        (cq, b * vq)
                    }
                    (Some(&(cp, vp)), None) => {
                        p.next();
                        (cp, a * vp)
                    }
                    (None, Some(&(cq, vq))) => {
                        q.next();
                        (cq, b * vq)
                    }
                    (None, None) => break,
                };
                col_idx.push(c);
                values.push(v);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Ok(CsrMatrix { n: self.n, row_ptr, col_idx, values })
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, _)| self.col_idx[self.row_ptr[j]..self.row_ptr[j + 1]].binary_search(&i).is_ok()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_from_triplets() {
        let m = assemble_csr(2, vec![(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(m, CsrMatrix::identity(2));
    }

    #[test]
    fn duplicates_are_summed() {
        let m = assemble_csr(2, vec![(0, 0, 1.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(matches!(assemble_csr(2, vec![(0, 2, 1.0)]), Err(Error::IndexOutOfRange { row: 0, col: 2, n: 2 })));
    }

    #[test]
    fn order_independent() {
        let t = vec![(0, 1, 0.1), (1, 0, 0.2), (0, 1, 1e-17), (0, 1, 0.7), (1, 1, 3.0), (0, 1, -0.3)];
        let mut r = t.clone();
        r.reverse();
        let a = assemble_csr(2, t).unwrap();
        let b = assemble_csr(2, r).unwrap();
        assert_eq!(a.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let a = assemble_csr(3, vec![(0, 0, 1.0), (0, 2, 2.0), (2, 2, 1.0)]).unwrap();
        let b = assemble_csr(3, vec![(0, 1, 1.0), (0, 2, 1.0), (1, 1, 4.0)]).unwrap();
        let c = a.linear_combination(2.0, &b, -1.0).unwrap();
        assert_eq!(c.to_dense(), vec![vec![2.0, -1.0, 3.0], vec![0.0, -4.0, 0.0], vec![0.0, 0.0, 2.0]]);
    }
}
