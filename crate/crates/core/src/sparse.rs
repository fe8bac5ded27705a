//! Compressed sparse row matrices sharing one symmetric sparsity pattern,
//! and the direct solver used by the Newton and projection steps.

use std::sync::{Arc, OnceLock};

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};

use crate::error::{Error, Result};

/// Symmetric sparsity pattern in compressed row form. The symbolic LU
/// analysis is computed on first use and shared by all matrices on the
/// pattern.
#[derive(Debug)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: OnceLock<(SymbolicSparseColMat<usize>, SymbolicLu<usize>)>,
}

impl PartialEq for SparsityPattern {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }
}

impl SparsityPattern {
    /// Pattern coupling every pair of indices that appear together in one of
    /// the `groups` (the functions of one cell).
    pub fn from_groups<'a>(n: usize, groups: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for g in groups {
            for &i in g {
                rows[i].extend_from_slice(g);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            symbolic: OnceLock::new(),
        }
    }

    fn symbolic_lu(&self) -> Result<&(SymbolicSparseColMat<usize>, SymbolicLu<usize>)> {
        if let Some(s) = self.symbolic.get() {
            return Ok(s);
        }
        // the pattern is symmetric, so the row structure doubles as the
        // column structure
        let sym = SymbolicSparseColMat::new_checked(self.n, self.n, self.row_ptr.clone(), None, self.col_idx.clone());
        let lu = SymbolicLu::try_new(sym.as_ref()).map_err(|e| Error::Solver(format!("{e:?}")))?;
        Ok(self.symbolic.get_or_init(|| (sym, lu)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|k| self.row_ptr[row] + k)
    }

    /// Positions of the dense block `rows x rows`, row-major.
    pub fn block_positions(&self, idx: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(idx.len() * idx.len());
        for &r in idx {
            for &c in idx {
                out.push(self.position(r, c).expect("block inside pattern"));
            }
        }
        out
    }

    fn row(&self, r: usize) -> std::ops::Range<usize> {
        self.row_ptr[r]..self.row_ptr[r + 1]
    }
}

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Scatter a dense block using precomputed positions.
    pub fn add_block(&mut self, positions: &[usize], block: &[f64]) {
        for (&p, &v) in positions.iter().zip(block) {
            self.values[p] += v;
        }
    }

    pub fn add_at(&mut self, row: usize, col: usize, v: f64) {
        let p = self.pattern.position(row, col).expect("entry inside pattern");
        self.values[p] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |p| self.values[p])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha * A x`
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.pattern.row(r) {
                s += self.values[k] * x[self.pattern.col_idx[k]];
            }
            *yr += alpha * s;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for r in 0..self.dim() {
            for k in self.pattern.row(r) {
                let c = self.pattern.col_idx[k];
                let t = self.pattern.position(c, r).expect("symmetric pattern");
                values[t] = self.values[k];
            }
        }
        Self {
            pattern: Arc::clone(&self.pattern),
            values,
        }
    }

    /// `self += alpha * other` for matrices on the same pattern.
    pub fn axpy(&mut self, alpha: f64, other: &CsrMatrix) {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.values
            .iter()
            .zip(&t.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (r, row) in d.iter_mut().enumerate() {
            for k in self.pattern.row(r) {
                row[self.pattern.col_idx[k]] = self.values[k];
            }
        }
        d
    }

}

/// Solve `A x = b` by sparse LU with one step of iterative refinement.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Structure("right-hand side length mismatch".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let (sym, symbolic) = a.pattern.symbolic_lu()?;
    // column-major values of A are the row-major values of A^T
    let at = a.transpose();
    let mat = SparseColMatRef::new(sym.as_ref(), &at.values);
    let lu = Lu::try_new_with_symbolic(symbolic.clone(), mat)
        .map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let mut x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();

    let mut r = b.to_vec();
    a.matvec_add(-1.0, &x, &mut r);
    let dr = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
    let dx = lu.solve(&dr);
    for (i, xi) in x.iter_mut().enumerate() {
        *xi += dx[(i, 0)];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("singular system".into()));
    }
    Ok(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
