use std::sync::{Arc, OnceLock};

use faer::sparse::linalg::solvers::SymbolicLlt;
use faer::sparse::SymbolicSparseColMatRef;
use faer::Side;

use super::vector::{dot, C64};
use crate::error::{Error, Result};

/// Relative entrywise tolerance for the Hermitian flag.
pub const HERMITIAN_TOL: f64 = 1e-13;

/// Compressed sparse row structure, shared between matrices assembled on the
/// same mesh so that linear combinations are elementwise.
#[derive(Debug)]
pub struct CsrPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic_llt: OnceLock<SymbolicLlt<usize>>,
}

impl CsrPattern {
    /// Builds a pattern from per-row column lists; columns are sorted and
    /// deduplicated.
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        CsrPattern {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            symbolic_llt: OnceLock::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|p| start + p)
    }

    fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| self.row(i).iter().all(|&j| self.position(j, i).is_some()))
    }

    /// Symbolic Cholesky of a structurally symmetric pattern, computed once.
    ///
    /// The lower triangle of the CSC view equals the CSR upper triangle, so the
    /// CSR arrays are reused directly as column pointers / row indices.
    pub(crate) fn symbolic_llt(&self) -> Result<SymbolicLlt<usize>> {
        if let Some(s) = self.symbolic_llt.get() {
            return Ok(s.clone());
        }
        let sym = SymbolicSparseColMatRef::new_checked(
            self.nrows,
            self.ncols,
            &self.row_ptr,
            None,
            &self.col_idx,
        );
        let s = SymbolicLlt::try_new(sym, Side::Lower).map_err(|_| Error::Singular)?;
        Ok(self.symbolic_llt.get_or_init(|| s).clone())
    }
}

/// Complex sparse matrix with an optional (validated) Hermitian flag.
#[derive(Debug, Clone)]
pub struct HermitianSparse {
    pattern: Arc<CsrPattern>,
    values: Vec<C64>,
    hermitian: bool,
}

impl HermitianSparse {
    pub fn from_pattern(pattern: Arc<CsrPattern>, values: Vec<C64>, hermitian: bool) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::DimensionMismatch {
                expected: pattern.nnz(),
                got: values.len(),
            });
        }
        let m = HermitianSparse {
            pattern,
            values,
            hermitian,
        };
        if hermitian {
            m.validate_hermitian()?;
        }
        Ok(m)
    }

    /// Duplicate entries are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, C64)],
        hermitian: bool,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::DimensionMismatch {
                    expected: nrows.max(ncols),
                    got: i.max(j),
                });
            }
            rows[i].push((j, v));
        }
        let mut cols = Vec::with_capacity(nrows);
        let mut values = Vec::with_capacity(triplets.len());
        for row in rows.iter_mut() {
            row.sort_by_key(|&(j, _)| j);
            let mut c: Vec<usize> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                if c.last() == Some(&j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    c.push(j);
                    values.push(v);
                }
            }
            cols.push(c);
        }
        let pattern = Arc::new(CsrPattern::from_rows(ncols, cols));
        Self::from_pattern(pattern, values, hermitian)
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        Self::from_triplets(n, n, &t, true).expect("identity is Hermitian")
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))).collect();
        Self::from_triplets(d.len(), d.len(), &t, true).expect("real diagonal is Hermitian")
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    /// Square dimension; panics in debug builds for rectangular matrices.
    pub fn dim(&self) -> usize {
        debug_assert_eq!(self.nrows(), self.ncols());
        self.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.pattern
            .position(i, j)
            .map(|p| self.values[p])
            .unwrap_or_default()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows()).flat_map(move |i| {
            let (s, e) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
            (s..e).map(move |p| (i, self.pattern.col_idx[p], self.values[p]))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A^H| / max |A|` (0 for the zero matrix; infinite if rectangular).
    pub fn hermitian_defect(&self) -> f64 {
        if self.nrows() != self.ncols() {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for (i, j, v) in self.triplets() {
            let mirror = self.get(j, i);
            worst = worst.max((v - mirror.conj()).norm());
        }
        worst / scale
    }

    fn validate_hermitian(&self) -> Result<()> {
        if self.nrows() != self.ncols() {
            return Err(Error::NotSquare {
                rows: self.nrows(),
                cols: self.ncols(),
            });
        }
        let defect = self.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                defect,
                tol: HERMITIAN_TOL,
            });
        }
        Ok(())
    }

    pub(crate) fn is_structurally_symmetric(&self) -> bool {
        self.pattern.is_structurally_symmetric()
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols());
        debug_assert_eq!(y.len(), self.nrows());
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::default();
            for p in rp[i]..rp[i + 1] {
                acc += self.values[p] * x[ci[p]];
            }
            *yi = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::default(); self.nrows()];
        self.apply_into(x, &mut y);
        y
    }

    /// `A^H x`
    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::default(); self.ncols()];
        for (i, j, v) in self.triplets() {
            y[j] += v.conj() * x[i];
        }
        y
    }

    /// `u^H A u`
    pub fn quad_form(&self, u: &[C64]) -> C64 {
        dot(u, &self.apply(u))
    }

    /// `sum_k c_k A_k`; elementwise when all terms share one pattern.
    pub fn lin_comb(terms: &[(C64, &HermitianSparse)], hermitian: bool) -> Result<Self> {
        let first = terms.first().ok_or(Error::Config("empty linear combination".into()))?.1;
        let (nr, nc) = (first.nrows(), first.ncols());
        for (_, m) in terms {
            if m.nrows() != nr || m.ncols() != nc {
                return Err(Error::DimensionMismatch {
                    expected: nr,
                    got: m.nrows(),
                });
            }
        }
        if terms.iter().all(|(_, m)| Arc::ptr_eq(&m.pattern, &first.pattern)) {
            let mut values = vec![C64::default(); first.nnz()];
            for (c, m) in terms {
                for (acc, v) in values.iter_mut().zip(&m.values) {
                    *acc += c * v;
                }
            }
            return Self::from_pattern(first.pattern.clone(), values, hermitian);
        }
        let mut t = Vec::new();
        for (c, m) in terms {
            t.extend(m.triplets().map(|(i, j, v)| (i, j, c * v)));
        }
        Self::from_triplets(nr, nc, &t, hermitian)
    }

    /// `a A + b B` for real scalars, preserving the Hermitian flag when both are.
    pub fn add_scaled(&self, a: f64, other: &HermitianSparse, b: f64) -> Result<Self> {
        Self::lin_comb(
            &[(C64::new(a, 0.0), self), (C64::new(b, 0.0), other)],
            self.hermitian && other.hermitian,
        )
    }

    pub fn conj(&self) -> Self {
        HermitianSparse {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
            hermitian: self.hermitian,
        }
    }

    /// Row-major dense copy, for small matrices and test oracles.
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut d = vec![vec![C64::default(); self.ncols()]; self.nrows()];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }
}
