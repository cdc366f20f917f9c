//! Compressed sparse column storage.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// General sparse matrix in compressed sparse column layout.
///
/// Row indices within each column are sorted and unique. Explicit zeros are
/// kept; sums and Kronecker products preserve structure so that symbolic
/// factorizations can be reused across numeric values.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CscMatrix<T> {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, T)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= nrows || c >= ncols {
                return Err(Error::Index(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
        }
        entries.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of stored entries (including explicit zeros).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Iterate over `(row, value)` of column `c`.
    pub fn column(&self, c: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols).flat_map(move |c| self.column(c).map(move |(r, v)| (r, c, v)))
    }

    /// Entry lookup by binary search; absent entries read as zero.
    pub fn get(&self, r: usize, c: usize) -> T {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        match self.row_idx[range.clone()].binary_search(&r) {
            Ok(k) => self.values[range.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.row_idx {
            counts[r + 1] += 1;
        }
        for r in 0..self.nrows {
            counts[r + 1] += counts[r];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for c in 0..self.ncols {
            for (r, v) in self.column(c) {
                let k = next[r];
                row_idx[k] = c;
                values[k] = v;
                next[r] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self + other`, keeping the union of both sparsity patterns.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Dimension(format!(
                "add: {}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut col_ptr = Vec::with_capacity(self.ncols + 1);
        let mut row_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        col_ptr.push(0);
        for c in 0..self.ncols {
            let (mut a, a_end) = (self.col_ptr[c], self.col_ptr[c + 1]);
            let (mut b, b_end) = (other.col_ptr[c], other.col_ptr[c + 1]);
            while a < a_end || b < b_end {
                let ra = if a < a_end { self.row_idx[a] } else { usize::MAX };
                let rb = if b < b_end { other.row_idx[b] } else { usize::MAX };
                if ra == rb {
                    row_idx.push(ra);
                    values.push(self.values[a] + other.values[b]);
                    a += 1;
                    b += 1;
                } else if ra < rb {
                    row_idx.push(ra);
                    values.push(self.values[a]);
                    a += 1;
                } else {
                    row_idx.push(rb);
                    values.push(other.values[b]);
                    b += 1;
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Sparse product `self * other` (Gustavson).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::Dimension(format!(
                "matmul: {}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut col_ptr = Vec::with_capacity(other.ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![T::zero(); self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut pattern = Vec::new();
        col_ptr.push(0);
        for c in 0..other.ncols {
            pattern.clear();
            for (k, bkc) in other.column(c) {
                for (r, ark) in self.column(k) {
                    if mark[r] != c {
                        mark[r] = c;
                        acc[r] = T::zero();
                        pattern.push(r);
                    }
                    acc[r] += ark * bkc;
                }
            }
            pattern.sort_unstable();
            for &r in &pattern {
                row_idx.push(r);
                values.push(acc[r]);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: other.ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.ncols {
            return Err(Error::Dimension(format!(
                "matvec: {} columns, vector of length {}",
                self.ncols,
                x.len()
            )));
        }
        let mut y = vec![T::zero(); self.nrows];
        for (c, &xc) in x.iter().enumerate() {
            if xc == T::zero() {
                continue;
            }
            for (r, v) in self.column(c) {
                y[r] += v * xc;
            }
        }
        Ok(y)
    }

    /// Dense row-major copy; intended for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            out[r][c] += v;
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    pub(crate) fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
    }
}

/// Kronecker product `a ⊗ b`.
///
/// Every stored entry of `a` multiplies every stored entry of `b`, so
/// `nnz(a ⊗ b) = nnz(a) · nnz(b)`.
pub fn kron<T: Real>(a: &CscMatrix<T>, b: &CscMatrix<T>) -> Result<CscMatrix<T>> {
    let nrows = a
        .nrows
        .checked_mul(b.nrows)
        .ok_or_else(|| Error::Dimension("kron: row dimension overflow".into()))?;
    let ncols = a
        .ncols
        .checked_mul(b.ncols)
        .ok_or_else(|| Error::Dimension("kron: column dimension overflow".into()))?;
    let mut col_ptr = Vec::with_capacity(ncols + 1);
    let mut row_idx = Vec::with_capacity(a.nnz() * b.nnz());
    let mut values = Vec::with_capacity(a.nnz() * b.nnz());
    col_ptr.push(0);
    for ca in 0..a.ncols {
        for cb in 0..b.ncols {
            // rows of column (ca, cb) are ordered by (ra, rb), i.e. ra * b.nrows + rb
            for (ra, va) in a.column(ca) {
                for (rb, vb) in b.column(cb) {
                    row_idx.push(ra * b.nrows + rb);
                    values.push(va * vb);
                }
            }
            col_ptr.push(row_idx.len());
        }
    }
    Ok(CscMatrix {
        nrows,
        ncols,
        col_ptr,
        row_idx,
        values,
    })
}

/// Square sparse matrix that is symmetric by construction.
///
/// Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym<T> {
    inner: CscMatrix<T>,
}

impl<T: Real> SparseSym<T> {
    /// Wrap a matrix after checking that it is square and exactly symmetric.
    pub fn new(m: CscMatrix<T>) -> Result<Self> {
        if m.nrows != m.ncols {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows, m.ncols
            )));
        }
        let t = m.transpose();
        if !m.same_pattern(&t) {
            return Err(Error::InvalidArgument(
                "matrix is not structurally symmetric".into(),
            ));
        }
        if m.values != t.values {
            return Err(Error::InvalidArgument(
                "matrix values are not symmetric".into(),
            ));
        }
        Ok(Self { inner: m })
    }

    /// Build from the lower (or upper) triangle; off-diagonal entries are mirrored.
    pub fn from_triangle_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self> {
        let mut full = Vec::new();
        for (r, c, v) in triplets {
            full.push((r, c, v));
            if r != c {
                full.push((c, r, v));
            }
        }
        Ok(Self {
            inner: CscMatrix::from_triplets(n, n, full)?,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: CscMatrix::identity(n),
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        Self {
            inner: CscMatrix::from_diagonal(diag),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows
    }

    pub fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    pub fn as_csc(&self) -> &CscMatrix<T> {
        &self.inner
    }

    pub fn into_csc(self) -> CscMatrix<T> {
        self.inner
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.inner.get(r, c)
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            inner: self.inner.scale(factor),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            inner: self.inner.add(&other.inner)?,
        })
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        self.inner.matvec(x)
    }

    /// `x' A x`.
    pub fn quad_form(&self, x: &[T]) -> Result<T> {
        let ax = self.matvec(x)?;
        Ok(ax.iter().zip(x).map(|(&a, &b)| a * b).sum())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        self.inner.to_dense()
    }

    /// Largest absolute diagonal entry.
    pub fn max_diag(&self) -> T {
        self.diagonal()
            .into_iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    /// Symmetric block-diagonal concatenation.
    pub fn block_diag(blocks: &[&SparseSym<T>]) -> Result<Self> {
        let n: usize = blocks.iter().map(|b| b.dim()).sum();
        let mut offset = 0;
        let mut trip = Vec::with_capacity(blocks.iter().map(|b| b.nnz()).sum());
        for b in blocks {
            trip.extend(
                b.inner
                    .triplets()
                    .map(|(r, c, v)| (r + offset, c + offset, v)),
            );
            offset += b.dim();
        }
        Ok(Self {
            inner: CscMatrix::from_triplets(n, n, trip)?,
        })
    }

    /// Upper triangle of `P A P'`, given the inverse permutation `inv[old] = new`.
    pub(crate) fn permuted_upper(&self, inv: &[usize]) -> CscMatrix<T> {
        let n = self.dim();
        let mut counts = vec![0usize; n + 1];
        for c in 0..n {
            for (r, _) in self.inner.column(c) {
                let (pr, pc) = (inv[r], inv[c]);
                if pr <= pc {
                    counts[pc + 1] += 1;
                }
            }
        }
        for c in 0..n {
            counts[c + 1] += counts[c];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0usize; col_ptr[n]];
        let mut values = vec![T::zero(); col_ptr[n]];
        for c in 0..n {
            for (r, v) in self.inner.column(c) {
                let (pr, pc) = (inv[r], inv[c]);
                if pr <= pc {
                    let k = next[pc];
                    row_idx[k] = pr;
                    values[k] = v;
                    next[pc] += 1;
                }
            }
        }
        // sort rows within each column
        for c in 0..n {
            let range = col_ptr[c]..col_ptr[c + 1];
            let mut pairs: Vec<(usize, T)> = row_idx[range.clone()]
                .iter()
                .copied()
                .zip(values[range.clone()].iter().copied())
                .collect();
            pairs.sort_by_key(|p| p.0);
            for (k, (r, v)) in range.zip(pairs) {
                row_idx[k] = r;
                values[k] = v;
            }
        }
        CscMatrix {
            nrows: n,
            ncols: n,
            col_ptr,
            row_idx,
            values,
        }
    }
}

impl<T: Real> TryFrom<CscMatrix<T>> for SparseSym<T> {
    type Error = Error;

    fn try_from(m: CscMatrix<T>) -> Result<Self> {
        SparseSym::new(m)
    }
}
