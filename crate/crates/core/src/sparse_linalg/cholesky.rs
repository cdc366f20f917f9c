//! Sparse Cholesky factorization: elimination-tree symbolic analysis and a
//! supernodal left-looking numeric phase.

use rand::Rng;
use rand_distr::StandardNormal;

use super::csc::SparseSym;
use super::ordering::{inverse_permutation, minimum_degree};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pivots at or below this fraction of the largest diagonal entry are treated
/// as a loss of positive definiteness.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Ordering and nonzero structure of `L` for one sparsity pattern.
///
/// Computed once per pattern and reused for every numeric factorization with
/// the same pattern (e.g. `κR + Ĵ` for varying `κ`).
#[derive(Debug, Clone)]
pub struct CholeskySymbolic {
    n: usize,
    perm: Vec<usize>,
    parent: Vec<Option<usize>>,
    l_col_ptr: Vec<usize>,
    /// Row indices of `L`, sorted within each column, diagonal first.
    l_row_idx: Vec<usize>,
    pattern_col_ptr: Vec<usize>,
    pattern_row_idx: Vec<usize>,
    /// Column ranges of the supernodes.
    sn_ptr: Vec<usize>,
    /// Offset of each supernode's dense column-major block.
    sn_val_ptr: Vec<usize>,
    /// `(source supernode, first row position, rows inside the target)`
    /// for every update received by a supernode.
    update_ptr: Vec<usize>,
    updates: Vec<(usize, usize, usize)>,
    /// Destination in the supernodal blocks of every stored entry of `A`
    /// on or below the permuted diagonal; `usize::MAX` above it.
    scatter: Vec<usize>,
}

impl CholeskySymbolic {
    pub fn analyze<T: Real>(a: &SparseSym<T>) -> Self {
        let n = a.dim();
        let csc = a.as_csc();
        let adjacency: Vec<Vec<usize>> = (0..n).map(|c| csc.column(c).map(|(r, _)| r).collect()).collect();
        Self::analyze_with_permutation(a, minimum_degree(&adjacency))
    }

    /// Symbolic analysis with a caller-supplied ordering (`perm[new] = old`).
    pub fn analyze_with_permutation<T: Real>(a: &SparseSym<T>, perm: Vec<usize>) -> Self {
        let n = a.dim();
        let csc = a.as_csc();
        assert_eq!(perm.len(), n, "permutation length");
        let inv_perm = inverse_permutation(&perm);
        let upper = a.permuted_upper(&inv_perm);
        let (cp, ri) = (upper.col_ptr(), upper.row_idx());
        let parent = elimination_tree(n, cp, ri);

        // row k of L is the reach of column k of the upper triangle
        let mut counts = vec![1usize; n];
        let mut mark = vec![usize::MAX; n];
        let mut stack = Vec::with_capacity(n);
        for k in 0..n {
            ereach(k, cp, ri, &parent, &mut mark, &mut stack);
            for &i in &stack {
                counts[i] += 1;
            }
        }
        let mut l_col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            l_col_ptr[k + 1] = l_col_ptr[k] + counts[k];
        }
        let mut l_row_idx = vec![0usize; l_col_ptr[n]];
        let mut next: Vec<usize> = l_col_ptr[..n].iter().map(|p| p + 1).collect();
        mark.fill(usize::MAX);
        for k in 0..n {
            l_row_idx[l_col_ptr[k]] = k;
            ereach(k, cp, ri, &parent, &mut mark, &mut stack);
            for &i in &stack {
                l_row_idx[next[i]] = k;
                next[i] += 1;
            }
        }

        // fundamental supernodes: j + 1 continues j's supernode when it is
        // j's parent and their patterns nest exactly
        let mut sn_ptr = vec![0];
        for j in 1..n {
            if !(parent[j - 1] == Some(j) && counts[j] + 1 == counts[j - 1]) {
                sn_ptr.push(j);
            }
        }
        sn_ptr.push(n);
        let n_sn = sn_ptr.len() - 1;
        let mut col_to_sn = vec![0usize; n];
        let mut sn_val_ptr = vec![0usize; n_sn + 1];
        for s in 0..n_sn {
            let (f, l) = (sn_ptr[s], sn_ptr[s + 1]);
            col_to_sn[f..l].iter_mut().for_each(|c| *c = s);
            sn_val_ptr[s + 1] = sn_val_ptr[s] + counts[f] * (l - f);
        }

        let mut incoming: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n_sn];
        for k in 0..n_sn {
            let (f, l) = (sn_ptr[k], sn_ptr[k + 1]);
            let rows = &l_row_idx[l_col_ptr[f]..l_col_ptr[f + 1]];
            let mut pos = l - f;
            while pos < rows.len() {
                let target = col_to_sn[rows[pos]];
                let end = sn_ptr[target + 1];
                let n_in = rows[pos..].iter().take_while(|&&r| r < end).count();
                incoming[target].push((k, pos, n_in));
                pos += n_in;
            }
        }
        let mut update_ptr = vec![0usize];
        let mut updates = Vec::new();
        for list in incoming {
            updates.extend(list);
            update_ptr.push(updates.len());
        }

        let mut scatter = Vec::with_capacity(csc.nnz());
        for c in 0..n {
            for (r, _) in csc.column(c) {
                let (pr, pc) = (inv_perm[r], inv_perm[c]);
                if pr < pc {
                    scatter.push(usize::MAX);
                    continue;
                }
                let s = col_to_sn[pc];
                let f = sn_ptr[s];
                let rows = &l_row_idx[l_col_ptr[f]..l_col_ptr[f + 1]];
                let pos = rows.binary_search(&pr).expect("entry of A lies in the pattern of L");
                scatter.push(sn_val_ptr[s] + (pc - f) * rows.len() + pos);
            }
        }

        Self {
            n,
            perm,
            parent,
            l_col_ptr,
            l_row_idx,
            pattern_col_ptr: csc.col_ptr().to_vec(),
            pattern_row_idx: csc.row_idx().to_vec(),
            sn_ptr,
            sn_val_ptr,
            update_ptr,
            updates,
            scatter,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros in the factor `L`.
    pub fn factor_nnz(&self) -> usize {
        self.l_col_ptr[self.n]
    }

    /// Number of supernodes.
    pub fn n_supernodes(&self) -> usize {
        self.sn_ptr.len() - 1
    }

    /// Multiply-add count of the numeric factorization, `Σ_j c_j²` over
    /// the column counts of `L`.
    pub fn flop_count(&self) -> f64 {
        self.l_col_ptr.windows(2).map(|w| ((w[1] - w[0]) as f64).powi(2)).sum()
    }

    /// Fill-reducing permutation, `perm[new] = old`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn matches<T: Real>(&self, a: &SparseSym<T>) -> bool {
        a.dim() == self.n
            && a.as_csc().col_ptr() == self.pattern_col_ptr.as_slice()
            && a.as_csc().row_idx() == self.pattern_row_idx.as_slice()
    }
}

fn elimination_tree(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<Option<usize>> {
    let mut parent = vec![None; n];
    let mut ancestor: Vec<Option<usize>> = vec![None; n];
    for k in 0..n {
        for &r in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
            let mut i = Some(r);
            while let Some(node) = i {
                if node >= k {
                    break;
                }
                let next = ancestor[node];
                ancestor[node] = Some(k);
                if next.is_none() {
                    parent[node] = Some(k);
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), in
/// topological order, written to `out`.
fn ereach(
    k: usize,
    col_ptr: &[usize],
    row_idx: &[usize],
    parent: &[Option<usize>],
    mark: &mut [usize],
    out: &mut Vec<usize>,
) {
    out.clear();
    mark[k] = k;
    let mut path = Vec::new();
    for &r in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
        if r > k {
            continue;
        }
        let mut i = r;
        path.clear();
        while mark[i] != k {
            path.push(i);
            mark[i] = k;
            match parent[i] {
                Some(p) => i = p,
                None => break,
            }
        }
        // each path is pushed reversed so that the final reversal yields
        // descendants before ancestors
        out.extend(path.iter().rev());
    }
    out.reverse();
}

/// Numeric factor `P A P' = L L'`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<T> {
    symbolic: CholeskySymbolic,
    l_values: Vec<T>,
    log_det: T,
}

/// Factor a positive definite matrix, computing a fresh ordering.
pub fn cholesky<T: Real>(a: &SparseSym<T>) -> Result<CholeskyFactor<T>> {
    let symbolic = CholeskySymbolic::analyze(a);
    CholeskyFactor::factor(symbolic, a)
}

impl<T: Real> CholeskyFactor<T> {
    /// Numeric factorization with a precomputed symbolic analysis.
    pub fn factor(symbolic: CholeskySymbolic, a: &SparseSym<T>) -> Result<Self> {
        if !symbolic.matches(a) {
            return Err(Error::InvalidArgument(
                "matrix pattern differs from the analysed pattern".into(),
            ));
        }
        let sym = &symbolic;
        let n = sym.n;
        let threshold = T::lit(PIVOT_TOLERANCE) * a.max_diag();
        let mut blocks = vec![T::zero(); sym.sn_val_ptr[sym.n_supernodes()]];
        for (&dst, &v) in sym.scatter.iter().zip(a.as_csc().values()) {
            if dst != usize::MAX {
                blocks[dst] += v;
            }
        }

        let mut map = vec![0usize; n];
        let mut buf: Vec<T> = Vec::new();
        for s in 0..sym.n_supernodes() {
            let (f, l) = (sym.sn_ptr[s], sym.sn_ptr[s + 1]);
            let rows = &sym.l_row_idx[sym.l_col_ptr[f]..sym.l_col_ptr[f + 1]];
            let ld = rows.len();
            for (pos, &r) in rows.iter().enumerate() {
                map[r] = pos;
            }
            let (done, rest) = blocks.split_at_mut(sym.sn_val_ptr[s]);
            let target = &mut rest[..ld * (l - f)];

            for &(k, off, n_in) in &sym.updates[sym.update_ptr[s]..sym.update_ptr[s + 1]] {
                let (kf, kl) = (sym.sn_ptr[k], sym.sn_ptr[k + 1]);
                let k_rows = &sym.l_row_idx[sym.l_col_ptr[kf]..sym.l_col_ptr[kf + 1]];
                let k_ld = k_rows.len();
                let k_block = &done[sym.sn_val_ptr[k]..sym.sn_val_ptr[k + 1]];
                let m = k_ld - off;
                buf.clear();
                buf.resize(m * n_in, T::zero());
                for c in 0..(kl - kf) {
                    let col = &k_block[c * k_ld + off..(c + 1) * k_ld];
                    for j in 0..n_in {
                        let ljc = col[j];
                        if ljc == T::zero() {
                            continue;
                        }
                        let out = &mut buf[j * m + j..(j + 1) * m];
                        for (o, &x) in out.iter_mut().zip(&col[j..]) {
                            *o += x * ljc;
                        }
                    }
                }
                for j in 0..n_in {
                    let tcol = &mut target[(k_rows[off + j] - f) * ld..];
                    for i in j..m {
                        tcol[map[k_rows[off + i]]] -= buf[j * m + i];
                    }
                }
            }

            // dense left-looking Cholesky of the panel
            for j in 0..(l - f) {
                let (left, right) = target.split_at_mut(j * ld);
                let colj = &mut right[..ld];
                for c in 0..j {
                    let colc = &left[c * ld..(c + 1) * ld];
                    let ljc = colc[j];
                    if ljc == T::zero() {
                        continue;
                    }
                    for (o, &x) in colj[j..].iter_mut().zip(&colc[j..]) {
                        *o -= x * ljc;
                    }
                }
                let d = colj[j];
                if !(d > threshold) {
                    return Err(Error::NotPositiveDefinite {
                        pivot: sym.perm[f + j],
                        value: d.to_f64().unwrap_or(f64::NAN),
                    });
                }
                let dk = d.sqrt();
                colj[j] = dk;
                let inv = T::one() / dk;
                colj[j + 1..].iter_mut().for_each(|v| *v *= inv);
            }
        }

        let mut l_values = vec![T::zero(); sym.factor_nnz()];
        let mut log_det = T::zero();
        for s in 0..sym.n_supernodes() {
            let (f, l) = (sym.sn_ptr[s], sym.sn_ptr[s + 1]);
            let ld = sym.l_col_ptr[f + 1] - sym.l_col_ptr[f];
            let block = &blocks[sym.sn_val_ptr[s]..sym.sn_val_ptr[s + 1]];
            for j in 0..(l - f) {
                let dst = &mut l_values[sym.l_col_ptr[f + j]..sym.l_col_ptr[f + j + 1]];
                dst.copy_from_slice(&block[j * ld + j..(j + 1) * ld]);
                log_det += dst[0].ln();
            }
        }
        log_det = log_det + log_det;

        Ok(Self {
            symbolic,
            l_values,
            log_det,
        })
    }


    pub fn dim(&self) -> usize {
        self.symbolic.n
    }

    pub fn symbolic(&self) -> &CholeskySymbolic {
        &self.symbolic
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> T {
        self.log_det
    }

    fn col(&self, j: usize) -> (std::ops::Range<usize>, T) {
        let start = self.symbolic.l_col_ptr[j];
        (start + 1..self.symbolic.l_col_ptr[j + 1], self.l_values[start])
    }

    /// In place `L y = b` in permuted coordinates.
    fn forward(&self, y: &mut [T]) {
        for j in 0..self.dim() {
            let (rest, diag) = self.col(j);
            let yj = y[j] / diag;
            y[j] = yj;
            if yj != T::zero() {
                for p in rest {
                    y[self.symbolic.l_row_idx[p]] -= self.l_values[p] * yj;
                }
            }
        }
    }

    /// In place `L' z = y` in permuted coordinates.
    fn backward(&self, z: &mut [T]) {
        for j in (0..self.dim()).rev() {
            let (rest, diag) = self.col(j);
            let mut s = z[j];
            for p in rest {
                s -= self.l_values[p] * z[self.symbolic.l_row_idx[p]];
            }
            z[j] = s / diag;
        }
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension(format!(
                "solve: system of size {n}, right-hand side of length {}",
                b.len()
            )));
        }
        let mut y: Vec<T> = self.symbolic.perm.iter().map(|&old| b[old]).collect();
        self.forward(&mut y);
        self.backward(&mut y);
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.symbolic.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }

    /// Solve for several right-hand sides.
    pub fn solve_many(&self, rhs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        rhs.iter().map(|b| self.solve(b)).collect()
    }

    /// Exact `diag(A⁻¹)` via one unit-vector solve per column.
    ///
    /// `(A⁻¹)_jj = ‖L⁻¹ P e_j‖²`, and `L⁻¹ e_k` is supported on the path from
    /// `k` to the root of the elimination tree, so each solve only touches
    /// that path.
    pub fn diagonal_of_inverse(&self) -> Vec<T> {
        let n = self.dim();
        let mut out = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        let mut path = Vec::new();
        for (k, &old) in self.symbolic.perm.iter().enumerate() {
            path.clear();
            let mut node = Some(k);
            while let Some(j) = node {
                path.push(j);
                node = self.symbolic.parent[j];
            }
            y[k] = T::one();
            let mut acc = T::zero();
            for &j in &path {
                let (rest, diag) = self.col(j);
                let yj = y[j] / diag;
                y[j] = T::zero();
                acc += yj * yj;
                if yj != T::zero() {
                    for p in rest {
                        y[self.symbolic.l_row_idx[p]] -= self.l_values[p] * yj;
                    }
                }
            }
            out[old] = acc;
        }
        out
    }

    /// Draw `x ~ N(0, A⁻¹)` as `x = P' L⁻ᵀ z` with standard normal `z`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let n = self.dim();
        let mut z: Vec<T> = (0..n)
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        self.backward(&mut z);
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.symbolic.perm.iter().enumerate() {
            x[old] = z[new];
        }
        x
    }

    /// Monte Carlo estimate of `diag(A⁻¹)` from `n_samples` draws.
    pub fn sampled_diagonal_of_inverse<R: Rng + ?Sized>(
        &self,
        n_samples: usize,
        rng: &mut R,
    ) -> Vec<T> {
        let n = self.dim();
        let mut acc = vec![T::zero(); n];
        for _ in 0..n_samples {
            let x = self.sample(rng);
            for (a, v) in acc.iter_mut().zip(x) {
                *a += v * v;
            }
        }
        let m = T::from_usize_lossy(n_samples.max(1));
        acc.into_iter().map(|a| a / m).collect()
    }

    /// Reconstruct `L L'` densely (test diagnostic, permuted coordinates).
    pub fn reconstruct_dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut l = vec![vec![T::zero(); n]; n];
        for j in 0..n {
            for p in self.symbolic.l_col_ptr[j]..self.symbolic.l_col_ptr[j + 1] {
                l[self.symbolic.l_row_idx[p]][j] = self.l_values[p];
            }
        }
        let mut out = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for k in 0..=i.min(j) {
                    s += l[i][k] * l[j][k];
                }
                out[i][j] = s;
            }
        }
        out
    }
}
