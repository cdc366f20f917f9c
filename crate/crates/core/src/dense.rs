//! Small dense symmetric matrix helpers for per-gridpoint `p × p` blocks
//! (`p ≤ 4`). Matrices are row-major slices of length `p²`.

use crate::scalar::Real;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns
/// of a row-major `p × p` matrix.
pub fn sym_eigen<T: Real>(a: &[T], p: usize) -> (Vec<T>, Vec<T>) {
    let mut m = a.to_vec();
    let mut v = identity(p);
    let tol = T::epsilon() * T::lit(1e-2);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..p {
            for j in (i + 1)..p {
                off += m[i * p + j] * m[i * p + j];
            }
        }
        let scale: T = (0..p).map(|i| m[i * p + i] * m[i * p + i]).sum::<T>() + off;
        if off <= tol * tol * scale || off == T::zero() {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let aij = m[i * p + j];
                if aij == T::zero() {
                    continue;
                }
                let theta = (m[j * p + j] - m[i * p + i]) / (aij + aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..p {
                    let mki = m[k * p + i];
                    let mkj = m[k * p + j];
                    m[k * p + i] = c * mki - s * mkj;
                    m[k * p + j] = s * mki + c * mkj;
                }
                for k in 0..p {
                    let mik = m[i * p + k];
                    let mjk = m[j * p + k];
                    m[i * p + k] = c * mik - s * mjk;
                    m[j * p + k] = s * mik + c * mjk;
                }
                for k in 0..p {
                    let vki = v[k * p + i];
                    let vkj = v[k * p + j];
                    v[k * p + i] = c * vki - s * vkj;
                    v[k * p + j] = s * vki + c * vkj;
                }
            }
        }
    }
    ((0..p).map(|i| m[i * p + i]).collect(), v)
}

pub fn identity<T: Real>(p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); p * p];
    for i in 0..p {
        out[i * p + i] = T::one();
    }
    out
}

/// Rebuild `V diag(λ) V'`.
pub fn from_eigen<T: Real>(values: &[T], vectors: &[T], p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..p {
            let mut s = T::zero();
            for k in 0..p {
                s += vectors[i * p + k] * values[k] * vectors[j * p + k];
            }
            out[i * p + j] = s;
        }
    }
    out
}

/// Symmetrize and lift every eigenvalue below `floor` up to `floor`.
///
/// Returns the projected matrix and whether any eigenvalue was lifted.
pub fn psd_floor<T: Real>(a: &[T], p: usize, floor: T) -> (Vec<T>, bool) {
    let sym = symmetrize(a, p);
    let (mut vals, vecs) = sym_eigen(&sym, p);
    let mut lifted = false;
    for v in vals.iter_mut() {
        if !(*v >= floor) {
            *v = floor;
            lifted = true;
        }
    }
    if lifted {
        (from_eigen(&vals, &vecs, p), true)
    } else {
        (sym, false)
    }
}

pub fn symmetrize<T: Real>(a: &[T], p: usize) -> Vec<T> {
    let half = T::lit(0.5);
    let mut out = a.to_vec();
    for i in 0..p {
        for j in 0..p {
            out[i * p + j] = half * (a[i * p + j] + a[j * p + i]);
        }
    }
    out
}

/// Inverse by Gauss–Jordan elimination with partial pivoting; `None` if
/// numerically singular.
pub fn inverse<T: Real>(a: &[T], p: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv = identity(p);
    let scale = a.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::lit(16.0);
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&x, &y| {
                m[x * p + col]
                    .abs()
                    .partial_cmp(&m[y * p + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty range");
        if !(m[pivot * p + col].abs() > tiny) {
            return None;
        }
        if pivot != col {
            for k in 0..p {
                m.swap(pivot * p + k, col * p + k);
                inv.swap(pivot * p + k, col * p + k);
            }
        }
        let d = m[col * p + col];
        for k in 0..p {
            m[col * p + k] /= d;
            inv[col * p + k] /= d;
        }
        for r in 0..p {
            if r == col {
                continue;
            }
            let f = m[r * p + col];
            if f == T::zero() {
                continue;
            }
            for k in 0..p {
                let d = f * m[col * p + k];
                m[r * p + k] -= d;
                let d = f * inv[col * p + k];
                inv[r * p + k] -= d;
            }
        }
    }
    Some(inv)
}

/// Lower Cholesky factor of a small SPD matrix.
pub fn cholesky<T: Real>(a: &[T], p: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); p * p];
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if !(d > T::zero()) {
            return None;
        }
        let djj = d.sqrt();
        l[j * p + j] = djj;
        for i in (j + 1)..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / djj;
        }
    }
    Some(l)
}

pub fn matvec<T: Real>(a: &[T], x: &[T], p: usize) -> Vec<T> {
    (0..p)
        .map(|i| (0..p).map(|j| a[i * p + j] * x[j]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_two_by_two() {
        let (vals, vecs) = sym_eigen(&[2.0f64, 1.0, 1.0, 2.0], 2);
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((sorted[0] - 1.0).abs() < 1e-14 && (sorted[1] - 3.0).abs() < 1e-14);
        let back = from_eigen(&vals, &vecs, 2);
        for (a, b) in back.iter().zip([2.0, 1.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn floor_lifts_negative_eigenvalue() {
        let (m, lifted) = psd_floor(&[1.0, 2.0, 2.0, 1.0], 2, 1e-8);
        assert!(lifted);
        let (vals, _) = sym_eigen(&m, 2);
        assert!(vals.iter().all(|&v| v >= 1e-8 - 1e-15));
        let (_, lifted) = psd_floor(&[2.0, 0.0, 0.0, 1.0], 2, 1e-8);
        assert!(!lifted);
    }

    #[test]
    fn inverse_of_known_matrix() {
        let inv = inverse(&[2.0f64, 1.0, 1.0, 2.0], 2).unwrap();
        let expect = [2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0];
        for (a, b) in inv.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(inverse(&[1.0, 1.0, 1.0, 1.0], 2).is_none());
    }

    #[test]
    fn cholesky_round_trip() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((s - a[i * 3 + j]).abs() < 1e-14);
            }
        }
    }
}
