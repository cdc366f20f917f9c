//! Minimizers used by the local fits and the hyperparameter search.
//!
//! All routines minimize; callers negate log-likelihoods.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions<T> {
    pub max_iter: usize,
    /// Stop when `|f_worst − f_best| ≤ f_tol · (|f_best| + f_tol)`.
    pub f_tol: T,
    /// Also require the simplex diameter to fall below this.
    pub x_tol: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            f_tol: T::lit(1e-10),
            x_tol: T::lit(1e-8),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub f: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best `(x, f)` after every iteration; non-increasing in `f`.
    pub trace: Vec<(Vec<T>, T)>,
}

/// Nelder–Mead simplex with standard coefficients (1, 2, ½, ½).
///
/// `step[i]` is the initial simplex edge along coordinate `i`. Non-finite
/// objective values are treated as `+∞`.
pub fn nelder_mead<T: Real>(
    f: impl Fn(&[T]) -> T,
    x0: &[T],
    step: &[T],
    opts: &NelderMeadOptions<T>,
) -> Minimum<T> {
    let n = x0.len();
    let eval = |x: &[T]| {
        let v = f(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };
    let mut evaluations = 0usize;
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    evaluations += 1;
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let fx = eval(&x);
        evaluations += 1;
        simplex.push((x, fx));
    }
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (best_f, worst_f) = (simplex[0].1, simplex[n].1);
        trace.push((simplex[0].0.clone(), best_f));
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max);
        let spread = (worst_f - best_f).abs();
        if best_f.is_finite()
            && spread <= opts.f_tol * (best_f.abs() + opts.f_tol)
            && diameter <= opts.x_tol
        {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += *v;
            }
        }
        let nt = T::from_usize_lossy(n);
        centroid.iter_mut().for_each(|c| *c /= nt);
        let along = |t: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let xr = along(T::one());
        let fr = eval(&xr);
        evaluations += 1;
        if fr < simplex[0].1 {
            let xe = along(two);
            let fe = eval(&xe);
            evaluations += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(half);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-half);
            let fc = eval(&xc);
            (xc, fc)
        };
        evaluations += 1;
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&best) {
                *xi = *bi + half * (*xi - *bi);
            }
            *fx = eval(x);
            evaluations += 1;
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, fx) = simplex.swap_remove(0);
    Minimum {
        x,
        f: fx,
        iterations,
        evaluations,
        converged,
        trace,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions<T> {
    pub max_iter: usize,
    /// Converged when `‖∇f‖∞ ≤ g_tol`.
    pub g_tol: T,
}

impl<T: Real> Default for BfgsOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            g_tol: T::lit(1e-9),
        }
    }
}

/// Central finite-difference gradient with step `h_i = h · max(1, |x_i|)`.
pub fn numerical_gradient<T: Real>(f: impl Fn(&[T]) -> T, x: &[T], h: T) -> Vec<T> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let hi = h * T::one().max(x[i].abs());
            xp[i] = x[i] + hi;
            let fp = f(&xp);
            xp[i] = x[i] - hi;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (hi + hi)
        })
        .collect()
}

/// Central-difference Hessian from function values with per-coordinate
/// steps `h[k]`, symmetrized.
pub fn numerical_hessian<T: Real>(f: impl Fn(&[T]) -> T, x: &[T], h: &[T]) -> Vec<T> {
    let n = x.len();
    let f0 = f(x);
    let mut hess = vec![T::zero(); n * n];
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        xp[i] = x[i];
        hess[i * n + i] = (fp - f0 - f0 + fm) / (h[i] * h[i]);
        for j in (i + 1)..n {
            let mut g = |di: T, dj: T| {
                xp[i] = x[i] + di;
                xp[j] = x[j] + dj;
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let fpp = g(h[i], h[j]);
            let fpm = g(h[i], -h[j]);
            let fmp = g(-h[i], h[j]);
            let fmm = g(-h[i], -h[j]);
            let v = (fpp - fpm - fmp + fmm) / (T::lit(4.0) * h[i] * h[j]);
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    hess
}

/// Quasi-Newton (BFGS) minimization with backtracking Armijo line search.
pub fn bfgs<T: Real>(
    f: impl Fn(&[T]) -> T,
    grad: impl Fn(&[T]) -> Vec<T>,
    x0: &[T],
    opts: &BfgsOptions<T>,
) -> Minimum<T> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut h_inv = crate::dense::identity::<T>(n);
    let mut evaluations = 1;
    let mut trace = vec![(x.clone(), fx)];
    let inf_norm = |v: &[T]| v.iter().fold(T::zero(), |m, a| m.max(a.abs()));
    let mut converged = inf_norm(&g) <= opts.g_tol;
    let mut iterations = 0;
    let c1 = T::lit(1e-4);
    let mut stalled = 0;

    while !converged && iterations < opts.max_iter && fx.is_finite() {
        iterations += 1;
        let mut dir: Vec<T> = (0..n)
            .map(|i| -(0..n).map(|j| h_inv[i * n + j] * g[j]).sum::<T>())
            .collect();
        let mut slope: T = dir.iter().zip(&g).map(|(d, gi)| *d * *gi).sum();
        if !(slope < T::zero()) {
            // not a descent direction: reset to steepest descent
            h_inv = crate::dense::identity(n);
            dir = g.iter().map(|v| -*v).collect();
            slope = -g.iter().map(|v| *v * *v).sum::<T>();
        }
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<T> = x.iter().zip(&dir).map(|(a, d)| *a + step * *d).collect();
            let fnew = f(&xn);
            evaluations += 1;
            // tolerate rounding noise in f so the gradient can keep shrinking
            let noise = T::lit(4.0) * T::epsilon() * fx.abs();
            if fnew.is_finite() && fnew <= fx + c1 * step * slope + noise {
                accepted = Some((xn, fnew));
                break;
            }
            step *= T::lit(0.5);
        }
        let Some((xn, fnew)) = accepted else {
            break;
        };
        let gn = grad(&xn);
        let s: Vec<T> = xn.iter().zip(&x).map(|(a, b)| *a - *b).collect();
        let yv: Vec<T> = gn.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        let sy: T = s.iter().zip(&yv).map(|(a, b)| *a * *b).sum();
        if sy > T::epsilon() * T::lit(1e2) * (s.iter().map(|v| *v * *v).sum::<T>()).sqrt()
            * (yv.iter().map(|v| *v * *v).sum::<T>()).sqrt()
        {
            if iterations == 1 {
                // scale the initial inverse Hessian
                let yy: T = yv.iter().map(|v| *v * *v).sum();
                let scale = sy / yy;
                h_inv.iter_mut().for_each(|v| *v *= scale);
            }
            let rho = T::one() / sy;
            let hy: Vec<T> = (0..n)
                .map(|i| (0..n).map(|j| h_inv[i * n + j] * yv[j]).sum())
                .collect();
            let yhy: T = yv.iter().zip(&hy).map(|(a, b)| *a * *b).sum();
            for i in 0..n {
                for j in 0..n {
                    h_inv[i * n + j] += (T::one() + rho * yhy) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let small_change = (fx - fnew).abs() <= T::epsilon() * fx.abs().max(T::one());
        stalled = if small_change { stalled + 1 } else { 0 };
        x = xn;
        fx = fnew;
        g = gn;
        trace.push((x.clone(), fx));
        converged = inf_norm(&g) <= opts.g_tol;
        if stalled >= 5 && !converged {
            // no further progress possible at working precision
            break;
        }
    }
    Minimum {
        x,
        f: fx,
        iterations,
        evaluations,
        converged,
        trace,
    }
}
