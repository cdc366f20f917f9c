use ndarray::ArrayView1;

use super::{minimize_local, FitConfig, LocalFit, SiteData};
use crate::scalar::Real;

/// Forecast probability `logistic(α + β m)`, clamped into the open unit
/// interval so that it stays strictly inside `(0, 1)` in floating point.
pub fn logreg_prob<T: Real>(theta: &[T], m: T) -> T {
    let eta = theta[0] + theta[1] * m;
    let p = T::one() / (T::one() + (-eta).exp());
    let hi = T::one() - T::epsilon() * T::lit(0.5);
    p.max(T::min_positive_value()).min(hi)
}

fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Bernoulli log-likelihood `Σ y η − log(1 + e^η)`.
pub fn logreg_loglik<T: Real>(theta: &[T], y: ArrayView1<'_, T>, m: ArrayView1<'_, T>) -> T {
    y.iter()
        .zip(m.iter())
        .map(|(&yt, &mt)| {
            let eta = theta[0] + theta[1] * mt;
            yt * eta - softplus(eta)
        })
        .sum()
}

/// Gradient of [`logreg_loglik`].
pub fn logreg_score(theta: &[f64], site: SiteData<'_>) -> Vec<f64> {
    let (mut ga, mut gb) = (0.0, 0.0);
    for (&yt, &mt) in site.y.iter().zip(site.m.iter()) {
        let r = yt - logistic(theta[0] + theta[1] * mt);
        ga += r;
        gb += r * mt;
    }
    vec![ga, gb]
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Observed (= expected) information `Σ p(1−p) [1 m; m m²]`.
pub fn logreg_information(theta: &[f64], m: ArrayView1<'_, f64>) -> Vec<f64> {
    let mut info = [0.0; 3];
    for &mt in m.iter() {
        let p = logistic(theta[0] + theta[1] * mt);
        let w = p * (1.0 - p);
        info[0] += w;
        info[1] += w * mt;
        info[2] += w * mt * mt;
    }
    vec![info[0], info[1], info[1], info[2]]
}

/// Ridge-penalized logistic regression at one site.
pub fn fit_logreg_site(site: SiteData<'_>, s: usize, config: &FitConfig) -> LocalFit<f64> {
    let rate = site.y.sum() / site.n_times() as f64;
    let logit = (rate / (1.0 - rate)).ln();
    let alpha0 = if logit.is_nan() { 0.0 } else { logit.clamp(-5.0, 5.0) };
    let ridge = &config.ridge;
    let objective = |th: &[f64]| -logreg_loglik(th, site.y, site.m) + ridge.penalty(th);
    let gradient = |th: &[f64]| {
        let pen = ridge.penalty_gradient(th);
        logreg_score(th, site)
            .into_iter()
            .zip(pen)
            .map(|(g, p)| p - g)
            .collect()
    };
    let (theta_hat, converged) = minimize_local(objective, gradient, &[alpha0, 0.0], site.n_times(), s, config);
    LocalFit {
        loglik: logreg_loglik(&theta_hat, site.y, site.m),
        info: logreg_information(&theta_hat, site.m),
        theta_hat,
        converged,
        info_floored: false,
        degenerate_variance: false,
    }
}
