use ndarray::ArrayView1;

use super::{minimize_local, FitConfig, LocalFit, SiteData};
use crate::dense::psd_floor;
use crate::optim::numerical_hessian;
use crate::scalar::Real;

/// Eigenvalue floor applied to numerical information matrices.
pub const INFO_EIGEN_FLOOR: f64 = 1e-8;

/// Predictive mean and standard deviation, `σ = (e^γ + e^δ v)^{1/2}`.
pub fn ngr_predict<T: Real>(theta: &[T], m: T, v: T) -> (T, T) {
    let mu = theta[0] + theta[1] * m;
    let sigma = (theta[2].exp() + theta[3].exp() * v).sqrt();
    (mu, sigma)
}

/// Gaussian log-likelihood of the NGR model at one site.
pub fn ngr_loglik<T: Real>(
    theta: &[T],
    y: ArrayView1<'_, T>,
    m: ArrayView1<'_, T>,
    v: ArrayView1<'_, T>,
) -> T {
    let half = T::lit(0.5);
    let c = crate::scalar::half_ln_2pi::<T>();
    y.iter()
        .zip(m.iter())
        .zip(v.iter())
        .map(|((&yt, &mt), &vt)| {
            let mu = theta[0] + theta[1] * mt;
            let var = theta[2].exp() + theta[3].exp() * vt;
            let r = yt - mu;
            -c - half * var.ln() - half * r * r / var
        })
        .sum()
}

/// Gradient of [`ngr_loglik`].
pub fn ngr_score(theta: &[f64], site: SiteData<'_>) -> Vec<f64> {
    let (eg, ed) = (theta[2].exp(), theta[3].exp());
    let mut g = vec![0.0; 4];
    for ((&yt, &mt), &vt) in site.y.iter().zip(site.m.iter()).zip(site.v.iter()) {
        let var = eg + ed * vt;
        let r = yt - theta[0] - theta[1] * mt;
        let dvar = 0.5 * (r * r / var - 1.0) / var;
        g[0] += r / var;
        g[1] += r * mt / var;
        g[2] += dvar * eg;
        g[3] += dvar * ed * vt;
    }
    g
}

/// Starting point derived from the MOS closed form at the same site.
fn initial_point(site: SiteData<'_>) -> Vec<f64> {
    let n = site.n_times() as f64;
    let m_bar = site.m_bar();
    let y_bar = site.y.sum() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&yt, &mt) in site.y.iter().zip(site.m.iter()) {
        sxx += (mt - m_bar).powi(2);
        sxy += (mt - m_bar) * (yt - y_bar);
    }
    let beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let msr = site
        .y
        .iter()
        .zip(site.m.iter())
        .map(|(&yt, &mt)| (yt - y_bar - beta * (mt - m_bar)).powi(2))
        .sum::<f64>()
        / n;
    let tau = if msr > 0.0 { msr.ln() } else { 0.0 };
    let alpha = y_bar - beta * m_bar;
    let mean_v = site.v.sum() / n;
    let (gamma, delta) = if mean_v > 0.0 {
        let r = (mean_v / tau.exp()).clamp(0.01, 0.5);
        (tau + (1.0 - r).ln(), (r * tau.exp() / mean_v).ln())
    } else {
        (tau, -5.0)
    };
    vec![alpha, beta, gamma, delta]
}

/// Ridge-penalized NGR fit at one site with a central-difference
/// information matrix of the unpenalized likelihood.
pub fn fit_ngr_site(site: SiteData<'_>, s: usize, config: &FitConfig) -> LocalFit<f64> {
    let ridge = &config.ridge;
    let objective = |th: &[f64]| -ngr_loglik(th, site.y, site.m, site.v) + ridge.penalty(th);
    let gradient = |th: &[f64]| {
        let pen = ridge.penalty_gradient(th);
        ngr_score(th, site)
            .into_iter()
            .zip(pen)
            .map(|(g, p)| p - g)
            .collect()
    };
    let x0 = initial_point(site);
    let (theta_hat, converged) = minimize_local(objective, gradient, &x0, site.n_times(), s, config);
    let steps: Vec<f64> = theta_hat.iter().map(|t| (1e-4 * t.abs()).max(1e-4)).collect();
    let nll = |th: &[f64]| -ngr_loglik(th, site.y, site.m, site.v);
    let hess = numerical_hessian(nll, &theta_hat, &steps);
    let (info, info_floored) = psd_floor(&hess, 4, INFO_EIGEN_FLOOR);
    LocalFit {
        loglik: ngr_loglik(&theta_hat, site.y, site.m, site.v),
        theta_hat,
        info,
        converged,
        info_floored,
        degenerate_variance: site.v.iter().all(|&x| x == 0.0),
    }
}
