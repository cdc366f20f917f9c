use ndarray::ArrayView1;

use super::{LocalFit, SiteData};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// MOS log-likelihood at one site; `theta = (α, β, τ)`.
pub fn mos_loglik<T: Real>(theta: &[T], y: ArrayView1<'_, T>, m: ArrayView1<'_, T>, m_bar: T) -> T {
    let (alpha, beta, tau) = (theta[0], theta[1], theta[2]);
    let n = T::from_usize_lossy(y.len());
    let sse: T = y
        .iter()
        .zip(m.iter())
        .map(|(&yt, &mt)| {
            let r = yt - (alpha + beta * (mt - m_bar));
            r * r
        })
        .sum();
    -n * crate::scalar::half_ln_2pi::<T>() - n * tau * T::lit(0.5) - T::lit(0.5) * (-tau).exp() * sse
}

/// Analytic gradient of [`mos_loglik`].
pub(crate) fn mos_score(site: SiteData<'_>, theta: &[f64]) -> Vec<f64> {
    let (alpha, beta, tau) = (theta[0], theta[1], theta[2]);
    let m_bar = site.m_bar();
    let w = (-tau).exp();
    let (mut ga, mut gb, mut sse) = (0.0, 0.0, 0.0);
    for (&yt, &mt) in site.y.iter().zip(site.m.iter()) {
        let c = mt - m_bar;
        let r = yt - (alpha + beta * c);
        ga += r;
        gb += r * c;
        sse += r * r;
    }
    let n = site.n_times() as f64;
    vec![w * ga, w * gb, -0.5 * n + 0.5 * w * sse]
}

/// Closed-form MOS fit at site `s`.
pub fn fit_mos_site(site: SiteData<'_>, s: usize) -> Result<LocalFit<f64>> {
    let n = site.n_times() as f64;
    let m_bar = site.m_bar();
    let y_bar = site.y.sum() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&yt, &mt) in site.y.iter().zip(site.m.iter()) {
        let c = mt - m_bar;
        sxx += c * c;
        sxy += c * (yt - y_bar);
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateCovariate { site: s });
    }
    let beta = sxy / sxx;
    let sse: f64 = site
        .y
        .iter()
        .zip(site.m.iter())
        .map(|(&yt, &mt)| {
            let r = yt - y_bar - beta * (mt - m_bar);
            r * r
        })
        .sum();
    let msr = sse / n;
    if !(msr > 0.0) {
        return Err(Error::DegenerateFit { site: s });
    }
    let tau = msr.ln();
    let w = 1.0 / msr;
    let theta_hat = vec![y_bar, beta, tau];
    #[rustfmt::skip]
    let info = vec![
        n * w, 0.0, 0.0,
        0.0, sxx * w, 0.0,
        0.0, 0.0, 0.5 * n,
    ];
    Ok(LocalFit {
        loglik: mos_loglik(&theta_hat, site.y, site.m, m_bar),
        theta_hat,
        info,
        converged: true,
        info_floored: false,
        degenerate_variance: false,
    })
}
