use super::*;
use approx::assert_relative_eq;
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

/// `∫ (F(x) − 1{x ≥ y})² dx` by composite Simpson, split at `y`.
fn crps_quadrature(mu: f64, sigma: f64, y: f64) -> f64 {
    let cdf = |x: f64| 0.5 * libm::erfc(-(x - mu) / (sigma * std::f64::consts::SQRT_2));
    let simpson = |a: f64, b: f64, g: &dyn Fn(f64) -> f64| {
        let n = 40_000;
        let h = (b - a) / n as f64;
        let mut acc = g(a) + g(b);
        for i in 1..n {
            acc += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    let lo = (mu - 14.0 * sigma).min(y);
    let hi = (mu + 14.0 * sigma).max(y);
    simpson(lo, y, &|x| cdf(x).powi(2)) + simpson(y, hi, &|x| (1.0 - cdf(x)).powi(2))
}

#[test]
fn mse_examples() {
    let y = array![[0.0, 2.0]];
    assert_eq!(mse(&ForecastSet::point(y.clone(), y.clone()).unwrap()).unwrap().spatial_mean, 0.0);
    let r = mse(&ForecastSet::point(array![[1.0, 1.0]], y.clone()).unwrap()).unwrap();
    assert_eq!(r.spatial_mean, 1.0);
    let shifted = mse(&ForecastSet::point(array![[4.0, 4.0]], &y + 3.0).unwrap()).unwrap();
    assert_eq!(shifted.spatial_mean, 1.0);
    assert!(mse(&ForecastSet::probability(array![[0.5, 0.5]], array![[0.0, 1.0]]).unwrap()).is_err());
}

#[test]
fn brier_examples() {
    let y = array![[1.0, 0.0]];
    assert_eq!(brier(&ForecastSet::probability(y.clone(), y.clone()).unwrap()).unwrap().spatial_mean, 0.0);
    let half = brier(&ForecastSet::probability(Array2::from_elem((1, 2), 0.5), y.clone()).unwrap()).unwrap();
    assert_eq!(half.spatial_mean, 0.25);
    let r = brier(&ForecastSet::probability(array![[0.8, 0.3]], y).unwrap()).unwrap();
    assert_relative_eq!(r.spatial_mean, 0.065, epsilon = 1e-15);
    let bad = ForecastSet::probability(array![[0.8]], array![[0.5]]).unwrap();
    assert!(brier(&bad).is_err());
    assert!(ForecastSet::probability(array![[1.2]], array![[1.0]]).is_err());
}

#[test]
fn brier_is_proper() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let q = 0.3;
    let ys: Vec<f64> = (0..100_000).map(|_| if rng.random::<f64>() < q { 1.0 } else { 0.0 }).collect();
    let best = (0..=100)
        .map(|i| i as f64 / 100.0)
        .min_by(|a, b| {
            let sa: f64 = ys.iter().map(|y| (y - a).powi(2)).sum();
            let sb: f64 = ys.iter().map(|y| (y - b).powi(2)).sum();
            sa.total_cmp(&sb)
        })
        .unwrap();
    assert!((best - q).abs() <= 0.01 + 1e-12, "minimizer {best}");
}

#[test]
fn logscore_examples() {
    let one = |mu: f64, s: f64, y: f64| {
        logscore(&ForecastSet::normal(array![[mu]], array![[s]], array![[y]]).unwrap())
            .unwrap()
            .spatial_mean
    };
    assert_relative_eq!(one(0.0, 1.0, 0.0), 0.918939, epsilon = 1e-6);
    assert_relative_eq!(one(0.0, 2.0, 0.0), 1.612086, epsilon = 1e-6);
    // score differences are log density ratios
    let pdf = |mu: f64, s: f64, y: f64| (-(y - mu).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let (a, b) = (one(0.3, 1.2, 1.0), one(-0.4, 0.9, 1.0));
    assert_relative_eq!((b - a).exp(), pdf(0.3, 1.2, 1.0) / pdf(-0.4, 0.9, 1.0), epsilon = 1e-12);
    // far tails stay finite
    assert!(one(0.0, 1e-3, 1e3).is_finite());
    assert!(ForecastSet::normal(array![[0.0]], array![[0.0]], array![[0.0]]).is_err());
}

#[test]
fn crps_at_the_mean() {
    let c = crps_normal(0.0, 1.0, 0.0).unwrap();
    let exact = 2.0 / (2.0 * std::f64::consts::PI).sqrt() - 1.0 / std::f64::consts::PI.sqrt();
    assert_relative_eq!(c, exact, epsilon = 1e-15);
    assert_relative_eq!(c, 0.2336950, epsilon = 1e-7);
    assert_relative_eq!(c, crps_quadrature(0.0, 1.0, 0.0), epsilon = 1e-6);
    assert!(crps_normal(0.0, 0.0, 1.0).is_err());
}

#[test]
fn crps_matches_quadrature_on_grid() {
    for zi in -3..=3 {
        for sigma in [0.1, 1.0, 10.0] {
            let mu = 0.7;
            let y = mu + zi as f64 * sigma;
            let c = crps_normal(mu, sigma, y).unwrap();
            let q = crps_quadrature(mu, sigma, y);
            assert!((c - q).abs() < 1e-6, "z={zi} σ={sigma}: {c} vs {q}");
        }
    }
    assert_relative_eq!(crps_normal(0.0, 1.0, 1.0).unwrap(), crps_quadrature(0.0, 1.0, 1.0), epsilon = 1e-6);
}

#[test]
fn crps_scale_equivariance() {
    let a = crps_normal(1.0, 0.5, 1.8).unwrap();
    let b = crps_normal(1.0, 1.0, 2.6).unwrap();
    assert_relative_eq!(b, 2.0 * a, epsilon = 1e-14);
}

#[test]
fn corrupting_a_good_forecast_increases_every_score() {
    let y = array![[0.1, -0.5, 1.2], [0.0, 0.3, -0.2]];
    let mu = y.clone();
    let sigma = Array2::from_elem(y.dim(), 1.0);
    let good = ForecastSet::normal(mu.clone(), sigma.clone(), y.clone()).unwrap();
    let bad = ForecastSet::normal(&mu + 0.5, sigma, y.clone()).unwrap();
    for m in [Metric::Mse, Metric::LogScore, Metric::Crps] {
        assert!(score(m, &bad).unwrap().spatial_mean > score(m, &good).unwrap().spatial_mean);
    }
    let events = array![[1.0, 0.0]];
    let sharp = ForecastSet::probability(array![[0.9, 0.1]], events.clone()).unwrap();
    let blurred = ForecastSet::probability(array![[0.6, 0.4]], events).unwrap();
    assert!(brier(&blurred).unwrap().spatial_mean > brier(&sharp).unwrap().spatial_mean);
}

#[test]
fn spatial_mean_is_mean_of_map() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let y = Array2::from_shape_fn((7, 5), |_| rng.random_range(-1.0..1.0));
    let mu = Array2::from_shape_fn((7, 5), |_| rng.random_range(-1.0..1.0));
    let r = mse(&ForecastSet::point(mu, y).unwrap()).unwrap();
    let m = r.per_location.iter().sum::<f64>() / 7.0;
    assert!((r.spatial_mean - m).abs() < 1e-12);
    let t = r.per_time.iter().sum::<f64>() / 5.0;
    assert!((r.spatial_mean - t).abs() < 1e-12);
    assert!(r.stderr > 0.0);
}

#[test]
fn pit_calibrated_and_underdispersed() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let n = (100, 400);
    let mu = Array2::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
    let sigma = Array2::from_shape_fn(n, |_| rng.random_range(0.5..2.0));
    let z = Normal::new(0.0, 1.0).unwrap();
    let y = ndarray::Zip::from(&mu).and(&sigma).map_collect(|m, s| m + s * z.sample(&mut rng));
    let good = pit(&ForecastSet::normal(mu.clone(), sigma.clone(), y.clone()).unwrap(), 10).unwrap();
    assert_eq!(good.counts.iter().sum::<usize>(), 40_000);
    assert!(good.max_standardized_deviation() < 4.0);

    let narrow = pit(&ForecastSet::normal(mu, &sigma * 0.5, y).unwrap(), 10).unwrap();
    let expect = 4000;
    assert!(narrow.counts[0] > expect && narrow.counts[9] > expect);
    assert!(narrow.counts[4] < expect && narrow.counts[5] < expect);
}

#[test]
fn pit_of_perfect_point_is_central_bin() {
    let mu = array![[1.0, 2.0, 3.0]];
    let h = pit(&ForecastSet::normal(mu.clone(), Array2::from_elem((1, 3), 1.0), mu).unwrap(), 10).unwrap();
    assert_eq!(h.counts[5], 3);
    assert_eq!(h.bin_edges(5), (0.5, 0.6));
}

#[test]
fn csv_writers_emit_headers() {
    let dir = tempfile::tempdir().unwrap();
    let r = mse(&ForecastSet::point(array![[1.0, 1.0]], array![[0.0, 2.0]]).unwrap()).unwrap();
    let grid = crate::grid_data::GridSpec::regular(2, 2, 0.0, 0.0, 1.0).unwrap();
    let rep = ScoreReport::from_scores(Metric::Mse, &Array2::from_elem((4, 2), 1.0));
    write_scores(&dir.path().join("s.csv"), &[ScoreRow::new("mle", "day1", &r)]).unwrap();
    write_score_map(&dir.path().join("m.csv"), &ScoreMapRow::from_report("mle", &grid, &rep)).unwrap();
    let h = PitHistogram { counts: vec![1, 2], total: 3 };
    write_pit(&dir.path().join("p.csv"), &PitRow::from_histogram("mle", &h)).unwrap();
    let s = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(s.lines().next(), Some("metric,method,lead_time,value,stderr"));
    let m = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(m.lines().count(), 5);
    let p = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(p, "method,bin_lo,bin_hi,count\nmle,0.0,0.5,1\nmle,0.5,1.0,2\n");
}
