use super::*;
use crate::spatial_prior::make_structure;
use crate::testutil::{dense, dense_information, dvec, max_rel_err, random_field};
use approx::assert_relative_eq;
use nalgebra::DMatrix;

fn grid(ni: usize, nj: usize) -> GridSpec {
    GridSpec::regular(ni, nj, 50.0, 5.0, 0.5).unwrap()
}

#[test]
fn ordering_round_trip_and_layout() {
    let o = ParamOrdering::new(3, 4);
    let v: Vec<usize> = (0..12).collect();
    let blocked = o.to_blocked(&v);
    // site 1, parameter 2 sits at interleaved index 5 and blocked index 9
    assert_eq!(blocked[9], 5);
    assert_eq!(o.to_interleaved(&blocked), v);
    assert_eq!(o.locate_blocked(9), (1, 2));
}

#[test]
fn single_site_information_is_unpermuted() {
    let g = GridSpec::regular(2, 2, 0.0, 0.0, 1.0).unwrap();
    let f = random_field(&g, 3, false, 1);
    let sub = MleField::new(g.clone(), f.kind, f.fits.clone()).unwrap();
    let j = assemble_information(&sub, &ParamOrdering::for_field(&sub)).unwrap();
    let dj = dense(&j.matrix);
    for a in 0..3 {
        for b in 0..3 {
            assert_eq!(dj[(a * 4, b * 4)], sub.fits[0].info[a * 3 + b]);
        }
    }
    assert!(j.floored_sites.is_empty());
}

#[test]
fn identity_blocks_give_identity() {
    let g = GridSpec::regular(2, 2, 0.0, 0.0, 1.0).unwrap();
    let mut f = random_field(&g, 2, false, 2);
    for fit in &mut f.fits {
        fit.info = vec![1.0, 0.0, 0.0, 1.0];
    }
    let j = assemble_information(&f, &ParamOrdering::for_field(&f)).unwrap();
    assert_eq!(dense(&j.matrix), DMatrix::identity(8, 8));
}

#[test]
fn permuted_quadratic_form_matches_blockwise_sum() {
    let g = GridSpec::regular(3, 2, 0.0, 0.0, 1.0).unwrap();
    let f = random_field(&g, 2, false, 3);
    let o = ParamOrdering::for_field(&f);
    let j = assemble_information(&f, &o).unwrap().matrix;
    let theta: Vec<f64> = (0..12).map(|i| (i as f64 * 0.77).sin()).collect();
    let interleaved = o.to_interleaved(&theta);
    let oracle: f64 = f
        .fits
        .iter()
        .enumerate()
        .map(|(s, fit)| {
            let t = &interleaved[2 * s..2 * s + 2];
            (0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .map(|(a, b)| t[a] * fit.info[a * 2 + b] * t[b])
                .sum::<f64>()
        })
        .sum();
    assert_relative_eq!(j.quad_form(&theta).unwrap(), oracle, epsilon = 1e-12);
}

#[test]
fn zero_prior_returns_mles() {
    let g = grid(3, 3);
    let f = random_field(&g, 2, false, 4);
    let st = make_structure::<f64>(&g).unwrap();
    let q = block_precision(&st.r, &[0.0, 0.0]).unwrap();
    let j = assemble_information(&f, &ParamOrdering::for_field(&f)).unwrap().matrix;
    let mean = posterior_mean(&q, &j, &f.theta_blocked(), &vec![0.0; 18]).unwrap();
    assert!(max_rel_err(&mean, &f.theta_blocked()) < 1e-12);
}

#[test]
fn huge_precision_gives_weighted_constant() {
    let g = grid(2, 2);
    let st = make_structure::<f64>(&g).unwrap();
    let q = block_precision(&st.r, &[1e10]).unwrap();
    let j = SparseSym::identity(4);
    let mean = posterior_mean(&q, &j, &[0.0, 2.0, 4.0, 6.0], &[0.0; 4]).unwrap();
    // condition number ~1e10, so rounding alone allows ~1e-6
    for m in mean {
        assert_relative_eq!(m, 3.0, epsilon = 1e-5);
    }
}

#[test]
fn matches_dense_posterior_with_prior_mean() {
    let g = grid(4, 4);
    let f = random_field(&g, 3, false, 5);
    let st = make_structure::<f64>(&g).unwrap();
    let mu: Vec<f64> = (0..48).map(|i| (i as f64 * 0.3).cos()).collect();
    let prior = PriorSpec::new(st, vec![2.0, 30.0, 0.5]).with_prior_mean(mu.clone()).unwrap();
    let res = smooth_full(&f, &prior).unwrap();

    let q = dense(&assemble_q(&prior).unwrap());
    let j = dense_information(&f);
    let cov = (&q + &j).try_inverse().unwrap();
    let mean = &cov * (&q * dvec(&mu) + &j * dvec(&f.theta_blocked()));
    assert!(max_rel_err(&res.posterior_mean, mean.as_slice()) < 1e-8);
    let var: Vec<f64> = cov.diagonal().iter().copied().collect();
    assert!(max_rel_err(&res.posterior_var, &var) < 1e-8);
    assert!(res.posterior_var.iter().all(|v| *v > 0.0));
}

#[test]
fn marginal_variance_special_cases() {
    let d = [2.0, 4.0, 0.5, 8.0];
    let var = posterior_marginal_variance(&SparseSym::from_diagonal(&[0.0; 4]), &SparseSym::from_diagonal(&d)).unwrap();
    for (v, di) in var.iter().zip(d) {
        assert_relative_eq!(*v, 1.0 / di, epsilon = 1e-15);
    }
    let g = grid(3, 4);
    let f = random_field(&g, 2, false, 6);
    let st = make_structure::<f64>(&g).unwrap();
    let j = assemble_information(&f, &ParamOrdering::for_field(&f)).unwrap().matrix;
    let v1 = posterior_marginal_variance(&block_precision(&st.r, &[1.0, 1.0]).unwrap(), &j).unwrap();
    let v10 = posterior_marginal_variance(&block_precision(&st.r, &[10.0, 10.0]).unwrap(), &j).unwrap();
    assert!(v10.iter().zip(&v1).all(|(a, b)| a <= b));
}

#[test]
fn diagonal_approximation_examples() {
    let o = ParamOrdering::new(2, 1);
    let j = SparseSym::new(CscMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap()).unwrap();
    let jt = diagonal_approximation(&j, &o).unwrap();
    assert_relative_eq!(jt.get(0, 0), 1.5, epsilon = 1e-15);
    assert_relative_eq!(jt.get(1, 1), 1.5, epsilon = 1e-15);
    assert_eq!(jt.get(0, 1), 0.0);

    let d = SparseSym::from_diagonal(&[3.0, 7.0]);
    assert_eq!(diagonal_approximation(&d, &o).unwrap().diagonal(), vec![3.0, 7.0]);

    let singular = SparseSym::new(CscMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap()).unwrap();
    assert!(matches!(diagonal_approximation(&singular, &o), Err(Error::SingularBlock { site: 0 })));
}

#[test]
fn independent_equals_full_for_diagonal_information() {
    let g = grid(5, 4);
    let f = random_field(&g, 3, true, 7);
    let st = make_structure::<f64>(&g).unwrap();
    let prior = PriorSpec::new(st, vec![5.0, 50.0, 0.3]);
    let full = smooth_full(&f, &prior).unwrap();
    let ind = smooth_independent(&f, &prior).unwrap();
    assert!(max_rel_err(&ind.posterior_mean, &full.posterior_mean) < 1e-10);
    assert!(max_rel_err(&ind.posterior_var, &full.posterior_var) < 1e-10);
    assert_eq!(ind.method, SmoothMethod::DiagonalIndependent);
}

#[test]
fn independent_differs_for_correlated_information() {
    let g = grid(4, 4);
    let f = random_field(&g, 4, false, 8);
    let st = make_structure::<f64>(&g).unwrap();
    let prior = PriorSpec::new(st, vec![5.0; 4]);
    let full = smooth_full(&f, &prior).unwrap();
    let ind = smooth_independent(&f, &prior).unwrap();
    let diff: f64 = full
        .posterior_mean
        .iter()
        .zip(&ind.posterior_mean)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(diff > 1e-3, "difference norm {diff}");
}

#[test]
fn posterior_mean_minimizes_penalized_distance() {
    let g = grid(4, 3);
    let f = random_field(&g, 2, false, 9);
    let st = make_structure::<f64>(&g).unwrap();
    let prior = PriorSpec::new(st, vec![3.0, 0.7]);
    let res = smooth_full(&f, &prior).unwrap();
    let q = assemble_q(&prior).unwrap();
    let j = assemble_information(&f, &ParamOrdering::for_field(&f)).unwrap().matrix;
    let th = f.theta_blocked();
    let obj = |x: &[f64]| {
        let d: Vec<f64> = x.iter().zip(&th).map(|(a, b)| a - b).collect();
        j.quad_form(&d).unwrap() + q.quad_form(x).unwrap()
    };
    let best = obj(&res.posterior_mean);
    for k in 0..20 {
        let x: Vec<f64> = res
            .posterior_mean
            .iter()
            .enumerate()
            .map(|(i, v)| v + 1e-3 * ((i * 31 + k * 17) as f64).sin())
            .collect();
        assert!(obj(&x) >= best - 1e-9);
    }
    // the smoothed field is no rougher than the MLE field
    assert!(q.quad_form(&res.posterior_mean).unwrap() <= q.quad_form(&th).unwrap());
}

#[test]
fn degenerate_information_is_located() {
    let g = grid(3, 3);
    let mut f = random_field(&g, 2, false, 10);
    for fit in &mut f.fits {
        fit.info = vec![0.0; 4];
    }
    let st = make_structure::<f64>(&g).unwrap();
    let err = smooth_full(&f, &PriorSpec::new(st, vec![1e6, 1e6])).unwrap_err();
    assert!(matches!(err, Error::PosteriorNotPositiveDefinite { .. }), "{err}");
}

#[test]
fn non_psd_block_is_floored_and_reported() {
    let g = grid(3, 3);
    let mut f = random_field(&g, 2, false, 11);
    f.fits[4].info = vec![1.0, 2.0, 2.0, 1.0];
    let j = assemble_information(&f, &ParamOrdering::for_field(&f)).unwrap();
    assert_eq!(j.floored_sites, vec![4]);
    let st = make_structure::<f64>(&g).unwrap();
    assert!(smooth_full(&f, &PriorSpec::new(st, vec![1.0, 1.0])).is_ok());
}

#[test]
fn f32_smoothing_tracks_f64() {
    let g = grid(4, 4);
    let f = random_field(&g, 2, false, 12);
    let st = make_structure::<f64>(&g).unwrap();
    let r64 = smooth_full(&f, &PriorSpec::new(st, vec![4.0, 4.0])).unwrap();
    let f32f = f.cast::<f32>();
    let st32 = make_structure::<f32>(&g).unwrap();
    let r32 = smooth_full(&f32f, &PriorSpec::new(st32, vec![4.0f32, 4.0])).unwrap();
    for (a, b) in r32.posterior_mean.iter().zip(&r64.posterior_mean) {
        assert!((*a as f64 - b).abs() < 1e-4 * b.abs().max(1.0));
    }
}

#[test]
fn csv_round_trip() {
    let g = grid(3, 2);
    let f = random_field(&g, 3, false, 13);
    let st = make_structure::<f64>(&g).unwrap();
    let res = smooth_full(&f, &PriorSpec::new(st, vec![1.5, 2.5, 3.5])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("smooth.csv");
    write_smooth_result(&res, &path).unwrap();
    assert_eq!(read_smooth_result(&path).unwrap(), res);
}
