mod common;

use acceval_core::distributions::{
    BoundedComponent, BoundedExponential, BoundedNormal, BoundedNormalMixture, MixtureComponent,
};
use acceval_core::fitting::{
    fit_bounded_exponential, fit_bounded_normal, fit_mixture_em, fit_piece_weights, fit_piecewise,
    log_likelihood, quantile_knots, responsibilities,
};
use acceval_core::{
    stream_rng, Dataset, EmConfig, FitConfig, FitError, PieceFamily, PiecewiseMixture,
};
use common::phi;
use proptest::prelude::*;
use rand::Rng;

/// Bounded exponential log-likelihood written straight from its definition.
fn exp_objective(rate: f64, xs: &[f64], lo: f64, hi: f64) -> f64 {
    let n = xs.len() as f64;
    let z = if hi.is_finite() {
        (-rate * lo).exp() - (-rate * hi).exp()
    } else {
        (-rate * lo).exp()
    };
    n * rate.ln() - n * z.ln() - rate * xs.iter().sum::<f64>()
}

/// Bounded zero-mean normal log-likelihood via an erfc-free series of panels.
fn normal_objective(sigma: f64, xs: &[f64], lo: f64, hi: f64) -> f64 {
    let n = xs.len() as f64;
    let hi_q = if hi.is_finite() {
        hi
    } else {
        lo.max(0.0) + 40.0 * sigma
    };
    let mass = common::integrate_panels(|x| phi(x / sigma) / sigma, lo, hi_q, 64, 1e-14);
    -xs.iter().map(|x| x * x).sum::<f64>() / (2.0 * sigma * sigma) - n * sigma.ln() - n * mass.ln()
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while (b - a).abs() > tol {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

fn draws(c: &BoundedComponent, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| c.sample(&mut rng)).collect()
}

#[test]
fn unbounded_exponential_rate_is_inverse_mean() {
    let fit = fit_bounded_exponential(&[0.5, 1.5], 0.0, f64::INFINITY).unwrap();
    assert!((fit.distribution.rate() - 1.0).abs() < 1e-7);
}

#[test]
fn bounded_exponential_recovery_matches_golden_section_oracle() {
    let truth: BoundedComponent = BoundedExponential::new(2.0, 0.0, 1.0).unwrap().into();
    let xs = draws(&truth, 10_000, 1);
    let fit = fit_bounded_exponential(&xs, 0.0, 1.0).unwrap();
    let rate = fit.distribution.rate();
    assert!((1.9..=2.1).contains(&rate), "rate {rate}");
    let oracle = golden_section_max(|r| exp_objective(r, &xs, 0.0, 1.0), 0.01, 20.0, 1e-6);
    assert!((rate - oracle).abs() < 1e-5, "{rate} vs {oracle}");
    let f = |r| exp_objective(r, &xs, 0.0, 1.0);
    assert!(f(rate) >= f(rate + 0.01) && f(rate) >= f(rate - 0.01));
    // Grid validation hook: no grid point beats the optimizer.
    for i in 1..400 {
        assert!(f(rate) >= f(i as f64 * 0.05) - 1e-9);
    }
}

#[test]
fn exponential_fit_on_shifted_support() {
    let truth: BoundedComponent = BoundedExponential::new(40.0, 0.04, 0.1).unwrap().into();
    let xs = draws(&truth, 20_000, 2);
    let fit = fit_bounded_exponential(&xs, 0.04, 0.1).unwrap();
    let oracle = golden_section_max(|r| exp_objective(r, &xs, 0.04, 0.1), 1.0, 200.0, 1e-6);
    assert!((fit.distribution.rate() - oracle).abs() < 1e-4);
    assert!((fit.distribution.rate() / 40.0 - 1.0).abs() < 0.05);
}

#[test]
fn exponential_fit_rejects_degenerate_data() {
    assert!(matches!(
        fit_bounded_exponential(&[0.0, 0.0], 0.0, 1.0),
        Err(FitError::Degenerate(_))
    ));
    assert!(matches!(
        fit_bounded_exponential(&[2.0], 0.0, 1.0),
        Err(FitError::OutOfSupport { .. })
    ));
    assert!(matches!(
        fit_bounded_exponential(&[], 0.0, 1.0),
        Err(FitError::EmptyDataset)
    ));
}

#[test]
fn increasing_data_on_a_finite_piece_hits_the_rate_floor() {
    let fit = fit_bounded_exponential(&[0.8, 0.9, 0.95], 0.0, 1.0).unwrap();
    assert!(fit.at_lower_limit);
    assert!(fit.distribution.rate() > 0.0);
}

#[test]
fn unbounded_normal_sigma_is_rms() {
    let sigma = fit_bounded_normal(&[-1.0, 1.0], f64::NEG_INFINITY, f64::INFINITY)
        .unwrap()
        .sigma();
    assert!((sigma - 1.0).abs() < 1e-7);
}

#[test]
fn bounded_normal_recovery_matches_grid_oracle() {
    let truth: BoundedComponent = BoundedNormal::centered(1.0, 0.0, 2.0).unwrap().into();
    let xs = draws(&truth, 10_000, 3);
    let sigma = fit_bounded_normal(&xs, 0.0, 2.0).unwrap().sigma();
    assert!((0.95..=1.05).contains(&sigma), "sigma {sigma}");
    let f = |s| normal_objective(s, &xs, 0.0, 2.0);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=2000 {
        let s = 0.8 + 0.0002 * i as f64;
        let v = f(s);
        if v > best.0 {
            best = (v, s);
        }
    }
    assert!((sigma - best.1).abs() < 3e-4, "{sigma} vs grid {}", best.1);
    assert!(f(sigma) >= f(sigma + 0.01) && f(sigma) >= f(sigma - 0.01));
}

#[test]
fn normal_fit_rejects_all_zero_data() {
    assert!(matches!(
        fit_bounded_normal(&[0.0, 0.0], 0.0, 1.0),
        Err(FitError::Degenerate(_))
    ));
}

#[test]
fn mle_points_dominate_relative_neighbours() {
    let truth: BoundedComponent = BoundedExponential::new(25.0, 0.1, f64::INFINITY)
        .unwrap()
        .into();
    let xs = draws(&truth, 5_000, 4);
    let rate = fit_bounded_exponential(&xs, 0.1, f64::INFINITY)
        .unwrap()
        .distribution
        .rate();
    let f = |r| exp_objective(r, &xs, 0.1, f64::INFINITY);
    assert!(f(rate) >= f(rate * (1.0 + 1e-4)) && f(rate) >= f(rate * (1.0 - 1e-4)));

    let truth: BoundedComponent = BoundedNormal::centered(0.05, 0.0, 0.25).unwrap().into();
    let xs = draws(&truth, 5_000, 5);
    let sigma = fit_bounded_normal(&xs, 0.0, 0.25).unwrap().sigma();
    let g = |s| normal_objective(s, &xs, 0.0, 0.25);
    assert!(g(sigma) >= g(sigma * (1.0 + 1e-4)) && g(sigma) >= g(sigma * (1.0 - 1e-4)));
}

#[test]
fn single_component_em_equals_bounded_normal_fit() {
    let truth: BoundedComponent = BoundedNormal::centered(0.7, 0.0, 1.5).unwrap().into();
    let xs = draws(&truth, 3_000, 6);
    let em = fit_mixture_em(&xs, 0.0, 1.5, 1, &EmConfig::default()).unwrap();
    let direct = fit_bounded_normal(&xs, 0.0, 1.5).unwrap();
    assert_eq!(em.mixture.weights(), &[1.0]);
    assert!((em.mixture.normals()[0].sigma() - direct.sigma()).abs() < 1e-6);
}

#[test]
fn responsibilities_sum_to_one() {
    let m = BoundedNormalMixture::new(
        &[
            MixtureComponent::centered(0.3, 0.1),
            MixtureComponent::centered(0.5, 0.5),
            MixtureComponent::centered(0.2, 2.0),
        ],
        0.0,
        f64::INFINITY,
    )
    .unwrap();
    let xs: Vec<f64> = (0..500).map(|i| i as f64 * 0.02).collect();
    for row in responsibilities(&m, &xs) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|t| (0.0..=1.0).contains(t)));
    }
}

fn mixture_draws(parts: &[(f64, f64)], lo: f64, hi: f64, n: usize, seed: u64) -> Vec<f64> {
    let comps: Vec<_> = parts
        .iter()
        .map(|&(p, s)| MixtureComponent::centered(p, s))
        .collect();
    let c: BoundedComponent = BoundedNormalMixture::new(&comps, lo, hi).unwrap().into();
    draws(&c, n, seed)
}

fn sorted_params(m: &BoundedNormalMixture) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = m.components().iter().map(|c| (c.sigma, c.weight)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

#[test]
fn em_recovers_scale_mixture_and_matches_multistart_oracle() {
    let xs = mixture_draws(&[(0.5, 0.5), (0.5, 2.0)], 0.0, f64::INFINITY, 20_000, 7);
    let fit = fit_mixture_em(&xs, 0.0, f64::INFINITY, 2, &EmConfig::default()).unwrap();
    let got = sorted_params(&fit.mixture);
    assert!((got[0].0 / 0.5 - 1.0).abs() < 0.1, "{got:?}");
    assert!((got[1].0 / 2.0 - 1.0).abs() < 0.1, "{got:?}");
    assert!((got[0].1 - 0.5).abs() < 0.1 && (got[1].1 - 0.5).abs() < 0.1);

    // Oracle: best of 20 random restarts.
    let mut rng = stream_rng(70, 0);
    let mut best: Option<(f64, Vec<(f64, f64)>)> = None;
    for _ in 0..20 {
        let p: f64 = rng.gen_range(0.1..0.9);
        let init = vec![
            MixtureComponent::centered(p, rng.gen_range(0.1..1.5)),
            MixtureComponent::centered(1.0 - p, rng.gen_range(1.0..5.0)),
        ];
        let cfg = EmConfig {
            initial: Some(init),
            ..EmConfig::default()
        };
        if let Ok(f) = fit_mixture_em(&xs, 0.0, f64::INFINITY, 2, &cfg) {
            if best.as_ref().map_or(true, |b| f.log_likelihood > b.0) {
                best = Some((f.log_likelihood, sorted_params(&f.mixture)));
            }
        }
    }
    let (best_ll, best_params) = best.unwrap();
    assert!(
        fit.log_likelihood >= best_ll - 0.5,
        "{} vs {}",
        fit.log_likelihood,
        best_ll
    );
    assert!((best_params[0].0 - got[0].0).abs() / got[0].0 < 0.05);
    assert!((best_params[1].0 - got[1].0).abs() / got[1].0 < 0.05);
}

#[test]
fn em_reports_empty_component() {
    let init = vec![
        MixtureComponent::centered(0.5, 1.0),
        MixtureComponent::centered(0.5, 1e-30),
    ];
    let cfg = EmConfig {
        initial: Some(init),
        ..EmConfig::default()
    };
    let err = fit_mixture_em(&[0.5, 0.7, 0.9], 0.0, 2.0, 2, &cfg).unwrap_err();
    assert!(
        matches!(err, FitError::EmptyResponsibility { component: 1, .. }),
        "{err:?}"
    );
}

#[test]
fn em_reports_component_collapse() {
    let init = vec![
        MixtureComponent::centered(0.5, 1.0),
        MixtureComponent::centered(0.5, 1e-7),
    ];
    let cfg = EmConfig {
        initial: Some(init),
        ..EmConfig::default()
    };
    let mut xs = vec![1e-9; 5];
    xs.extend([0.4, 0.9, 1.3, 0.2, 1.7]);
    let err = fit_mixture_em(&xs, 0.0, 2.0, 2, &cfg).unwrap_err();
    assert!(
        matches!(err, FitError::ComponentCollapse { component: 1, .. }),
        "{err:?}"
    );
}

#[test]
fn single_datum_log_likelihood_is_log_density() {
    let d = PiecewiseMixture::new(
        vec![0.0, 1.0, f64::INFINITY],
        vec![0.4, 0.6],
        vec![
            BoundedExponential::new(1.5, 0.0, 1.0).unwrap().into(),
            BoundedExponential::new(1.5, 1.0, f64::INFINITY)
                .unwrap()
                .into(),
        ],
    )
    .unwrap();
    let data = Dataset::new(vec![0.3]).unwrap();
    assert!((log_likelihood(&d, &data).unwrap() - d.pdf(0.3).ln()).abs() < 1e-14);
    let outside = Dataset::new(vec![-0.5]).unwrap();
    assert!(
        matches!(log_likelihood(&d, &outside), Err(FitError::OutOfSupport { value, .. }) if value == -0.5)
    );
    let zero = d.with_weights(vec![1.0, 0.0]).unwrap();
    let data = Dataset::new(vec![2.0]).unwrap();
    assert!(matches!(
        log_likelihood(&zero, &data),
        Err(FitError::ZeroWeight { piece: 1, .. })
    ));
}

#[test]
fn true_parameters_usually_beat_perturbed_ones() {
    // A memoryless piece carries the most information per datum about λ:
    // P(true wins) = P(Gamma(100) < 200 ln 1.5) ≈ 0.977 per replication.
    let truth = PiecewiseMixture::single(
        BoundedExponential::new(1.0, 0.0, f64::INFINITY)
            .unwrap()
            .into(),
    )
    .unwrap();
    let perturbed = PiecewiseMixture::single(
        BoundedExponential::new(1.5, 0.0, f64::INFINITY)
            .unwrap()
            .into(),
    )
    .unwrap();
    let mut wins = 0;
    for seed in 0..100 {
        let xs = truth.sample_n(&mut stream_rng(seed, 1), 100);
        let data = Dataset::new(xs).unwrap();
        if log_likelihood(&truth, &data).unwrap() >= log_likelihood(&perturbed, &data).unwrap() {
            wins += 1;
        }
    }
    assert!(wins >= 95, "{wins}");
}

#[test]
fn piece_weights_are_occupancy_fractions() {
    let data = Dataset::new(vec![0.1, 0.2, 0.3, 0.4, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6]).unwrap();
    assert_eq!(
        fit_piece_weights(&data, &[0.0, 1.0, 2.0]).unwrap(),
        vec![0.4, 0.6]
    );
    let data = Dataset::new(vec![0.1, 0.2]).unwrap();
    assert_eq!(
        fit_piece_weights(&data, &[0.0, 1.0, 2.0, 3.0]).unwrap(),
        vec![1.0, 0.0, 0.0]
    );
    let mut rng = stream_rng(12, 0);
    let data = Dataset::new((0..100_000).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap();
    let w = fit_piece_weights(&data, &[0.0, 1.0, 2.0]).unwrap();
    assert!((w[0] - 0.5).abs() < 3.0 * (0.25f64 / 1e5).sqrt());
}

fn r_inverse_truth() -> PiecewiseMixture {
    PiecewiseMixture::new(
        vec![0.0125, 0.04, 0.1, f64::INFINITY],
        vec![0.2, 0.6, 0.2],
        vec![
            BoundedExponential::new(80.0, 0.0125, 0.04).unwrap().into(),
            BoundedExponential::new(40.0, 0.04, 0.1).unwrap().into(),
            BoundedExponential::new(25.0, 0.1, f64::INFINITY)
                .unwrap()
                .into(),
        ],
    )
    .unwrap()
}

#[test]
fn single_piece_fit_equals_direct_exponential_fit() {
    let truth: BoundedComponent = BoundedExponential::new(3.0, 0.0, f64::INFINITY)
        .unwrap()
        .into();
    let xs = draws(&truth, 2_000, 9);
    let fit = fit_piecewise(
        &Dataset::new(xs.clone()).unwrap(),
        &FitConfig::new(vec![0.0, f64::INFINITY], vec![PieceFamily::Exponential]),
    )
    .unwrap();
    let direct = fit_bounded_exponential(&xs, 0.0, f64::INFINITY).unwrap();
    assert_eq!(
        fit.model.piece(0),
        &BoundedComponent::Exponential(direct.distribution)
    );
}

#[test]
fn three_pieces_beat_two_on_r_inverse_data() {
    let truth = r_inverse_truth();
    let data = Dataset::new(truth.sample_n(&mut stream_rng(10, 0), 20_000)).unwrap();
    let three = fit_piecewise(
        &data,
        &FitConfig::new(
            vec![0.0125, 0.04, 0.1, f64::INFINITY],
            vec![PieceFamily::Exponential; 3],
        ),
    )
    .unwrap();
    let two = fit_piecewise(
        &data,
        &FitConfig::new(
            vec![0.0125, 0.1, f64::INFINITY],
            vec![PieceFamily::Exponential; 2],
        ),
    )
    .unwrap();
    let ll3 = log_likelihood(&three.model, &data).unwrap();
    let ll2 = log_likelihood(&two.model, &data).unwrap();
    assert!(ll3 > ll2, "{ll3} vs {ll2}");
    // The report total equals the direct evaluation.
    assert!((three.log_likelihood - ll3).abs() < 1e-6 * ll3.abs());
    // Weights are the occupancy fractions exactly.
    assert_eq!(
        three.model.weights(),
        fit_piece_weights(&data, three.model.truncations())
            .unwrap()
            .as_slice()
    );
}

#[test]
fn empty_piece_gets_zero_weight_and_is_flagged() {
    let data = Dataset::new(vec![0.1, 0.2, 0.5, 2.5, 3.0]).unwrap();
    let fit = fit_piecewise(
        &data,
        &FitConfig::new(
            vec![0.0, 1.0, 2.0, f64::INFINITY],
            vec![
                PieceFamily::Exponential,
                PieceFamily::Normal,
                PieceFamily::Exponential,
            ],
        ),
    )
    .unwrap();
    assert_eq!(fit.model.weights()[1], 0.0);
    assert!(fit.pieces[1].skipped);
    assert!(!fit.pieces[0].skipped && !fit.pieces[2].skipped);
}

#[test]
fn refit_of_a_piece_ignores_other_pieces() {
    let cfg = FitConfig::new(
        vec![0.0125, 0.04, 0.1, f64::INFINITY],
        vec![PieceFamily::Exponential; 3],
    );
    let mut xs = r_inverse_truth().sample_n(&mut stream_rng(13, 0), 5_000);
    let a = fit_piecewise(&Dataset::new(xs.clone()).unwrap(), &cfg).unwrap();
    // Replace every tail observation; pieces 0 and 1 keep their data.
    for x in xs.iter_mut().filter(|x| **x >= 0.1) {
        *x = 0.1 + (*x - 0.1) * 3.0;
    }
    let b = fit_piecewise(&Dataset::new(xs).unwrap(), &cfg).unwrap();
    assert_eq!(a.model.piece(0), b.model.piece(0));
    assert_eq!(a.model.piece(1), b.model.piece(1));
    assert_ne!(a.model.piece(2), b.model.piece(2));
}

#[test]
fn quantile_knots_are_increasing() {
    let data = Dataset::new((1..=1000).map(|i| i as f64).collect()).unwrap();
    assert_eq!(quantile_knots(&data, &[0.9, 0.99]), vec![901.0, 991.0]);
    let flat = Dataset::new(vec![1.0; 10]).unwrap();
    assert_eq!(quantile_knots(&flat, &[0.5, 0.9]), vec![1.0]);
}

#[test]
fn config_validation() {
    let bad = FitConfig::new(
        vec![0.0, 1.0],
        vec![PieceFamily::Exponential, PieceFamily::Normal],
    );
    assert!(matches!(bad.validate(), Err(FitError::Config(_))));
    let bad = FitConfig::new(vec![0.0, 2.0, 1.0], vec![PieceFamily::Exponential; 2]);
    assert!(bad.validate().is_err());
    assert!(Dataset::new(vec![]).is_err());
    assert!(matches!(
        Dataset::new(vec![1.0, f64::NAN]),
        Err(FitError::NonFinite { index: 1, .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn prop_em_is_monotone(seed in any::<u64>(), p in 0.2f64..0.8, s1 in 0.03f64..0.1, ratio in 1.5f64..5.0, hi in 0.2f64..1.0) {
        let xs = mixture_draws(&[(p, s1), (1.0 - p, s1 * ratio)], 0.0, hi, 800, seed);
        let fit = fit_mixture_em(&xs, 0.0, hi, 2, &EmConfig::default()).unwrap();
        for w in fit.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }
}
