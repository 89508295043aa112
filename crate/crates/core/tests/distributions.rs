mod common;

use acceval_core::{
    stream_rng, BoundedComponent, BoundedExponential, BoundedNormal, BoundedNormalMixture,
    DistributionError, EmpiricalDistribution, MixtureComponent, PiecewiseMixture,
};
use common::{integrate, integrate_panels, ks_critical_99, ks_statistic, phi};
use proptest::prelude::*;

fn exp_piece(rate: f64, lo: f64, hi: f64) -> BoundedComponent {
    BoundedExponential::new(rate, lo, hi).unwrap().into()
}

fn normal_piece(sigma: f64, lo: f64, hi: f64) -> BoundedComponent {
    BoundedNormal::centered(sigma, lo, hi).unwrap().into()
}

fn mixture_piece(parts: &[(f64, f64)], lo: f64, hi: f64) -> BoundedComponent {
    let comps: Vec<_> = parts
        .iter()
        .map(|&(p, s)| MixtureComponent::centered(p, s))
        .collect();
    BoundedNormalMixture::new(&comps, lo, hi).unwrap().into()
}

/// R⁻¹-like body with an exponential tail and a TTC⁻¹-like mixture body.
fn fixtures() -> Vec<PiecewiseMixture> {
    vec![
        PiecewiseMixture::new(
            vec![0.0, 0.02, 0.1, f64::INFINITY],
            vec![0.1, 0.7, 0.2],
            vec![
                exp_piece(30.0, 0.0, 0.02),
                exp_piece(25.0, 0.02, 0.1),
                exp_piece(20.0, 0.1, f64::INFINITY),
            ],
        )
        .unwrap(),
        PiecewiseMixture::new(
            vec![0.0, 0.25, f64::INFINITY],
            vec![0.97, 0.03],
            vec![
                mixture_piece(&[(0.6, 0.05), (0.4, 0.14)], 0.0, 0.25),
                exp_piece(22.0, 0.25, f64::INFINITY),
            ],
        )
        .unwrap(),
        PiecewiseMixture::new(
            vec![-1.0, 0.5, 3.0],
            vec![0.45, 0.55],
            vec![normal_piece(0.8, -1.0, 0.5), normal_piece(2.0, 0.5, 3.0)],
        )
        .unwrap(),
    ]
}

#[test]
fn single_exponential_density_at_zero_is_rate() {
    let d = PiecewiseMixture::single(exp_piece(1.0, 0.0, f64::INFINITY)).unwrap();
    assert_eq!(d.pdf(0.0), 1.0);
}

#[test]
fn density_is_zero_below_support() {
    for d in fixtures() {
        assert_eq!(d.pdf(d.lower() - 1.0), 0.0);
        assert_eq!(d.cdf(d.lower() - 1.0), 0.0);
    }
}

#[test]
fn two_piece_exponential_density_matches_hand_value() {
    let d = PiecewiseMixture::new(
        vec![0.0, 1.0, f64::INFINITY],
        vec![0.5, 0.5],
        vec![exp_piece(2.0, 0.0, 1.0), exp_piece(2.0, 1.0, f64::INFINITY)],
    )
    .unwrap();
    let expected = 0.5 * (2.0 * (-1.0f64).exp()) / (1.0 - (-2.0f64).exp());
    assert!((d.pdf(0.5) - expected).abs() < 1e-14);
    // Same value with the normalizer taken from quadrature of the raw kernel.
    let z = integrate(|x| 2.0 * (-2.0 * x).exp(), 0.0, 1.0, 1e-14);
    assert!((0.5 * 2.0 * (-1.0f64).exp() / z - expected).abs() < 1e-10);
}

#[test]
fn cdf_at_piece_boundary_is_cumulative_weight() {
    let d = PiecewiseMixture::new(
        vec![0.0, 1.0, 2.0],
        vec![0.3, 0.7],
        vec![exp_piece(1.5, 0.0, 1.0), exp_piece(1.5, 1.0, 2.0)],
    )
    .unwrap();
    assert_eq!(d.cdf(0.0), 0.0);
    assert!((d.cdf(1.0) - 0.3).abs() < 1e-15);
    assert_eq!(d.cdf(2.0), 1.0);
}

#[test]
fn inverse_cdf_boundaries() {
    let d = PiecewiseMixture::new(
        vec![0.0, 1.0, f64::INFINITY],
        vec![0.5, 0.5],
        vec![
            normal_piece(1.0, 0.0, 1.0),
            exp_piece(1.0, 1.0, f64::INFINITY),
        ],
    )
    .unwrap();
    assert_eq!(d.inverse_cdf(0.0).unwrap(), 0.0);
    assert_eq!(d.inverse_cdf(0.5).unwrap(), 1.0);
    assert!(matches!(
        d.inverse_cdf(1.0),
        Err(DistributionError::ProbabilityOutOfRange(_))
    ));
    assert!(d.inverse_cdf(-0.1).is_err());
    assert!(d.inverse_cdf(f64::NAN).is_err());
}

#[test]
fn inverse_cdf_of_unbounded_exponential_is_analytic() {
    let d = PiecewiseMixture::single(exp_piece(1.0, 0.0, f64::INFINITY)).unwrap();
    let x = d.inverse_cdf(1.0 - (-2.0f64).exp()).unwrap();
    assert!((x - 2.0).abs() < 1e-12);
}

#[test]
fn zero_weight_pieces_are_never_selected() {
    let d = PiecewiseMixture::new(
        vec![0.0, 1.0, 2.0, 3.0],
        vec![0.4, 0.0, 0.6],
        vec![
            exp_piece(1.0, 0.0, 1.0),
            exp_piece(1.0, 1.0, 2.0),
            exp_piece(1.0, 2.0, 3.0),
        ],
    )
    .unwrap();
    assert_eq!(d.pdf(1.5), 0.0);
    for i in 0..10_000 {
        let y = i as f64 / 10_000.0;
        let x = d.inverse_cdf(y).unwrap();
        assert!(
            !(1.0..2.0).contains(&x),
            "y={y} mapped into the empty piece: {x}"
        );
    }
    let mut rng = stream_rng(3, 0);
    assert!(d
        .sample_n(&mut rng, 10_000)
        .iter()
        .all(|x| !(1.0..2.0).contains(x)));
}

#[test]
fn cdf_inverse_roundtrip_on_uniform_grid() {
    for d in fixtures() {
        for i in 1..1000 {
            let y = i as f64 / 1000.0;
            let x = d.inverse_cdf(y).unwrap();
            assert!((d.cdf(x) - y).abs() < 1e-8, "y={y} x={x} cdf={}", d.cdf(x));
        }
    }
}

#[test]
fn inverse_of_cdf_recovers_support_points() {
    for d in fixtures() {
        let lo = d.lower();
        // Beyond the 1 - 1e-6 quantile one ulp of the CDF exceeds 1e-8 in x.
        let hi = d.inverse_cdf(1.0 - 1e-6).unwrap();
        for i in 0..500 {
            let x = lo + (hi - lo) * i as f64 / 500.0;
            if d.pdf(x) <= 0.0 {
                continue;
            }
            let back = d.inverse_cdf(d.cdf(x)).unwrap();
            assert!((back - x).abs() < 1e-8, "x={x} back={back}");
        }
    }
}

#[test]
fn every_fixture_integrates_to_one() {
    for d in fixtures() {
        let mut total = 0.0;
        for i in 0..d.len() {
            let lo = d.truncations()[i];
            let hi = d.truncations()[i + 1];
            let hi = if hi.is_finite() { hi } else { lo + 60.0 };
            total += integrate_panels(|x| d.pdf(x), lo, hi, 64, 1e-12);
        }
        assert!((total - 1.0).abs() < 1e-6, "total {total}");
    }
}

#[test]
fn components_integrate_to_one_within_1e9() {
    let comps = [
        exp_piece(2.0, 0.0, 1.0),
        exp_piece(40.0, 0.04, 0.1),
        exp_piece(0.1, 3.0, 4.0),
        normal_piece(1.0, 0.0, 2.0),
        normal_piece(0.3, 1.0, 2.0),
        normal_piece(1.0, -0.5, 0.25),
        BoundedNormal::new(2.0, 1.0, 0.0, 1.0).unwrap().into(),
        mixture_piece(&[(0.5, 0.5), (0.5, 2.0)], 0.0, 3.0),
        mixture_piece(&[(0.2, 0.05), (0.3, 0.1), (0.5, 0.2)], 0.0, 0.25),
    ];
    for c in &comps {
        let total = integrate_panels(|x| c.pdf(x), c.lower(), c.upper(), 32, 1e-13);
        assert!((total - 1.0).abs() < 1e-9, "{c:?}: {total}");
    }
}

#[test]
fn deep_tail_normal_pieces_stay_normalized() {
    let c = normal_piece(0.05, 0.6, 2.0);
    let total = integrate_panels(|x| c.pdf(x), 0.6, 0.8, 64, 1e-13);
    assert!((total - 1.0).abs() < 1e-9, "{total}");
    let q = c.quantile(0.5);
    assert!(q > 0.6 && q < 0.65);
    assert!((c.cdf(q) - 0.5).abs() < 1e-10);
}

#[test]
fn mixture_with_one_component_is_the_bounded_normal() {
    let m = BoundedNormalMixture::new(&[MixtureComponent::centered(1.0, 0.7)], 0.0, 2.0).unwrap();
    let n = BoundedNormal::centered(0.7, 0.0, 2.0).unwrap();
    for i in 0..50 {
        let x = i as f64 * 0.04;
        assert_eq!(m.pdf(x), n.pdf(x));
    }
}

#[test]
fn mixture_density_outside_support_is_zero() {
    let m = BoundedNormalMixture::new(
        &[
            MixtureComponent::centered(0.5, 1.0),
            MixtureComponent::centered(0.5, 2.0),
        ],
        0.0,
        1.0,
    )
    .unwrap();
    assert_eq!(m.pdf(-0.1), 0.0);
    assert_eq!(m.pdf(1.0), 0.0);
}

#[test]
fn mixture_density_at_zero_matches_hand_value() {
    let m = BoundedNormalMixture::new(
        &[
            MixtureComponent::centered(0.5, 1.0),
            MixtureComponent::centered(0.5, 2.0),
        ],
        0.0,
        f64::INFINITY,
    )
    .unwrap();
    let expected = 0.5 * 2.0 * phi(0.0) + 0.5 * (2.0 / 2.0) * phi(0.0);
    assert!((m.pdf(0.0) - expected).abs() < 1e-14);
    assert!((expected - (0.5 * 0.7979 + 0.5 * 0.3989)).abs() < 1e-4);
    // The half-normal normalizers checked by quadrature of the raw kernels.
    let z1 = integrate(|x| phi(x), 0.0, 40.0, 1e-14);
    let z2 = integrate(|x| phi(x / 2.0) / 2.0, 0.0, 80.0, 1e-14);
    assert!((0.5 * phi(0.0) / z1 + 0.5 * phi(0.0) / 2.0 / z2 - expected).abs() < 1e-9);
}

#[test]
fn rejects_invalid_construction() {
    assert!(BoundedExponential::new(0.0, 0.0, 1.0).is_err());
    assert!(BoundedExponential::new(1.0, 1.0, 1.0).is_err());
    assert!(BoundedNormal::centered(-1.0, 0.0, 1.0).is_err());
    assert!(BoundedNormalMixture::new(
        &[
            MixtureComponent::centered(0.6, 1.0),
            MixtureComponent::centered(0.6, 1.0)
        ],
        0.0,
        1.0
    )
    .is_err());
    assert!(BoundedNormalMixture::new(&[], 0.0, 1.0).is_err());
    // Weights that miss one.
    assert!(PiecewiseMixture::new(
        vec![0.0, 1.0, 2.0],
        vec![0.5, 0.4],
        vec![exp_piece(1.0, 0.0, 1.0), exp_piece(1.0, 1.0, 2.0)]
    )
    .is_err());
    // Piece bounds disagreeing with the truncations.
    assert!(matches!(
        PiecewiseMixture::new(
            vec![0.0, 1.0, 2.0],
            vec![0.5, 0.5],
            vec![exp_piece(1.0, 0.0, 1.0), exp_piece(1.0, 1.0, 3.0)]
        ),
        Err(DistributionError::PieceBounds { index: 1, .. })
    ));
    assert!(PiecewiseMixture::new(
        vec![0.0, 0.0, 2.0],
        vec![0.5, 0.5],
        vec![exp_piece(1.0, 0.0, 1.0), exp_piece(1.0, 1.0, 2.0)]
    )
    .is_err());
}

#[test]
fn empirical_sampling_stays_on_support() {
    let e = EmpiricalDistribution::from_observations(&[10.0, 20.0, 10.0]).unwrap();
    let mut rng = stream_rng(11, 0);
    for _ in 0..10_000 {
        let x = e.sample(&mut rng);
        assert!(x == 10.0 || x == 20.0);
    }
    assert_eq!(e.counts(), &[2, 1]);
    assert!((e.mass_in(5.0, 15.0) - 2.0 / 3.0).abs() < 1e-15);
    let r = e.restricted(15.0, 25.0).unwrap();
    assert_eq!(r.values(), &[20.0]);
    assert!(e.restricted(30.0, 40.0).is_err());
}

#[test]
fn empirical_frequencies_follow_counts() {
    let e = EmpiricalDistribution::new(&[1.0, 2.0, 3.0], &[1, 2, 7]).unwrap();
    let mut rng = stream_rng(5, 0);
    let n = 100_000;
    let threes = (0..n).filter(|_| e.sample(&mut rng) == 3.0).count() as f64 / n as f64;
    assert!((threes - 0.7).abs() < 3.0 * (0.21f64 / n as f64).sqrt() + 1e-9);
}

#[test]
fn exponential_sample_mean_is_one_over_rate() {
    let d = PiecewiseMixture::single(exp_piece(1.0, 0.0, f64::INFINITY)).unwrap();
    let mut rng = stream_rng(2024, 0);
    let xs = d.sample_n(&mut rng, 100_000);
    let m = common::mean(&xs);
    assert!((m - 1.0).abs() < 3.0 / (1e5f64).sqrt(), "mean {m}");
}

#[test]
fn piece_occupancy_follows_weights() {
    let d = PiecewiseMixture::new(
        vec![0.0, 1.0, f64::INFINITY],
        vec![0.3, 0.7],
        vec![exp_piece(1.0, 0.0, 1.0), exp_piece(1.0, 1.0, f64::INFINITY)],
    )
    .unwrap();
    let mut rng = stream_rng(77, 0);
    let n = 100_000;
    let first = d.sample_n(&mut rng, n).iter().filter(|&&x| x < 1.0).count() as f64 / n as f64;
    assert!((first - 0.3).abs() < 3.0 * (0.3f64 * 0.7 / n as f64).sqrt());
}

#[test]
fn samples_pass_ks_band() {
    for (k, d) in fixtures().into_iter().enumerate() {
        let mut rng = stream_rng(99, k as u64);
        let mut xs = d.sample_n(&mut rng, 100_000);
        let ks = ks_statistic(&mut xs, |x| d.cdf(x));
        assert!(ks < ks_critical_99(xs.len()), "fixture {k}: D = {ks}");
    }
}

#[test]
fn sampling_is_deterministic_given_seed() {
    let d = &fixtures()[1];
    let a = d.sample_n(&mut stream_rng(8, 2), 100);
    let b = d.sample_n(&mut stream_rng(8, 2), 100);
    let c = d.sample_n(&mut stream_rng(8, 3), 100);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn piece_locality() {
    let base = &fixtures()[0];
    let mut pieces = base.pieces().to_vec();
    pieces[2] = exp_piece(3.0, 0.1, f64::INFINITY);
    let other = base.with_pieces(pieces).unwrap();
    for i in 0..100 {
        let x = 0.001 * i as f64;
        assert_eq!(base.pdf(x), other.pdf(x));
    }
}

fn arb_component(lo: f64, hi: f64) -> impl Strategy<Value = BoundedComponent> {
    prop_oneof![
        (0.05f64..50.0).prop_map(move |r| exp_piece(r, lo, hi)),
        (0.05f64..3.0).prop_map(move |s| normal_piece(s, lo, hi)),
        (0.1f64..0.9, 0.05f64..1.0, 0.5f64..3.0).prop_map(move |(p, s1, s2)| mixture_piece(
            &[(p, s1), (1.0 - p, s2)],
            lo,
            hi
        )),
    ]
}

fn arb_piecewise() -> impl Strategy<Value = PiecewiseMixture> {
    (
        prop::collection::vec(0.05f64..1.0, 1..5),
        prop::collection::vec(0.01f64..1.0, 4),
        any::<bool>(),
    )
        .prop_flat_map(|(gaps, raw_w, open)| {
            let k = gaps.len();
            let mut knots = vec![0.0];
            for g in &gaps {
                let last = *knots.last().unwrap();
                knots.push(last + g);
            }
            if open {
                knots[k] = f64::INFINITY;
            }
            let sum: f64 = raw_w[..k].iter().sum();
            let mut weights: Vec<f64> = raw_w[..k].iter().map(|w| w / sum).collect();
            let tail: f64 = weights[..k - 1].iter().sum();
            weights[k - 1] = 1.0 - tail;
            let pieces: Vec<_> = (0..k)
                .map(|i| {
                    let (lo, hi) = (knots[i], knots[i + 1]);
                    if hi.is_finite() {
                        arb_component(lo, hi).boxed()
                    } else {
                        (0.5f64..20.0)
                            .prop_map(move |r| exp_piece(r, lo, hi))
                            .boxed()
                    }
                })
                .collect();
            (Just(knots), Just(weights), pieces)
        })
        .prop_map(|(knots, weights, pieces)| PiecewiseMixture::new(knots, weights, pieces).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_roundtrip(d in arb_piecewise(), y in 0.0f64..1.0) {
        let x = d.inverse_cdf(y).unwrap();
        let i = d.piece_index(x).unwrap();
        prop_assert!(x >= d.truncations()[i] && x < d.truncations()[i + 1]);
        prop_assert!((d.cdf(x) - y).abs() < 1e-8, "y={} x={} cdf={}", y, x, d.cdf(x));
    }

    #[test]
    fn prop_cdf_monotone(d in arb_piecewise(), a in 0.0f64..4.0, b in 0.0f64..4.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.cdf(lo) <= d.cdf(hi));
        prop_assert!((0.0..=1.0).contains(&d.cdf(lo)));
    }

    #[test]
    fn prop_normalized(d in arb_piecewise()) {
        let mut total = 0.0;
        for i in 0..d.len() {
            let lo = d.truncations()[i];
            let hi = d.truncations()[i + 1];
            let hi = if hi.is_finite() { hi } else { lo + 80.0 };
            total += integrate_panels(|x| d.pdf(x), lo, hi, 48, 1e-11);
        }
        prop_assert!((total - 1.0).abs() < 1e-6, "total {}", total);
    }
}
