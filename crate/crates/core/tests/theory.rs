use approx::assert_abs_diff_eq;
use ndarray::{Array1, Array2};
use prelu_core::data::{make_basis, simplified_dataset, BasisMode, ClusterSpec, SubclassBasis};
use prelu_core::net::{init_balanced, DirectionLaw, InitSpec, LossKind, PreluNet};
use prelu_core::reference::{realize, RealizationPlan, ReferenceClassifier, ReferenceKind};
use prelu_core::theory::*;
use prelu_core::{linalg, rng, Error};
use proptest::prelude::*;
use rand::Rng;

fn basis(d: usize, k: usize, k1: usize, mode: BasisMode) -> SubclassBasis {
    make_basis(&ClusterSpec::new(d, k, k1, 0.0, 11).unwrap(), mode).unwrap()
}

fn max_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn field(b: &SubclassBasis, p: f64) -> ExtremalField {
    ExtremalField::new(simplified_dataset(b), p).unwrap()
}

/// A point in the open positive cone spanned by the positive centers.
fn positive_mix(b: &SubclassBasis, seed: u64) -> Array1<f64> {
    let mut r = rng::from_seed(seed);
    let mut w = Array1::zeros(b.dim());
    for k in 0..b.k1 {
        w.scaled_add(r.random_range(0.1..2.0), &b.center(k));
    }
    w
}

#[test]
fn extremal_vector_closed_forms() {
    let b = basis(16, 10, 6, BasisMode::RandomOrthogonal);
    for seed in 0..20 {
        let w = positive_mix(&b, seed);
        let x1 = extremal_vector(&field(&b, 1.0), w.view()).unwrap();
        let want1 = b.mu_plus() * 6f64.sqrt();
        assert!(max_diff(&x1, &want1) <= 1e-12);

        let x2 = extremal_vector(&field(&b, 2.0), w.view()).unwrap();
        let want2 = &w * (2.0 / linalg::norm(w.view()));
        assert!(max_diff(&x2, &want2) <= 1e-10);
    }
    let x3 = extremal_vector(&field(&b, 3.0), b.center(0)).unwrap();
    assert!(max_diff(&x3, &(b.center(0).to_owned() * 3.0)) <= 1e-12);
    // p ≥ 3 leans toward the nearest center.
    let mut w = b.center(0).to_owned() * 2.0;
    w += &b.center(1);
    let x = extremal_vector(&field(&b, 3.0), w.view()).unwrap();
    assert!(x.dot(&b.center(0)) > 3.0 * x.dot(&b.center(1)));
}

#[test]
fn extremal_vector_inputs() {
    let b = basis(8, 4, 2, BasisMode::Canonical);
    let f = field(&b, 1.0);
    assert!(matches!(extremal_vector(&f, Array1::zeros(8).view()), Err(Error::Domain(_))));
    assert!(matches!(extremal_vector(&f, Array1::ones(3).view()), Err(Error::DimensionMismatch { .. })));
    let mut ds = simplified_dataset(&b);
    ds.provenance = prelu_core::data::Provenance::Synthetic;
    assert!(ExtremalField::new(ds, 1.0).is_err());
    assert!(alignment_derivative(&f, b.center(0), Array1::zeros(8).view()).is_err());
}

#[test]
fn alignment_derivative_vanishes_on_radial_field() {
    let b = basis(12, 6, 3, BasisMode::RandomOrthogonal);
    for p in [1.0, 2.0, 3.0, 4.0] {
        let d = alignment_derivative(&field(&b, p), b.center(1), b.center(1)).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
    }
}

/// With `w` in the positive span, activated by all positive centers, the
/// rate toward `μ̄₊` reduces to `p(Σz^{p−1} − Σz·Σz^p)/√K₁` in the
/// coordinates `z_k = ⟨μ_k, ŵ⟩`.
#[test]
fn alignment_derivative_matches_coordinate_formula() {
    let b = basis(15, 9, 5, BasisMode::RandomOrthogonal);
    for p in [1.0, 2.0, 3.0, 4.0, 2.5] {
        let f = field(&b, p);
        for seed in 0..25 {
            let w = positive_mix(&b, 100 + seed);
            let wn = &w / linalg::norm(w.view());
            let z: Vec<f64> = (0..5).map(|k| b.center(k).dot(&wn)).collect();
            let s = |e: f64| z.iter().map(|v| v.powf(e)).sum::<f64>();
            let want = p * (s(p - 1.0) - s(1.0) * s(p)) / 5f64.sqrt();
            let got = alignment_derivative(&f, w.view(), b.mu_plus().view()).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-11);
        }
    }
}

#[test]
fn cone_sweeps_at_cos_0_9() {
    let b = basis(20, 10, 6, BasisMode::RandomOrthogonal);
    let s1 =
        alignment_bias_sweep(&field(&b, 1.0), 0.1, 1000, SweepTarget::ClassAverage, NeuronSign::Positive, 1).unwrap();
    assert_eq!(s1.accepted, 1000);
    assert!(s1.all_positive(), "{s1:?}");
    let s3 =
        alignment_bias_sweep(&field(&b, 3.0), 0.1, 1000, SweepTarget::ClassAverage, NeuronSign::Positive, 1).unwrap();
    assert!(s3.all_negative(), "{s3:?}");
    let sub =
        alignment_bias_sweep(&field(&b, 3.0), 0.1, 1000, SweepTarget::Subclass(0), NeuronSign::Positive, 2).unwrap();
    assert!(sub.all_positive(), "{sub:?}");
    let neg =
        alignment_bias_sweep(&field(&b, 1.0), 0.1, 1000, SweepTarget::ClassAverage, NeuronSign::Negative, 3).unwrap();
    assert!(neg.all_positive(), "{neg:?}");
}

#[test]
fn sign_dichotomy_over_deltas_and_signs() {
    let b = basis(20, 10, 6, BasisMode::Canonical);
    for p in [1.0, 3.0, 4.0] {
        let f = field(&b, p);
        for delta in [0.05, 0.1, 0.2] {
            for sign in [NeuronSign::Positive, NeuronSign::Negative] {
                let s = alignment_bias_sweep(&f, delta, 200, SweepTarget::ClassAverage, sign, 5).unwrap();
                if p == 1.0 {
                    assert!(s.all_positive(), "{s:?}");
                } else {
                    assert!(s.all_negative(), "{s:?}");
                    let ks: Vec<usize> = match sign {
                        NeuronSign::Positive => (0..6).collect(),
                        NeuronSign::Negative => (6..10).collect(),
                    };
                    for k in ks {
                        let s = alignment_bias_sweep(&f, delta, 100, SweepTarget::Subclass(k), sign, 6).unwrap();
                        assert!(s.all_positive(), "{s:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn sweep_samples_lie_on_the_cone() {
    // A single class center admits no cone of positive width in its own span.
    let b = basis(6, 3, 1, BasisMode::Canonical);
    let err = alignment_bias_sweep(&field(&b, 1.0), 0.1, 5, SweepTarget::ClassAverage, NeuronSign::Positive, 0);
    assert!(matches!(err, Err(Error::EmptyRegion(_))));
    assert!(alignment_bias_sweep(&field(&b, 1.0), 0.0, 5, SweepTarget::Subclass(0), NeuronSign::Positive, 0).is_err());
    assert!(alignment_bias_sweep(&field(&b, 1.0), 1.0, 5, SweepTarget::Subclass(0), NeuronSign::Positive, 0).is_err());
}

#[test]
fn sweeps_are_reproducible() {
    let b = basis(20, 10, 6, BasisMode::RandomOrthogonal);
    let f = field(&b, 4.0);
    let a = alignment_bias_sweep(&f, 0.2, 50, SweepTarget::Subclass(7), NeuronSign::Negative, 9).unwrap();
    let c = alignment_bias_sweep(&f, 0.2, 50, SweepTarget::Subclass(7), NeuronSign::Negative, 9).unwrap();
    assert_eq!((a.min, a.max, a.rejected), (c.min, c.max, c.rejected));
}

#[test]
fn lambda_margin_near_a_center() {
    let b = basis(20, 10, 6, BasisMode::RandomOrthogonal);
    for p in [3.0, 4.0] {
        for zeta in [0.01, 0.02] {
            let c = lambda_check(&field(&b, p), 0, zeta, 500, 4).unwrap();
            assert!(c.passed(), "{c:?}");
            assert_abs_diff_eq!(c.leading, p * zeta, epsilon = 1e-15);
        }
    }
    assert_abs_diff_eq!(1.0 - delta_for_zeta(0.19), 0.9, epsilon = 1e-15);
}

#[test]
fn gp_values() {
    assert_abs_diff_eq!(gp(1.0, &[1.0, 2.0], 1.0).unwrap(), 9.0, epsilon = 1e-12);
    assert_abs_diff_eq!(gp(2.0, &[1.0, 2.0], 1.0).unwrap(), 10.0, epsilon = 1e-12);
    assert_abs_diff_eq!(gp_argmin(1.0), 1.0);
    for q in [0.0, 0.7, 1.5, 3.0] {
        assert_abs_diff_eq!(gp(q, &[0.5; 4], 2.0).unwrap(), 16.0 * 0.5f64.powi(3), epsilon = 1e-12);
        assert_eq!(gp_second_derivative(q, &[0.5; 4], 2.0).unwrap(), 0.0);
    }
    // 0^0 = 1 and 0^q = 0 for q > 0.
    assert_abs_diff_eq!(gp(0.0, &[0.0, 1.0], 1.0).unwrap(), 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(gp(1.0, &[0.0, 1.0], 1.0).unwrap(), 1.0, epsilon = 1e-15);
    assert!(matches!(gp(1.0, &[0.0, 0.0], 1.0), Err(Error::Domain(_))));
    assert!(gp(-1.0, &[0.0, 1.0], 1.0).is_err());
    assert!(gp_second_derivative(1.0, &[-1.0, 1.0], 1.0).is_err());
    // Zero entries are dropped from the second derivative.
    assert_eq!(
        gp_second_derivative(1.3, &[0.0, 0.4, 0.9], 3.0).unwrap(),
        gp_second_derivative(1.3, &[0.4, 0.9], 3.0).unwrap()
    );
}

proptest! {
    #[test]
    fn gp_is_convex_with_centered_minimum(
        z in prop::collection::vec(0.05f64..3.0, 2..8),
        p in prop::sample::select(vec![1.0, 2.0, 3.0, 4.0]),
        q in -1.0f64..6.0,
    ) {
        let g2 = gp_second_derivative(q, &z, p).unwrap();
        prop_assert!(g2 >= 0.0);
        let h = 1e-3;
        let fd = (gp(q + h, &z, p).unwrap() - 2.0 * gp(q, &z, p).unwrap() + gp(q - h, &z, p).unwrap()) / (h * h);
        let scale = g2.abs().max(1e-6 * gp(q, &z, p).unwrap());
        prop_assert!((fd - g2).abs() <= 1e-4 * scale, "fd {fd} closed {g2}");
        let qs = gp_argmin(p);
        let mid = gp(qs, &z, p).unwrap();
        prop_assert!(gp(qs - 1.0, &z, p).unwrap() >= mid);
        prop_assert!(gp(qs + 0.5, &z, p).unwrap() >= mid);
    }
}

#[test]
fn gp_p3_strict_minimum_at_two() {
    let mut r = rng::from_seed(8);
    for _ in 0..1000 {
        let n = r.random_range(2..=8);
        let z: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
        let g2 = gp(2.0, &z, 3.0).unwrap();
        assert!(gp(1.0, &z, 3.0).unwrap() > g2);
        assert!(gp(3.0, &z, 3.0).unwrap() > g2);
    }
}

#[test]
fn wilson_reference_values() {
    let (lo, hi) = wilson_interval(0, 10);
    assert_abs_diff_eq!(lo, 0.0);
    assert_abs_diff_eq!(hi, 0.2775, epsilon = 1e-4);
    let (lo, hi) = wilson_interval(5, 10);
    assert_abs_diff_eq!(lo, 0.2366, epsilon = 1e-4);
    assert_abs_diff_eq!(hi, 0.7634, epsilon = 1e-4);
    let (lo, hi) = wilson_interval(9_990, 10_000);
    assert!(lo < 0.999 && 0.999 < hi && hi < 1.0);
}

fn spec(d: usize, alpha: f64) -> ClusterSpec {
    ClusterSpec::new(d, 10, 6, alpha, 21).unwrap()
}

#[test]
fn clean_and_d0_events_for_f() {
    let s = spec(1000, 0.1);
    let f = ReferenceClassifier::f(make_basis(&s, BasisMode::RandomOrthogonal).unwrap());
    let clean = mc_bound_check(&f, &s, BoundEvent::Clean, 10_000).unwrap();
    assert!(clean.estimate >= 0.999, "{clean:?}");
    assert!(clean.consistent());
    assert!(clean.ci_low <= clean.estimate && clean.estimate <= clean.ci_high);
    let d0 = mc_bound_check(&f, &s, BoundEvent::D0Attack { rho: 0.5 }, 10_000).unwrap();
    assert!(d0.estimate <= 0.001, "{d0:?}");
    assert!(d0.consistent());
    assert!(mc_bound_check(&f, &s, BoundEvent::Clean, 100).is_err());
}

#[test]
fn clean_accuracy_does_not_drop_with_dimension() {
    // Large noise so that the estimates are informative at every D.
    let alpha = 3.0;
    let mut last = 0.0;
    for d in [250, 500, 1000] {
        let s = spec(d, alpha);
        let f = ReferenceClassifier::f(make_basis(&s, BasisMode::Canonical).unwrap());
        let c = mc_bound_check(&f, &s, BoundEvent::Clean, 10_000).unwrap();
        assert!(c.estimate >= last, "D={d}: {} < {last}", c.estimate);
        last = c.estimate;
    }
    assert!(last < 1.0);
}

#[test]
fn fp_survives_radius_below_sqrt2_over_2() {
    let s = ClusterSpec::new(100, 10, 6, 0.01, 4).unwrap();
    let f2 = ReferenceClassifier::fp(make_basis(&s, BasisMode::RandomOrthogonal).unwrap(), 2.0).unwrap();
    let c = mc_bound_check(&f2, &s, BoundEvent::PgdRobust { delta: 0.2 }, 10_000).unwrap();
    assert!(c.estimate > 0.99, "{c:?}");
    assert!(c.consistent());
}

#[test]
fn report_on_realized_networks() {
    let b = basis(20, 10, 6, BasisMode::RandomOrthogonal);
    let f_net = realize(ReferenceKind::F, 8, &RealizationPlan::even(ReferenceKind::F, 8, &b).unwrap(), &b).unwrap();
    let rep = alignment_report(&f_net, &b).unwrap();
    assert_eq!(rep.targets.len(), 12);
    for j in 0..8 {
        if rep.contributions[j] > 0.0 {
            assert_abs_diff_eq!(rep.best_class_average(j), 1.0, epsilon = 1e-12);
        }
    }
    let kind = ReferenceKind::Fp { p: 3.0 };
    let fp_net = realize(kind, 20, &RealizationPlan::even(kind, 20, &b).unwrap(), &b).unwrap();
    let rep = alignment_report(&fp_net, &b).unwrap();
    for j in 0..20 {
        if rep.contributions[j] > 0.0 {
            assert_abs_diff_eq!(rep.best_subclass(j), 1.0, epsilon = 1e-12);
        }
        assert!(rep.cosines.row(j).iter().all(|c| (-1.0..=1.0).contains(c)));
    }
    // Order is by decreasing contribution; grouping is a permutation.
    for w in rep.order.windows(2) {
        assert!(rep.contributions[w[0]] >= rep.contributions[w[1]]);
    }
    let mut g = rep.grouping.clone();
    g.sort();
    assert_eq!(g, (0..20).collect::<Vec<_>>());
    for w in rep.grouping.windows(2) {
        assert!(rep.best_target(w[0]) <= rep.best_target(w[1]));
    }
    assert_eq!(rep.top(0.1).len(), 2);
    let mut buf = csv::Writer::from_writer(Vec::new());
    rep.write_csv(&mut buf, rep.top(0.1)).unwrap();
    let text = String::from_utf8(buf.into_inner().unwrap()).unwrap();
    assert!(text.starts_with("rank,neuron,contribution,mu_plus,mu_minus,mu_1"));
}

#[test]
fn report_rejects_mismatched_dims() {
    let b = basis(20, 10, 6, BasisMode::Canonical);
    let net = PreluNet::binary(Array2::ones((3, 7)), Array1::ones(3), 1.0).unwrap();
    assert!(alignment_report(&net, &b).is_err());
}

#[test]
fn small_norm_phase_and_residual() {
    let b = basis(20, 10, 6, BasisMode::RandomOrthogonal);
    for p in [1.0, 2.0, 3.0] {
        let rep = small_norm_phase(&b, &SmallNormSpec::new(p, 3)).unwrap();
        let want_t = (1.0 / (8.0 * 1e-4f64)).ln() / 40.0;
        assert_abs_diff_eq!(rep.horizon, want_t, epsilon = 1e-12);
        assert_eq!(rep.steps, (want_t / 1e-4).floor() as usize);
        assert_abs_diff_eq!(rep.norm_bound, 2.0 * 1e-4 / 8.0, epsilon = 1e-18);
        assert!(rep.norm_ok(), "{rep:?}");
        assert!(rep.residual_ok(), "{rep:?}");
    }
    let mut bad = SmallNormSpec::new(1.0, 0);
    bad.epsilon = 0.1;
    assert!(small_norm_phase(&b, &bad).is_err());
}

#[test]
fn drift_scales_quadratically() {
    let b = basis(20, 10, 6, BasisMode::RandomOrthogonal);
    let data = simplified_dataset(&b);
    for p in [1.0, 2.0, 3.0, 4.0] {
        let net = init_balanced(32, 20, 1, p, &InitSpec::new(1.0, DirectionLaw::Uniform, 2).unwrap()).unwrap();
        assert!(net.balancedness_drift() <= 1e-15);
        let s = drift_scaling(&net, &data, LossKind::Exponential, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!((s.slope - 2.0).abs() <= 0.2, "{s:?}");
    }
}
