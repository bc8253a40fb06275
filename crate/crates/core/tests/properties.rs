//! Property tests for the elliptic engine and the probability API, plus a
//! few deterministic invariants (harmonicity, large-interval convergence
//! order).

use proptest::prelude::*;

use encounter::elliptic;
use encounter::encounter::{
    meet_probability, meet_probability_canonical, meet_probability_in_set, IntervalSpec,
    MeetingSet, PairState,
};
use encounter::Complex64;

/// Points of the fundamental cell clear of lattice points.
fn cell_point() -> impl Strategy<Value = Complex64> {
    let w1 = elliptic::real_half_period();
    (
        prop::num::f64::NORMAL.prop_map(move |x| (x.fract().abs() * 2.0 - 1.0) * w1),
        prop::num::f64::NORMAL.prop_map(move |y| (y.fract().abs() * 2.0 - 1.0) * w1),
    )
        .prop_map(|(re, im)| Complex64::new(re, im))
        .prop_filter("away from lattice points", move |z| {
            let w2 = 2.0 * w1;
            [
                Complex64::new(0.0, 0.0),
                Complex64::new(w2, 0.0),
                Complex64::new(-w2, 0.0),
                Complex64::new(0.0, w2),
                Complex64::new(0.0, -w2),
                Complex64::new(w2, w2),
                Complex64::new(w2, -w2),
                Complex64::new(-w2, w2),
                Complex64::new(-w2, -w2),
            ]
            .iter()
            .all(|l| (z - l).norm() >= 0.05)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wp_satisfies_its_differential_equation(z in cell_point()) {
        let (p, dp) = elliptic::wp_pair(z).unwrap();
        let residual = (dp * dp - (4.0 * p * p * p - p)).norm();
        prop_assert!(residual <= 1e-9 * (1.0 + p.norm().powi(3)));
    }

    #[test]
    fn wp_is_even_and_periodic(z in cell_point()) {
        let p = elliptic::wp(z).value;
        let scale = p.norm().max(1.0);
        prop_assert!((elliptic::wp(-z).value - p).norm() <= 1e-10 * scale);
        let w2 = 2.0 * elliptic::real_half_period();
        prop_assert!((elliptic::wp(z + Complex64::new(w2, 0.0)).value - p).norm() <= 1e-10 * scale);
        prop_assert!((elliptic::wp(z + Complex64::new(0.0, w2)).value - p).norm() <= 1e-10 * scale);
        let dp = elliptic::wp_prime(z).value;
        prop_assert!((elliptic::wp_prime(-z).value + dp).norm() <= 1e-10 * dp.norm().max(1.0));
    }

    #[test]
    fn probability_in_unit_range(u in 0.0f64..1.0, t in 0.0f64..1.0) {
        let v = u + t * (1.0 - u);
        let p = meet_probability_canonical(u, v);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn probability_is_scale_invariant(
        u in 0.01f64..0.95,
        t in 0.05f64..0.95,
        a in -50.0f64..50.0,
        log_l in -3.0f64..3.0,
    ) {
        let v = u + t * (1.0 - u);
        let l = 10f64.powf(log_l);
        let iv = IntervalSpec::new(a, a + l).unwrap();
        let s = PairState::new(a + u * l, a + v * l, &iv).unwrap();
        let unit = IntervalSpec::unit();
        let s0 = PairState::new(u, v, &unit).unwrap();
        prop_assert!((meet_probability(&s, &iv) - meet_probability(&s0, &unit)).abs() <= 1e-12);
    }

    #[test]
    fn probability_reflection_symmetry(u in 0.02f64..0.9, gap in 0.02f64..0.5) {
        let v = (u + gap).min(0.98);
        let unit = IntervalSpec::unit();
        let p1 = meet_probability(&PairState::new(u, v, &unit).unwrap(), &unit);
        let p2 = meet_probability(
            &PairState::new(1.0 - v, 1.0 - u, &unit).unwrap(),
            &unit,
        );
        prop_assert!((p1 - p2).abs() <= 1e-12);
    }
}

proptest! {
    // Each case runs three adaptive quadratures; keep the count modest.
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn set_probability_is_additive(split in 0.1f64..0.9) {
        let iv = IntervalSpec::unit();
        let s = PairState::new(0.3, 0.6, &iv).unwrap();
        let left = MeetingSet::new(vec![(0.0, split)], &iv).unwrap();
        let right = MeetingSet::new(vec![(split, 1.0)], &iv).unwrap();
        let p_left = meet_probability_in_set(&s, &left, &iv).unwrap();
        let p_right = meet_probability_in_set(&s, &right, &iv).unwrap();
        let p = meet_probability(&s, &iv);
        prop_assert!(p_left >= -1e-12 && p_right >= -1e-12);
        prop_assert!((p_left + p_right - p).abs() <= 1e-6);
    }
}

/// Five-point discrete Laplacian of the closed form shrinks as O(h²).
#[test]
fn probability_is_discretely_harmonic() {
    let lap = |u: f64, v: f64, h: f64| {
        (meet_probability_canonical(u + h, v)
            + meet_probability_canonical(u - h, v)
            + meet_probability_canonical(u, v + h)
            + meet_probability_canonical(u, v - h)
            - 4.0 * meet_probability_canonical(u, v))
            / (h * h)
    };
    for &(u, v) in &[(0.3, 0.6), (0.2, 0.8), (0.45, 0.55)] {
        let coarse = lap(u, v, 1e-2).abs();
        let fine = lap(u, v, 5e-3).abs();
        let order = (coarse / fine).log2();
        assert!(
            order >= 1.8,
            "harmonicity order {order} at ({u},{v}): {coarse:.2e} -> {fine:.2e}"
        );
    }
}

/// Deviation from the arctangent limit falls like L^{-4}.
#[test]
fn asymptotic_convergence_rate_in_interval_length() {
    use encounter::encounter::asymptotic_probability;
    let deviation = |l: f64| {
        let iv = IntervalSpec::new(0.0, l).unwrap();
        let s = PairState::new(0.3, 0.6, &iv).unwrap();
        (meet_probability(&s, &iv) - asymptotic_probability(&s, &iv)).abs()
    };
    let (d10, d20, d40) = (deviation(10.0), deviation(20.0), deviation(40.0));
    assert!(d10 / d20 >= 8.0, "L=10 -> 20 ratio {}", d10 / d20);
    assert!(d20 / d40 >= 8.0, "L=20 -> 40 ratio {}", d20 / d40);
}
