use proptest::prelude::*;

use sigflow::domain::{
    default_braking_profile, evaluate_force, validate_scenario, ForceLaw, Forcing, ModelVariant,
    Profile, SignalTiming,
};

mod common;

fn law() -> impl Strategy<Value = ForceLaw> {
    (0.1..5.0f64, 1.0..40.0f64, 0.1..10.0f64)
        .prop_filter_map("delta below v*", |(f0, v_star, delta)| {
            ForceLaw::new(f0, v_star, delta.min(0.9 * v_star)).ok()
        })
}

proptest! {
    #[test]
    fn force_is_bounded_and_monotone(law in law(), a in 0.0..60.0f64, b in 0.0..60.0f64) {
        let (fa, fb) = (evaluate_force(&law, a), evaluate_force(&law, b));
        prop_assert!((0.0..=law.f0()).contains(&fa));
        if a <= b {
            prop_assert!(fa >= fb);
        }
        prop_assert!((fa - fb).abs() <= law.f0() / law.delta() * (a - b).abs() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn closed_form_speed_composes(law in law(), v in 0.0..50.0f64, t1 in 0.0..20.0f64, t2 in 0.0..20.0f64) {
        let f = Forcing::On(law);
        let direct = f.advance_speed(v, t1 + t2);
        let chained = f.advance_speed(f.advance_speed(v, t1), t2);
        prop_assert!((direct - chained).abs() <= 1e-9 * (1.0 + direct));
        prop_assert!(direct >= v || v > law.v_star());
        prop_assert!(direct <= v.max(law.v_star()) + 1e-12);
    }

    #[test]
    fn default_braking_stops_on_the_light(
        x0 in 100.0..900.0f64,
        h in 5.0..90.0f64,
        tau0 in 0.5..10.0f64,
        extra in 0.1..20.0f64,
        v in 0.0..30.0f64,
    ) {
        let timing = SignalTiming { x0, t0: tau0 + extra, tau0, tau1: 5.0, h };
        let b = default_braking_profile(&timing, v).unwrap();
        prop_assert_eq!(b.position(timing.braking_start()), x0 - h);
        prop_assert_eq!(b.position(timing.red_start()), x0);
        prop_assert_eq!(b.speed(timing.braking_start()), v);
        prop_assert_eq!(b.speed(timing.red_start()), 0.0);
        prop_assert_eq!(b.speed(timing.green_start()), 0.0);
        let mut last = b.position(timing.braking_start());
        for k in 1..=50 {
            let t = timing.braking_start() + tau0 * k as f64 / 50.0;
            let x = b.position(t);
            prop_assert!(x >= last - 1e-12 && b.speed(t) >= 0.0);
            last = x;
        }
    }

    #[test]
    fn profile_text_round_trips(base in 0.0..1.0f64, amp in 0.0..1.0f64, w in 1.0..500.0f64, p in -3.0..3.0f64) {
        let profile = Profile::Sine { base, amp, wavelength: w, phase: p };
        let parsed: Profile = profile.to_string().parse().unwrap();
        prop_assert_eq!(parsed, profile);
    }
}

#[test]
fn reference_scenario_is_valid_for_both_models() {
    for model in [ModelVariant::First, ModelVariant::Second] {
        assert!(validate_scenario(&common::reference(model)).is_empty());
    }
}

#[test]
fn validation_reports_every_problem_in_a_stable_order() {
    let mut s = common::reference(ModelVariant::First);
    s.timing.tau0 = -1.0;
    s.mu = 0.0;
    s.t_end = 1.0;
    let a = validate_scenario(&s);
    let b = validate_scenario(&s);
    assert_eq!(a, b);
    let fields: Vec<&str> = a.iter().map(|v| v.field.as_str()).collect();
    assert!(fields.contains(&"signal.tau0"), "{fields:?}");
    assert!(fields.contains(&"mu"), "{fields:?}");
    assert!(fields.len() >= 3, "{fields:?}");
}
