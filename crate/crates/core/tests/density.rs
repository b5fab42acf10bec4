use haltlab::codec::bin_u64;
use haltlab::density::{
    density_report, exponential_stop_density, late_stop_exclusion, theta, ubound_check,
    window_bound, window_recurrence, window_sum, EffectiveZeroDensityCertificate,
    OVER_ESTIMATE_LABEL,
};
use haltlab::exact::{rat, rat_int};
use haltlab::{Budget, Index, Machine, MachineSpec, Rational};
use num_bigint::BigUint;
use proptest::prelude::*;

fn repeat() -> Machine {
    Machine::from_spec(&MachineSpec::universal_repeat()).unwrap()
}

proptest! {
    #[test]
    fn lemma_inequality(m in 3u32..300, s in 1u32..80) {
        prop_assert!(window_sum(m, s).unwrap() < window_bound(m, s));
    }

    #[test]
    fn lemma_recurrence(m in 3u32..200, s in 1u32..60) {
        prop_assert_eq!(window_recurrence(m, s).unwrap(), window_sum(m, s + 1).unwrap());
    }

    #[test]
    fn length_bound(n in 4u32..40, extra in 0u64..2000, low in any::<u64>()) {
        let t = (BigUint::from(1u8) << (2 * n as u64 - 1 + extra)) + BigUint::from(low);
        let len = t.bits() - 1;
        prop_assert!(len - u64::from(n) >= 64 || 1u64 << (len - u64::from(n)) > len);
        prop_assert!(ubound_check(n, &Index::new(t).unwrap()).unwrap());
    }

    #[test]
    fn random_fraction_beats_the_envelope(horizon in 4096u64..20000) {
        let r = density_report(&repeat(), 2, horizon, None).unwrap();
        prop_assert!(r.envelope_holds);
        prop_assert_eq!(r.observed_random_stop_times, 0);
        prop_assert_eq!(r.random_times + r.nonrandom_times + r.unknown_times, r.window_size);
        prop_assert_eq!(r.random_time_fraction, rat_int(r.random_times) / rat_int(r.window_size));
    }
}

/// The exact left-hand side by integer arithmetic: Σ 2^i · L / (m+i) over L = lcm-free product.
#[test]
fn lemma_values_by_hand() {
    for (m, s) in [(3u32, 1u32), (3, 2), (10, 5), (40, 25)] {
        let mut sum = Rational::from_integer(0.into());
        for i in 0..=s {
            sum += Rational::new((BigUint::from(1u8) << i).into(), (m + i).into());
        }
        let want = sum / Rational::from_integer(((BigUint::from(1u8) << s) - 1u8).into());
        assert_eq!(window_sum(m, s).unwrap(), want);
    }
    assert_eq!(window_sum(3, 1).unwrap(), rat(5, 6));
}

#[test]
fn theta_values() {
    assert_eq!(theta(3, 2), BigUint::from(2049u32));
    assert_eq!(theta(30, 2), (BigUint::from(1u8) << 65u32) + 1u8);
}

#[test]
fn opaque_reports_are_labelled() {
    let toy = Machine::from_spec(&MachineSpec::toy_vm()).unwrap();
    let r = density_report(&toy, 2, 4096, Some(Budget::new(3000).unwrap())).unwrap();
    assert_eq!(r.label, OVER_ESTIMATE_LABEL);
    assert!(density_report(&toy, 2, 4096, None).is_err());
}

#[test]
fn exclusion_on_toy_vm() {
    let toy = Machine::from_spec(&MachineSpec::toy_vm()).unwrap();
    for n in 2..=5u32 {
        let b = Budget::new((1 << (2 * n + 5)) + (1 << 12)).unwrap();
        let r = late_stop_exclusion(&toy, n, Some(b)).unwrap();
        assert!(r.violations.is_empty(), "N = {n}");
    }
}

#[test]
fn exponential_stops_are_rare() {
    let r = exponential_stop_density(&repeat(), 4, 1 << 12, None).unwrap();
    assert!(r.bound_holds);
    assert!(r.fraction <= r.nonrandom_fraction);
    for t in &r.exponential_stop_times {
        assert!(bin_u64(*t).len() >= 5);
    }
}

#[test]
fn certificate_modulus_grows() {
    let c = EffectiveZeroDensityCertificate::new(2, 2);
    assert!(c.modulus(1) <= c.modulus(2));
    assert!(c.modulus(3) > BigUint::from(1u64 << 41));
}
