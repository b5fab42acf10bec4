use haltlab::codec::{bin_u64, strings_of_length};
use haltlab::complexity::{
    is_random_time, max_nonrandom_witness, nabla, random_string_density, random_threshold,
    NablaMode, Randomness,
};
use haltlab::exact::rat_int;
use haltlab::{Budget, Index, Machine, MachineSpec};
use proptest::prelude::*;

fn repeat() -> Machine {
    Machine::from_spec(&MachineSpec::universal_repeat()).unwrap()
}

fn is_fourfold(bits: &[bool]) -> bool {
    let q = bits.len() / 4;
    bits.len() % 4 == 0 && q > 0 && (1..4).all(|j| bits[j * q..(j + 1) * q] == bits[..q])
}

#[test]
fn witness_cap_is_below_the_threshold() {
    for len in 1..40u32 {
        let cap = max_nonrandom_witness(len);
        assert!(rat_int(cap) < random_threshold(len));
        assert!(rat_int(cap + 1) >= random_threshold(len));
    }
}

proptest! {
    // On this machine the short programs `1y` print y⁴, so a time is
    // nonrandom exactly when its code is a fourfold repeat with a cheap
    // enough seed. Lengths 8..=12 are too short for the clock slot to matter.
    #[test]
    fn randomness_on_the_repeat_machine(t in 256u64..8192) {
        let code = bin_u64(t);
        let got = is_random_time(&repeat(), &Index::try_from(t).unwrap(), Budget::new(1).unwrap()).unwrap();
        let want = if cheap_fourfold(code.bits()) { Randomness::Nonrandom } else { Randomness::Random };
        prop_assert_eq!(got, want);
    }

    #[test]
    fn witnesses_reproduce_their_string(n in 2u64..200) {
        let m = repeat();
        let x = bin_u64(n);
        if let Some(r) = nabla(&m, &x, &Index::try_from(1u64 << 12).unwrap(), Budget::new(1).unwrap()).unwrap() {
            prop_assert_eq!(r.mode, NablaMode::Exact);
            let out = m.run(&bin_u64(r.value), Budget::new(1 << 20).unwrap());
            prop_assert_eq!(out.output(), Some(&x));
        }
    }
}

/// `y⁴` is printed by program `1y`, whose index is the value of `11y`.
fn cheap_fourfold(bits: &[bool]) -> bool {
    if !is_fourfold(bits) {
        return false;
    }
    let seed = &bits[..bits.len() / 4];
    let index = seed.iter().fold(3u64, |acc, &b| acc * 2 + u64::from(b));
    index <= max_nonrandom_witness(bits.len() as u32)
}

#[test]
fn most_strings_are_random() {
    let m = repeat();
    for n in 4..=12u32 {
        let density = random_string_density(n, &m).unwrap();
        // At most 2^n/n − 1 witnesses exist, so at least 1 − 1/n of the strings are random.
        assert!(
            density >= rat_int(1) - haltlab::exact::rat(1, n as i64),
            "n = {n}: {density}"
        );
        let nonrandom = strings_of_length(n)
            .filter(|x| cheap_fourfold(x.bits()))
            .count();
        assert_eq!(
            density,
            rat_int(1) - haltlab::exact::rat(nonrandom as i64, 1 << n),
            "n = {n}"
        );
    }
}

#[test]
fn opaque_search_is_labelled() {
    let m = Machine::from_spec(&MachineSpec::toy_vm()).unwrap();
    let r = nabla(
        &m,
        &bin_u64(1),
        &Index::try_from(4096u64).unwrap(),
        Budget::new(100).unwrap(),
    )
    .unwrap();
    if let Some(r) = r {
        assert_eq!(r.mode, NablaMode::BudgetLowerBound);
        assert_eq!(r.budget_used, Some(100));
    }
}
