use haltlab::exact::{rat, rat_int};
use haltlab::machine::TableEntry;
use haltlab::sweep::{
    check_space_bounds, conditional_probs, dovetail_sweep, prob_by, prob_exact, sweep,
};
use haltlab::{BitString, Machine, MachineSpec};
use proptest::prelude::*;

fn table(stops: &[Option<u64>], len: u32) -> Machine {
    let entries = stops
        .iter()
        .enumerate()
        .filter_map(|(v, t)| {
            t.map(|stop_time| TableEntry {
                program: BitString::from_u64(v as u64, len),
                stop_time,
                output: None,
            })
        })
        .collect();
    Machine::from_spec(&MachineSpec::Table { entries }).unwrap()
}

proptest! {
    #[test]
    fn probabilities_match_direct_counts(
        stops in proptest::collection::vec(proptest::option::of(1u64..40), 8),
        horizon in 1u64..48,
    ) {
        let m = table(&stops, 3);
        let h = sweep(&m, 3, horizon).unwrap();
        let seen: Vec<u64> = stops.iter().flatten().copied().filter(|&t| t <= horizon).collect();
        let space = rat_int(8 * horizon);
        prop_assert_eq!(prob_exact(&h), rat_int(seen.len() as u64) / &space);
        let pairs: u64 = seen.iter().map(|t| horizon - t + 1).sum();
        prop_assert_eq!(prob_by(&h), rat_int(pairs) / &space);
        prop_assert!(check_space_bounds(&h).is_ok());
        prop_assert!(prob_exact(&h) <= rat(1, horizon as i64));
    }

    #[test]
    fn dovetailing_finds_the_same_stops(len in 0u32..7, horizon in 1u64..300) {
        let m = Machine::from_spec(&MachineSpec::toy_vm()).unwrap();
        prop_assert_eq!(dovetail_sweep(&m, len, horizon).unwrap(), sweep(&m, len, horizon).unwrap());
    }

    #[test]
    fn restriction_equals_a_shorter_sweep(len in 0u32..8, t in 1u64..200) {
        let m = Machine::from_spec(&MachineSpec::toy_vm()).unwrap();
        prop_assert_eq!(sweep(&m, len, 200).unwrap().restrict(t), sweep(&m, len, t).unwrap());
    }
}

#[test]
fn conditionals_from_the_table() {
    let m = Machine::from_spec(&MachineSpec::table1()).unwrap();
    let h = sweep(&m, 3, 17).unwrap();
    let c = conditional_probs(&h, 5, 8).unwrap();
    assert_eq!(c.eventual_given_not_by_t0, rat(4, 6));
    assert_eq!(c.by_t1_given_not_by_t0, rat(1, 6));
    assert_eq!(c.not_by_t0_and_eventual, rat(4, 8));
    assert!(conditional_probs(&h, 9, 8).is_err());
}
