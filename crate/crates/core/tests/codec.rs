use haltlab::codec::{bin_inv_u64, bin_u64, floor_log2, llex_enumerate};
use haltlab::{bin, bin_inv, BitString, Index};
use num_bigint::BigUint;
use proptest::prelude::*;

#[test]
fn first_codes() {
    let codes: Vec<String> = llex_enumerate(7).map(|x| x.to_string()).collect();
    assert_eq!(codes, ["", "0", "1", "00", "01", "10", "11"]);
}

proptest! {
    #[test]
    fn round_trip(n in 1u64..u64::MAX) {
        let x = bin_u64(n);
        prop_assert_eq!(x.len() as u32, floor_log2(n));
        prop_assert_eq!(bin_inv_u64(&x), Some(n));
        // Binary expansion with the leading 1 removed.
        prop_assert_eq!(format!("1{x}"), format!("{n:b}"));
    }

    #[test]
    fn order_is_preserved(a in 1u64..1 << 40, b in 1u64..1 << 40) {
        prop_assert_eq!(a.cmp(&b), bin_u64(a).cmp(&bin_u64(b)));
    }

    #[test]
    fn big_indices(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
        let x = BitString::from_bits(bits);
        let n = bin_inv(&x);
        prop_assert_eq!(bin(&n), x.clone());
        prop_assert_eq!(n.value().bits() as usize, x.len() + 1);
    }
}

#[test]
fn index_rejects_zero() {
    assert!(Index::new(BigUint::from(0u8)).is_none());
    assert!(Index::try_from(0u64).is_err());
}
