use std::sync::OnceLock;

use gridswap::field_group::{
    commit_values, commitment_combine, commitment_combine_all, pedersen_commit, pedersen_verify_opening, GroupParams,
    Opening, PrimeField, MERSENNE_127,
};
use gridswap::protocol::Crypto;
use num_bigint::BigUint;
use proptest::prelude::*;

fn group() -> &'static GroupParams {
    static G: OnceLock<Crypto> = OnceLock::new();
    G.get_or_init(|| Crypto::setup(b"field-group-tests").unwrap()).group()
}

fn toy() -> GroupParams {
    GroupParams::from_parts(23u32.into(), 11u32.into(), 2u32.into(), 3u32.into()).unwrap()
}

#[test]
fn production_group_shape() {
    let g = group();
    assert_eq!(g.q(), &BigUint::from(MERSENNE_127));
    assert!(g.p().bits() >= 256);
    assert_eq!((g.p() - 1u32) % g.q(), BigUint::from(0u32));
    assert!(g.is_member(g.g()) && g.is_member(g.h()));
    assert_ne!(g.g(), g.h());
}

#[test]
fn toy_group_commitments_match_hand_computation() {
    let g = toy();
    // 2^4 * 3^5 mod 23
    assert_eq!(commit_values(&g, 4, 5).unwrap().value(), &BigUint::from((16u32 * 243) % 23));
    assert!(commit_values(&g, 11, 0).is_err());
}

#[test]
fn bad_group_parameters_are_refused() {
    assert!(GroupParams::from_parts(23u32.into(), 7u32.into(), 2u32.into(), 3u32.into()).is_err());
    assert!(GroupParams::from_parts(23u32.into(), 11u32.into(), 5u32.into(), 3u32.into()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_ops_match_bigint(a in 0..MERSENNE_127, b in 0..MERSENNE_127) {
        let f = PrimeField::mersenne127();
        let q = BigUint::from(MERSENNE_127);
        let (x, y) = (f.element(a), f.element(b));
        let big = |v: u128| BigUint::from(v);
        prop_assert_eq!(big((x + y).value()), (big(a) + big(b)) % &q);
        prop_assert_eq!(big((x * y).value()), (big(a) * big(b)) % &q);
        prop_assert_eq!(big((x - y).value()), (big(a) + &q - big(b)) % &q);
        if a != 0 {
            prop_assert_eq!((x * x.inverse().unwrap()).value(), 1);
        }
    }

    #[test]
    fn commitments_are_additively_homomorphic(x1 in 0..MERSENNE_127, r1 in 0..MERSENNE_127, x2 in 0..MERSENNE_127, r2 in 0..MERSENNE_127) {
        let g = group();
        let f = g.scalar_field();
        let (x1, r1, x2, r2) = (f.element(x1), f.element(r1), f.element(x2), f.element(r2));
        let c1 = pedersen_commit(g, &x1, &r1).unwrap();
        let c2 = pedersen_commit(g, &x2, &r2).unwrap();
        let sum = pedersen_commit(g, &(x1 + x2), &(r1 + r2)).unwrap();
        prop_assert_eq!(&commitment_combine(g, &c1, &c2), &sum);
        prop_assert_eq!(commitment_combine_all(g, [&c1, &c2]), sum.clone());
        let good = Opening { x: x1 + x2, r: r1 + r2 };
        let bad = Opening { x: x1 + x2 + f.one(), r: r1 + r2 };
        prop_assert!(pedersen_verify_opening(g, &sum, &good));
        prop_assert!(!pedersen_verify_opening(g, &sum, &bad));
    }
}
