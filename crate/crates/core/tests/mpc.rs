use gridswap::field_group::{PrimeField, MERSENNE_127};
use gridswap::mpc::{deal_triple_from, reconstruct, share_secret, Executor, Session, SessionConfig, ShareTag};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn field() -> PrimeField {
    PrimeField::mersenne127()
}

fn product_run(executor: Executor, seed: u64) -> (u128, gridswap::mpc::Transcript) {
    let f = field();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut s = Session::new(SessionConfig::new(5, f).with_executor(executor)).unwrap();
    let ms = share_secret(f.element(12), 5, ShareTag::new("m"), &mut rng).unwrap();
    let es = share_secret(f.element(34), 5, ShareTag::new("e"), &mut rng).unwrap();
    let t = s.dealer_gen_triple(&mut rng).unwrap();
    let out = s.settle_product(&ms, &es, f.element(100), f.element(200), &t).unwrap();
    let v = s.open(&out, "product").unwrap().value();
    (v, s.into_transcript())
}

#[test]
fn threaded_and_sequential_agree() {
    let (a, ta) = product_run(Executor::Sequential, 9);
    let (b, tb) = product_run(Executor::Threaded, 9);
    assert_eq!(a, 112 * 234);
    assert_eq!(a, b);
    assert_eq!(ta, tb);
}

#[test]
fn transcript_holds_masked_values_only() {
    let f = field();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut s = Session::new(SessionConfig::new(3, f)).unwrap();
    let ms = share_secret(f.element(777), 3, ShareTag::new("m"), &mut rng).unwrap();
    let es = share_secret(f.element(555), 3, ShareTag::new("e"), &mut rng).unwrap();
    let t = deal_triple_from(f.element(1_000), f.element(2_000), 3, 0, &mut rng).unwrap();
    s.beaver_mul(&ms, &es, &t).unwrap();
    let round = &s.transcript().rounds[0];
    assert_eq!(round.messages.len(), 3);
    // the opened masks are m - a and e - b, nothing about m or e alone
    let sum = |i: usize| -> u128 {
        round
            .messages
            .iter()
            .map(|m| f.element(m.values[i].parse().unwrap()))
            .sum::<gridswap::field_group::FieldElement>()
            .value()
    };
    assert_eq!(sum(0), (f.element(777) - f.element(1_000)).value());
    assert_eq!(sum(1), (f.element(555) - f.element(2_000)).value());
}

#[test]
fn sessions_reject_too_few_parties_and_short_vectors() {
    let f = field();
    assert!(Session::new(SessionConfig::new(1, f)).is_err());
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut s = Session::new(SessionConfig::new(4, f)).unwrap();
    let ms = share_secret(f.element(1), 3, ShareTag::new("m"), &mut rng).unwrap();
    let es = share_secret(f.element(1), 4, ShareTag::new("e"), &mut rng).unwrap();
    let t = s.dealer_gen_triple(&mut rng).unwrap();
    assert!(s.beaver_mul(&ms, &es, &t).is_err());
    assert!(reconstruct(&[ms[0].clone(), ms[2].clone()]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shares_reconstruct(x in 0..MERSENNE_127, n in 2usize..12, seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let shares = share_secret(field().element(x), n, ShareTag::new("x"), &mut rng).unwrap();
        prop_assert_eq!(shares.len(), n);
        prop_assert_eq!(reconstruct(&shares).unwrap().value(), x);
    }

    #[test]
    fn settle_product_matches_bigint(m in 0..MERSENNE_127, e in 0..MERSENNE_127, mp in 0..MERSENNE_127, ep in 0..MERSENNE_127, n in 3usize..=10, seed: u64) {
        let f = field();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut s = Session::new(SessionConfig::new(n, f)).unwrap();
        let ms = share_secret(f.element(m), n, ShareTag::new("m"), &mut rng).unwrap();
        let es = share_secret(f.element(e), n, ShareTag::new("e"), &mut rng).unwrap();
        let t = s.dealer_gen_triple(&mut rng).unwrap();
        let out = s.settle_product(&ms, &es, f.element(mp), f.element(ep), &t).unwrap();
        let big = BigUint::from;
        let expected = (big(mp) + big(m)) * (big(ep) + big(e)) % big(MERSENNE_127);
        prop_assert_eq!(big(reconstruct(&out).unwrap().value()), expected);
        prop_assert_eq!(s.log().online_rounds, 1);
        prop_assert_eq!(s.log().messages, n as u64);
    }

    #[test]
    fn secure_sum_matches_plain_sum(xs in prop::collection::vec(0..1u128 << 100, 2..10), seed: u64) {
        let f = field();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut s = Session::new(SessionConfig::new(4, f)).unwrap();
        let matrix: Vec<_> = xs
            .iter()
            .map(|&x| share_secret(f.element(x), 4, ShareTag::new("lp"), &mut rng).unwrap())
            .collect();
        let total = s.secure_sum(&matrix).unwrap();
        prop_assert_eq!(total.value(), xs.iter().fold(f.zero(), |acc, &x| acc + f.element(x)).value());
        prop_assert_eq!(s.log().online_rounds, 1);
    }
}
