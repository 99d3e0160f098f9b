use std::sync::OnceLock;

use gridswap::amm::{ratio, Side};
use gridswap::mpc::{Session, SessionConfig};
use gridswap::protocol::{
    account_address, json_contains_value, prepare_order, renderings, reveal_and_settle, run_init_phase,
    run_trading_phase, Crypto, FixedPool, LpInput, OrderInput, ProtocolError, RunLog, Token, TradeOutcome, SCALE,
};
use gridswap::state_trie::{encode_account_leaf, verify_account_proof, AccountLeaf, MptProof, Trie, U256, LEAF_LEN};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn crypto() -> &'static Crypto {
    static C: OnceLock<Crypto> = OnceLock::new();
    C.get_or_init(|| Crypto::setup(b"protocol-tests").unwrap())
}

struct World {
    trie: Trie,
}

impl World {
    fn new(accounts: &[(&str, Token, u128)]) -> Self {
        let mut trie = Trie::new();
        for &(id, token, bal) in accounts {
            let leaf = AccountLeaf {
                nonce: 1,
                balance: U256::from_u128(bal),
                ..AccountLeaf::default()
            };
            trie.insert(&account_address(id, token), &leaf).unwrap();
        }
        World { trie }
    }

    fn leaf_and_proof(&self, id: &str, token: Token) -> ([u8; LEAF_LEN], MptProof) {
        let addr = account_address(id, token);
        let leaf = encode_account_leaf(&self.trie.get(&addr).unwrap()).unwrap();
        (leaf, self.trie.prove_account(&addr).unwrap())
    }

    fn lp_checker(&self) -> impl Fn(&str, &MptProof) -> Result<AccountLeaf, String> + '_ {
        let root = self.trie.root();
        move |id: &str, p: &MptProof| {
            verify_account_proof(&root, &account_address(id, Token::Energy), p).map_err(|e| e.to_string())
        }
    }
}

fn session(n: usize) -> Session {
    Session::new(SessionConfig::new(n, crypto().field())).unwrap()
}

fn lp(world: &World, id: &str, liquidity: u128) -> LpInput {
    let (leaf, account_proof) = world.leaf_and_proof(id, Token::Energy);
    LpInput {
        lp_id: id.into(),
        liquidity,
        leaf,
        account_proof,
    }
}

#[test]
fn init_sums_admitted_providers() {
    let world = World::new(&[
        ("a", Token::Energy, 500 * SCALE),
        ("b", Token::Energy, 500 * SCALE),
        ("c", Token::Energy, 500 * SCALE),
        ("poor", Token::Energy, SCALE / 2),
    ]);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut s = session(4);
    let mut log = RunLog::default();
    let lps = [
        lp(&world, "a", 30 * SCALE),
        lp(&world, "poor", 40 * SCALE),
        lp(&world, "b", 50 * SCALE),
        lp(&world, "c", 20 * SCALE),
    ];
    let out = run_init_phase(crypto(), &mut s, &lps, SCALE, 200 * SCALE, world.lp_checker(), &mut log, 0, &mut rng).unwrap();
    assert_eq!(out.accepted, vec!["a", "b", "c"]);
    assert_eq!(out.rejected[0].0, "poor");
    assert_eq!(out.rejected[0].1, "balance meets threshold");
    assert_eq!(out.total, Some(100 * SCALE));
    assert_eq!(out.pool, Some(FixedPool { e: 100 * SCALE, m: 200 * SCALE }));

    // no individual contribution shows up in the log or the transcript
    let mut needles = Vec::new();
    for x in [30, 40, 50, 20] {
        needles.extend(renderings(x * SCALE));
    }
    for e in &log.events {
        assert!(!json_contains_value(&e.payload, &needles), "{e:?}");
    }
    let transcript = serde_json::to_value(s.transcript()).unwrap();
    assert!(!json_contains_value(&transcript, &needles));
}

#[test]
fn init_with_forged_account_excludes_provider() {
    let world = World::new(&[("a", Token::Energy, 500 * SCALE), ("b", Token::Energy, 500 * SCALE)]);
    let other = World::new(&[("b", Token::Energy, 900 * SCALE)]);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut s = session(3);
    let mut log = RunLog::default();
    let mut forged = lp(&other, "b", 5 * SCALE);
    forged.account_proof = other.leaf_and_proof("b", Token::Energy).1;
    let lps = [lp(&world, "a", 7 * SCALE), forged];
    let out = run_init_phase(crypto(), &mut s, &lps, SCALE, 10 * SCALE, world.lp_checker(), &mut log, 0, &mut rng).unwrap();
    assert_eq!(out.accepted, vec!["a"]);
    assert_eq!(out.total, Some(7 * SCALE));
}

#[test]
fn no_providers_leaves_pool_closed() {
    let world = World::new(&[("a", Token::Energy, 1)]);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut s = session(3);
    let mut log = RunLog::default();
    let out = run_init_phase(crypto(), &mut s, &[lp(&world, "a", SCALE)], SCALE, SCALE, world.lp_checker(), &mut log, 0, &mut rng)
        .unwrap();
    assert!(out.pool.is_none());
    assert_eq!(log.events.last().unwrap().event, "pool_unopened");
}

fn order(world: &World, side: Side, quantity: u128, lock: u128) -> OrderInput {
    let token = match side {
        Side::Buy => Token::Money,
        Side::Sell => Token::Energy,
    };
    let (leaf, account_proof) = world.leaf_and_proof("t", token);
    OrderInput {
        tx_id: 7,
        trader: "t".into(),
        side,
        quantity,
        limit: None,
        lock,
        leaf,
        account_proof,
    }
}

#[test]
fn hidden_buy_settles_to_published_pool() {
    let world = World::new(&[("t", Token::Money, 1_000 * SCALE), ("t", Token::Energy, 1_000 * SCALE)]);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut s = session(4);
    let mut log = RunLog::default();
    let pool = FixedPool::new(100 * SCALE, 100 * SCALE, crypto().field().modulus()).unwrap();
    let prepared = prepare_order(crypto(), 4, &order(&world, Side::Buy, 10 * SCALE, 64 * SCALE), &mut rng).unwrap();
    let before = s.log();
    let TradeOutcome::Settled(pending) = run_trading_phase(crypto(), &mut s, pool, &prepared, &mut log, 1, &mut rng).unwrap()
    else {
        panic!("trade did not settle")
    };
    let after = s.log();
    assert_eq!(after.online_rounds - before.online_rounds, 1);
    assert_eq!(after.messages - before.messages, 4);

    // nothing about the order before the reveal
    let needles: Vec<String> = renderings(10 * SCALE).into_iter().chain(renderings(11_111_112)).collect();
    for e in &log.events {
        assert!(!json_contains_value(&e.payload, &needles), "{e:?}");
    }

    assert_eq!(
        reveal_and_settle(crypto(), &mut s, &pending, false, true, &mut log, 2),
        Err(ProtocolError::NotFinalized(7))
    );
    let revealed = reveal_and_settle(crypto(), &mut s, &pending, true, true, &mut log, 2).unwrap();
    assert_eq!(revealed.pool, FixedPool { e: 90 * SCALE, m: 111_111_112 });
    assert_eq!(revealed.energy_delta, 10 * SCALE as i128);
    assert_eq!(revealed.money_delta, -11_111_112);
    assert_eq!(revealed.bid.unwrap().quantity, 10 * SCALE);
    // exact reference: 1000/9 - 100 = 100/9, within one unit
    let exact = ratio(100, 9);
    let paid = gridswap::protocol::to_rational(11_111_112);
    assert!(paid >= exact && paid - exact < gridswap::protocol::to_rational(1));
}

#[test]
fn hidden_sell_settles() {
    let world = World::new(&[("t", Token::Energy, 1_000 * SCALE)]);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut s = session(3);
    let mut log = RunLog::default();
    let pool = FixedPool::new(100 * SCALE, 100 * SCALE, crypto().field().modulus()).unwrap();
    let prepared = prepare_order(crypto(), 3, &order(&world, Side::Sell, 25 * SCALE, 64 * SCALE), &mut rng).unwrap();
    let TradeOutcome::Settled(pending) = run_trading_phase(crypto(), &mut s, pool, &prepared, &mut log, 1, &mut rng).unwrap()
    else {
        panic!("trade did not settle")
    };
    let r = reveal_and_settle(crypto(), &mut s, &pending, true, false, &mut log, 2).unwrap();
    assert_eq!(r.pool, FixedPool { e: 125 * SCALE, m: 80 * SCALE });
    assert_eq!(r.money_delta, 20 * SCALE as i128);
    assert!(r.bid.is_none());
}

#[test]
fn poisoned_shares_void_the_trade() {
    let world = World::new(&[("t", Token::Money, 1_000 * SCALE)]);
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut s = session(4);
    let mut log = RunLog::default();
    let pool = FixedPool::new(100 * SCALE, 100 * SCALE, crypto().field().modulus()).unwrap();
    let mut prepared = prepare_order(crypto(), 4, &order(&world, Side::Buy, 10 * SCALE, 64 * SCALE), &mut rng).unwrap();
    prepared.tamper_share(3, 1);
    let out = run_trading_phase(crypto(), &mut s, pool, &prepared, &mut log, 1, &mut rng).unwrap();
    assert!(matches!(out, TradeOutcome::Voided { ref reason } if reason == "poisoning"));
    assert_eq!(s.log().online_rounds, 0);
}

#[test]
fn limits_locks_and_drains() {
    let world = World::new(&[("t", Token::Money, 1_000 * SCALE), ("t", Token::Energy, 1_000 * SCALE)]);
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut s = session(3);
    let mut log = RunLog::default();
    let pool = FixedPool::new(100 * SCALE, 100 * SCALE, crypto().field().modulus()).unwrap();

    let mut o = order(&world, Side::Buy, 10 * SCALE, 64 * SCALE);
    o.limit = Some(ratio(11, 10));
    let p = prepare_order(crypto(), 3, &o, &mut rng).unwrap();
    assert!(matches!(
        run_trading_phase(crypto(), &mut s, pool, &p, &mut log, 1, &mut rng).unwrap(),
        TradeOutcome::Withdrawn { .. }
    ));

    let p = prepare_order(crypto(), 3, &order(&world, Side::Buy, 10 * SCALE, 5 * SCALE), &mut rng).unwrap();
    assert!(matches!(
        run_trading_phase(crypto(), &mut s, pool, &p, &mut log, 1, &mut rng).unwrap(),
        TradeOutcome::Withdrawn { .. }
    ));

    let p = prepare_order(crypto(), 3, &order(&world, Side::Buy, 100 * SCALE, 1_000 * SCALE), &mut rng).unwrap();
    let err = run_trading_phase(crypto(), &mut s, pool, &p, &mut log, 1, &mut rng).unwrap_err();
    assert!(err.to_string().contains("liquidity error"));

    // a lock above the balance cannot be proven
    let err = prepare_order(crypto(), 3, &order(&world, Side::Buy, SCALE, 2_000 * SCALE), &mut rng).unwrap_err();
    assert!(err.to_string().contains("balance meets threshold"));
}
