//! Hidden-order exchange protocol: liquidity initialization with a secure
//! sum, hidden trades settled by the MPC committee, and post-finalization
//! reveal.
//!
//! Amounts on this path are fixed-point integers with six decimals. The
//! published pool is `(E, M)` in those units; settlement rounds the money
//! reserve up so the product never drops below `C = E * M`.

mod commit;
mod init;
mod trade;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::amm::{AmmError, Rational};
use crate::balance_proof::{circuit_build, setup, BalanceProofError, ProvingKey, VerifyingKey};
use crate::field_group::{GroupError, GroupParams, PrimeField};
use crate::keccak::keccak256_concat;
use crate::mpc::MpcError;
use crate::state_trie::Address;

pub use commit::admit_submission;
pub use init::{run_init_phase, InitOutcome, LpInput, LpSubmission};
pub use trade::{
    prepare_order, reveal_and_settle, run_trading_phase, Bid, OrderInput, PendingSettlement,
    PreparedOrder, Revealed, TradeOutcome, TradeSubmission,
};

/// Fixed-point scale: one token is `10^6` units.
pub const SCALE: u128 = 1_000_000;
pub const DECIMALS: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Proof(#[from] BalanceProofError),
    #[error("invalid amount: {0}")]
    Amount(String),
    #[error("settlement {0} is not finalized")]
    NotFinalized(u64),
    #[error("reserves too large for the field: E * M must stay below {0}")]
    Overflow(u128),
    #[error("pool is not open")]
    PoolClosed,
}

/// Commitment group and proof keys shared by every participant.
#[derive(Clone, Debug)]
pub struct Crypto {
    pub pk: ProvingKey,
    pub vk: VerifyingKey,
}

impl Crypto {
    /// Runs the proof setup for `seed`; the commitment group is the one the
    /// keys live in.
    pub fn setup(seed: &[u8]) -> Result<Self, ProtocolError> {
        let (pk, vk) = setup(&circuit_build(), seed)?;
        Ok(Crypto { pk, vk })
    }

    pub fn group(&self) -> &GroupParams {
        &self.vk.group
    }

    /// Field shared by commitments and the MPC session.
    pub fn field(&self) -> PrimeField {
        self.vk.group.scalar_field()
    }
}

/// Parses a non-negative decimal with at most six fractional digits into
/// fixed-point units.
pub fn parse_amount(s: &str) -> Result<u128, ProtocolError> {
    let bad = || ProtocolError::Amount(format!("`{s}` is not a decimal with at most {DECIMALS} places"));
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    if whole.is_empty() || frac.len() > DECIMALS as usize || (s.contains('.') && frac.is_empty()) {
        return Err(bad());
    }
    if !whole.bytes().chain(frac.bytes()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let w: u128 = whole.parse().map_err(|_| bad())?;
    let f: u128 = if frac.is_empty() {
        0
    } else {
        format!("{frac:0<6}").parse().map_err(|_| bad())?
    };
    w.checked_mul(SCALE).and_then(|v| v.checked_add(f)).ok_or_else(bad)
}

/// `units / 10^6` as an exact rational.
pub fn to_rational(units: u128) -> Rational {
    Rational::new(BigInt::from(units), BigInt::from(SCALE))
}

/// Renders fixed-point units as a plain decimal with six places.
pub fn format_units(units: u128) -> String {
    format!("{}.{:06}", units / SCALE, units % SCALE)
}

/// Every public rendering of an amount: raw units, six-place decimal and
/// trimmed decimal. Used by leakage audits.
pub fn renderings(units: u128) -> Vec<String> {
    let fixed = format_units(units);
    let trimmed = fixed.trim_end_matches('0').trim_end_matches('.').to_string();
    let mut out = vec![units.to_string(), fixed, trimmed];
    out.dedup();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Token {
    Energy,
    Money,
}

/// Each trader holds one account per token.
pub fn account_address(peer_id: &str, token: Token) -> Address {
    let tag: &[u8] = match token {
        Token::Energy => b"E",
        Token::Money => b"M",
    };
    let h = keccak256_concat([&b"gridswap/account"[..], peer_id.as_bytes(), tag]);
    h[..20].try_into().expect("20 bytes")
}

/// Published pool reserves in fixed-point units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPool {
    pub e: u128,
    pub m: u128,
}

impl FixedPool {
    /// Rejects empty reserves and products that would wrap in `Z_p`.
    pub fn new(e: u128, m: u128, modulus: u128) -> Result<Self, ProtocolError> {
        if e == 0 || m == 0 {
            return Err(AmmError::NonPositiveReserve {
                e: to_rational(e).into(),
                m: to_rational(m).into(),
            }
            .into());
        }
        match e.checked_mul(m) {
            Some(c) if c < modulus / 2 => Ok(FixedPool { e, m }),
            _ => Err(ProtocolError::Overflow(modulus / 2)),
        }
    }

    pub fn c(&self) -> u128 {
        self.e * self.m
    }

    /// Money paid for `e` energy: `ceil(C / (E - e)) - M`.
    pub fn buy_cost(&self, e: u128) -> Result<u128, ProtocolError> {
        if e == 0 {
            return Err(AmmError::Range(to_rational(0)).into());
        }
        if e >= self.e {
            return Err(AmmError::Liquidity {
                requested: to_rational(e).into(),
                available: to_rational(self.e).into(),
            }
            .into());
        }
        Ok(self.c().div_ceil(self.e - e) - self.m)
    }

    /// Money received for `e` energy: `M - ceil(C / (E + e))`.
    pub fn sell_proceeds(&self, e: u128) -> Result<u128, ProtocolError> {
        if e == 0 {
            return Err(AmmError::Range(to_rational(0)).into());
        }
        let grown = self.e.checked_add(e).ok_or(ProtocolError::Overflow(u128::MAX))?;
        Ok(self.m - self.c().div_ceil(grown))
    }
}

/// One line of `run.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub actor: String,
    pub event: String,
    pub payload: Value,
}

/// Ordered public event log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub events: Vec<Event>,
}

impl RunLog {
    pub fn push(&mut self, tick: u64, actor: impl Into<String>, event: impl Into<String>, payload: Value) {
        self.events.push(Event {
            tick,
            actor: actor.into(),
            event: event.into(),
            payload,
        });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(RunLog { events })
    }
}

/// True if any string or number leaf of `v` equals one of `needles`.
pub fn json_contains_value(v: &Value, needles: &[String]) -> bool {
    match v {
        Value::String(s) => needles.iter().any(|n| n == s),
        Value::Number(n) => needles.iter().any(|x| *x == n.to_string()),
        Value::Array(a) => a.iter().any(|x| json_contains_value(x, needles)),
        Value::Object(o) => o.iter().any(|(k, x)| needles.contains(k) || json_contains_value(x, needles)),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amm::pool_init;

    #[test]
    fn amounts_parse_exactly() {
        assert_eq!(parse_amount("10").unwrap(), 10_000_000);
        assert_eq!(parse_amount("0.5").unwrap(), 500_000);
        assert_eq!(parse_amount("1.000001").unwrap(), 1_000_001);
        for bad in ["", ".5", "1.", "1.0000001", "-1", "1e3", "x"] {
            assert!(parse_amount(bad).is_err(), "{bad}");
        }
        assert_eq!(format_units(1_500_000), "1.500000");
        assert_eq!(renderings(1_500_000), vec!["1500000", "1.500000", "1.5"]);
    }

    #[test]
    fn fixed_buy_example() {
        // (100, 100), buy 10: M' = ceil(10^16 / 9*10^7) = 111111112
        let p = FixedPool::new(100 * SCALE, 100 * SCALE, u128::MAX).unwrap();
        let cost = p.buy_cost(10 * SCALE).unwrap();
        assert_eq!(p.m + cost, 111_111_112);
        let exact = pool_init(to_rational(p.e), to_rational(p.m)).unwrap();
        let q = exact.quote_buy(&to_rational(10 * SCALE)).unwrap();
        let diff = to_rational(cost) - q.amount_in;
        assert!(diff >= to_rational(0) && diff < to_rational(1));
        assert!(matches!(p.buy_cost(100 * SCALE), Err(ProtocolError::Amm(AmmError::Liquidity { .. }))));
    }

    #[test]
    fn fixed_sell_rounds_for_pool() {
        let p = FixedPool::new(100 * SCALE, 100 * SCALE, u128::MAX).unwrap();
        let out = p.sell_proceeds(3 * SCALE).unwrap();
        let m_new = p.m - out;
        let e_new = p.e + 3 * SCALE;
        assert!(e_new * m_new >= p.c());
        assert!(e_new * m_new < p.c() + e_new);
    }

    #[test]
    fn overflow_rejected() {
        let q = crate::field_group::MERSENNE_127;
        assert!(FixedPool::new(1 << 63, (1 << 63) - 1, q).is_ok());
        assert!(FixedPool::new(1 << 63, 1 << 63, q).is_err());
        assert_eq!(FixedPool::new(1 << 64, 1 << 63, q), Err(ProtocolError::Overflow(q / 2)));
    }

    #[test]
    fn addresses_differ_by_token() {
        assert_ne!(account_address("a", Token::Energy), account_address("a", Token::Money));
        assert_ne!(account_address("a", Token::Energy), account_address("b", Token::Energy));
    }

    #[test]
    fn json_audit_finds_leaves() {
        let v = serde_json::json!({"a": [1, {"b": "2.5"}], "c": 7});
        assert!(json_contains_value(&v, &["2.5".into()]));
        assert!(json_contains_value(&v, &["7".into()]));
        assert!(!json_contains_value(&v, &["3".into()]));
    }
}
