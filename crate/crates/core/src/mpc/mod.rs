//! Additive secret sharing over a prime field with dealer-generated Beaver
//! triples.
//!
//! A [`Session`] represents one committee of `n` parties. Every
//! multiplication, settlement or secure sum takes one broadcast round in
//! which each party sends one message to all others; the session logs round
//! and message counts in a [`RoundLog`].
//!
//! Triples come from a trusted dealer during an offline phase. The dealer is
//! a simulation role.

mod exec;
mod session;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field_group::{FieldElement, PrimeField};
use crate::keccak::keccak256_concat;

pub use exec::{Executor, LatencyModel};
pub use session::{Session, SessionConfig, Transcript, TranscriptMessage, TranscriptRound};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MpcError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("reconstruction error: {0}")]
    Reconstruction(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Identifies which secret a share belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShareTag(pub Vec<u8>);

impl ShareTag {
    pub fn new(label: impl AsRef<[u8]>) -> Self {
        ShareTag(label.as_ref().to_vec())
    }

    /// Tag for a value computed from other shared values.
    pub fn derive(op: &str, inputs: &[&ShareTag]) -> Self {
        let mut parts: Vec<&[u8]> = vec![op.as_bytes()];
        let lens: Vec<[u8; 4]> = inputs.iter().map(|t| (t.0.len() as u32).to_be_bytes()).collect();
        for (t, len) in inputs.iter().zip(&lens) {
            parts.push(len);
            parts.push(&t.0);
        }
        ShareTag(keccak256_concat(parts)[..16].to_vec())
    }
}

/// One party's share of a secret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdditiveShare {
    /// 1-based.
    pub party_id: usize,
    pub value: FieldElement,
    pub tag: ShareTag,
}

/// A correlated triple `(a, b, c)` with `c = a * b`, shared across the committee.
#[derive(Clone, Debug)]
pub struct BeaverTriple {
    pub id: u64,
    pub a_shares: Vec<AdditiveShare>,
    pub b_shares: Vec<AdditiveShare>,
    pub c_shares: Vec<AdditiveShare>,
}

/// What party `i` broadcasts in a multiplication round: `d_i = m_i - a_i`
/// and `e'_i = e_i - b_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskBroadcast {
    pub party_id: usize,
    pub d_i: FieldElement,
    pub e_i: FieldElement,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    /// Dealer rounds spent producing triples.
    pub offline_rounds: u64,
    /// Messages the dealer sent, one per party per triple.
    pub offline_messages: u64,
    /// Computation broadcast rounds.
    pub online_rounds: u64,
    /// Online messages; each party's broadcast counts once.
    pub messages: u64,
    /// Output openings performed after computation.
    pub openings: u64,
    /// Simulated network time across online rounds.
    pub elapsed_micros: u64,
}

fn check_parties(n: usize) -> Result<(), MpcError> {
    if n < 2 {
        return Err(MpcError::Config(format!("need at least 2 parties, got {n}")));
    }
    Ok(())
}

/// Splits `x` into `n` shares: `n - 1` uniform values and a balancing last share.
pub fn share_secret<R: Rng + ?Sized>(
    x: FieldElement,
    n: usize,
    tag: ShareTag,
    rng: &mut R,
) -> Result<Vec<AdditiveShare>, MpcError> {
    check_parties(n)?;
    let field = x.field();
    let mut shares = Vec::with_capacity(n);
    let mut acc = field.zero();
    for party_id in 1..n {
        let v = field.random(rng);
        acc += v;
        shares.push(AdditiveShare {
            party_id,
            value: v,
            tag: tag.clone(),
        });
    }
    shares.push(AdditiveShare {
        party_id: n,
        value: x - acc,
        tag,
    });
    Ok(shares)
}

/// Checks that `shares` holds exactly one share per party `1..=n` under a
/// single tag and field, and returns them ordered by party.
pub(crate) fn ordered(
    shares: &[AdditiveShare],
    n: usize,
) -> Result<Vec<&AdditiveShare>, MpcError> {
    if shares.len() != n {
        return Err(MpcError::Reconstruction(format!(
            "expected {n} shares, got {}",
            shares.len()
        )));
    }
    let tag = &shares[0].tag;
    let modulus = shares[0].value.modulus();
    let mut slots: Vec<Option<&AdditiveShare>> = vec![None; n];
    for s in shares {
        if &s.tag != tag {
            return Err(MpcError::Reconstruction("tag mismatch".into()));
        }
        if s.value.modulus() != modulus {
            return Err(MpcError::Reconstruction("field mismatch".into()));
        }
        if s.party_id == 0 || s.party_id > n {
            return Err(MpcError::Reconstruction(format!("unknown party {}", s.party_id)));
        }
        if slots[s.party_id - 1].replace(s).is_some() {
            return Err(MpcError::Reconstruction(format!(
                "duplicate share from party {}",
                s.party_id
            )));
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("every slot filled")).collect())
}

/// Sums a full share vector. The party count is taken to be the highest
/// party id present, so a missing party is an error.
pub fn reconstruct(shares: &[AdditiveShare]) -> Result<FieldElement, MpcError> {
    if shares.is_empty() {
        return Err(MpcError::Reconstruction("no shares".into()));
    }
    let n = shares.iter().map(|s| s.party_id).max().unwrap_or(0).max(shares.len());
    let ordered = ordered(shares, n)?;
    Ok(ordered.into_iter().map(|s| s.value).sum())
}

/// Like [`reconstruct`] with the party count stated up front.
pub fn reconstruct_n(shares: &[AdditiveShare], n: usize) -> Result<FieldElement, MpcError> {
    let ordered = ordered(shares, n)?;
    Ok(ordered.into_iter().map(|s| s.value).sum())
}

/// Shares a fresh triple over `field`. Counters are the caller's concern;
/// [`Session::dealer_gen_triple`] wraps this and logs the offline round.
pub fn deal_triple<R: Rng + ?Sized>(
    field: PrimeField,
    n: usize,
    id: u64,
    rng: &mut R,
) -> Result<BeaverTriple, MpcError> {
    let a = field.random(rng);
    let b = field.random(rng);
    deal_triple_from(a, b, n, id, rng)
}

/// Shares the triple `(a, b, a*b)`; tests use this to pin the masks.
pub fn deal_triple_from<R: Rng + ?Sized>(
    a: FieldElement,
    b: FieldElement,
    n: usize,
    id: u64,
    rng: &mut R,
) -> Result<BeaverTriple, MpcError> {
    check_parties(n)?;
    let tag = |name: &str| ShareTag::new(format!("triple/{id}/{name}"));
    Ok(BeaverTriple {
        id,
        a_shares: share_secret(a, n, tag("a"), rng)?,
        b_shares: share_secret(b, n, tag("b"), rng)?,
        c_shares: share_secret(a * b, n, tag("c"), rng)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn f101() -> PrimeField {
        PrimeField::new(101).unwrap()
    }

    fn shares_of(values: &[u128], tag: &str) -> Vec<AdditiveShare> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| AdditiveShare {
                party_id: i + 1,
                value: f101().element(*v),
                tag: ShareTag::new(tag),
            })
            .collect()
    }

    #[test]
    fn reconstruct_examples() {
        assert_eq!(reconstruct(&shares_of(&[4, 6, 20], "x")).unwrap().value(), 30);
        assert_eq!(reconstruct(&shares_of(&[50, 51], "x")).unwrap().value(), 0);
        let mut missing = shares_of(&[4, 6, 20], "x");
        missing.remove(1);
        assert!(matches!(reconstruct(&missing), Err(MpcError::Reconstruction(_))));
        let mut mixed = shares_of(&[4, 6, 20], "x");
        mixed[2].tag = ShareTag::new("y");
        assert!(reconstruct(&mixed).is_err());
        assert!(reconstruct_n(&shares_of(&[4, 6], "x"), 3).is_err());
    }

    #[test]
    fn share_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let s = share_secret(f101().element(30), 3, ShareTag::new("x"), &mut rng).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(reconstruct(&s).unwrap().value(), 30);

        let z = share_secret(f101().zero(), 2, ShareTag::new("z"), &mut rng).unwrap();
        assert_eq!((z[0].value + z[1].value).value(), 0);

        let again = |seed| {
            let mut r = ChaCha20Rng::seed_from_u64(seed);
            share_secret(f101().element(9), 4, ShareTag::new("x"), &mut r).unwrap()
        };
        assert_eq!(again(7), again(7));

        assert!(matches!(
            share_secret(f101().one(), 1, ShareTag::new("x"), &mut rng),
            Err(MpcError::Config(_))
        ));
    }

    #[test]
    fn dealt_triples_multiply() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let f = f101();
        let t = deal_triple_from(f.element(5), f.element(7), 3, 0, &mut rng).unwrap();
        assert_eq!(reconstruct(&t.c_shares).unwrap().value(), 35);
        let t = deal_triple_from(f.zero(), f.element(42), 3, 1, &mut rng).unwrap();
        assert_eq!(reconstruct(&t.c_shares).unwrap().value(), 0);
        for id in 0..100 {
            let t = deal_triple(f, 4, id, &mut rng).unwrap();
            let a = reconstruct(&t.a_shares).unwrap();
            let b = reconstruct(&t.b_shares).unwrap();
            assert_eq!(a * b, reconstruct(&t.c_shares).unwrap());
        }
    }

    #[test]
    fn derived_tags_are_stable_and_distinct() {
        let a = ShareTag::new("a");
        let b = ShareTag::new("b");
        assert_eq!(ShareTag::derive("mul", &[&a, &b]), ShareTag::derive("mul", &[&a, &b]));
        assert_ne!(ShareTag::derive("mul", &[&a, &b]), ShareTag::derive("mul", &[&b, &a]));
    }
}
