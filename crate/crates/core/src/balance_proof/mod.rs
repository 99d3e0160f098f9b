//! Proof that an account leaf committed in the state trie holds at least a
//! public threshold `k`, without revealing the leaf.
//!
//! The circuit has two assertions: the private 112-byte leaf hashes to the
//! public `leaf_hash`, and its balance, split into 128-bit limbs, compares
//! greater than or equal to `(k_hi, k_lo)`. The proof system follows the
//! usual four algorithms (`setup_params`, `generate_keys`, `prove`,
//! `verify`) on top of a deterministic attestation backend.

mod backend;
mod circuit;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::keccak::{keccak256, keccak256_concat};
use crate::state_trie::{U256, LEAF_LEN};

pub use backend::{generate_keys, prove, setup, setup_params, verify, Proof, ProvingKey, PublicParams, VerifyingKey};
pub use circuit::{circuit_build, Constraint, ConstraintSystem, LEAF_FORMAT, LEAF_INTEGRITY, THRESHOLD};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BalanceProofError {
    #[error("malformed leaf: {0}")]
    MalformedLeaf(String),
    #[error("constraint `{constraint}` is not satisfied")]
    Unsatisfied { constraint: String },
    #[error("setup failed: {0}")]
    Setup(String),
}

/// Splits the 32-byte balance of a canonical leaf into `(hi, lo)` limbs.
pub fn decode_balance(leaf_rlp: &[u8]) -> Result<(u128, u128), BalanceProofError> {
    if leaf_rlp.len() != LEAF_LEN {
        return Err(BalanceProofError::MalformedLeaf(format!(
            "expected {LEAF_LEN} bytes, got {}",
            leaf_rlp.len()
        )));
    }
    if leaf_rlp[crate::state_trie::BALANCE_ITEM_OFFSET] != 0xa0 {
        return Err(BalanceProofError::MalformedLeaf("no 32-byte item at offset 3".into()));
    }
    let hi = u128::from_be_bytes(leaf_rlp[4..20].try_into().expect("16 bytes"));
    let lo = u128::from_be_bytes(leaf_rlp[20..36].try_into().expect("16 bytes"));
    Ok((hi, lo))
}

/// `(bal_hi > k_hi) or (bal_hi == k_hi and bal_lo >= k_lo)`.
pub fn limb_ge(bal_hi: u128, bal_lo: u128, k_hi: u128, k_lo: u128) -> bool {
    bal_hi > k_hi || (bal_hi == k_hi && bal_lo >= k_lo)
}

/// Big-endian 64-bit limbs; limb 0 is the most significant.
pub fn leaf_hash_limbs(hash: &[u8; 32]) -> [u64; 4] {
    let mut out = [0u64; 4];
    for (limb, chunk) in out.iter_mut().zip(hash.chunks_exact(8)) {
        *limb = u64::from_be_bytes(chunk.try_into().expect("8 bytes"));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PublicInputs {
    pub k_hi: u128,
    pub k_lo: u128,
    pub leaf_hash: [u64; 4],
}

impl PublicInputs {
    pub fn new(k: U256, leaf_hash: &[u8; 32]) -> Self {
        PublicInputs {
            k_hi: k.hi(),
            k_lo: k.lo(),
            leaf_hash: leaf_hash_limbs(leaf_hash),
        }
    }

    /// Publics for proving that `leaf_rlp` holds at least `k`.
    pub fn for_leaf(k: U256, leaf_rlp: &[u8; LEAF_LEN]) -> Self {
        PublicInputs::new(k, &keccak256(leaf_rlp))
    }

    pub fn threshold(&self) -> U256 {
        U256::from_limbs(self.k_hi, self.k_lo)
    }

    pub fn leaf_hash_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (chunk, limb) in out.chunks_exact_mut(8).zip(self.leaf_hash) {
            chunk.copy_from_slice(&limb.to_be_bytes());
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        out.extend(self.k_hi.to_be_bytes());
        out.extend(self.k_lo.to_be_bytes());
        out.extend(self.leaf_hash_bytes());
        out
    }

    pub fn digest(&self) -> [u8; 32] {
        keccak256_concat([&b"gridswap/publics"[..], &self.to_bytes()])
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PublicsJson {
    k_hi: String,
    k_lo: String,
    leaf_hash: [String; 4],
}

impl Serialize for PublicInputs {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PublicsJson {
            k_hi: self.k_hi.to_string(),
            k_lo: self.k_lo.to_string(),
            leaf_hash: self.leaf_hash.map(|l| format!("0x{l:016x}")),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PublicInputs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = PublicsJson::deserialize(d)?;
        let word = |s: &str, name: &str| s.parse::<u128>().map_err(|_| D::Error::custom(format!("{name}: not a 128-bit integer")));
        let mut leaf_hash = [0u64; 4];
        for (out, s) in leaf_hash.iter_mut().zip(&raw.leaf_hash) {
            let digits = s
                .strip_prefix("0x")
                .filter(|d| d.len() == 16 && !d.bytes().any(|c| c.is_ascii_uppercase()))
                .ok_or_else(|| D::Error::custom("leafHash limbs are 0x-prefixed 16-digit lowercase hex"))?;
            *out = u64::from_str_radix(digits, 16).map_err(D::Error::custom)?;
        }
        Ok(PublicInputs {
            k_hi: word(&raw.k_hi, "kHi")?,
            k_lo: word(&raw.k_lo, "kLo")?,
            leaf_hash,
        })
    }
}

/// The private input: the account leaf.
#[derive(Clone, PartialEq, Eq)]
pub struct PrivateWitness {
    pub leaf_rlp: [u8; LEAF_LEN],
}

impl std::fmt::Debug for PrivateWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PrivateWitness(..)")
    }
}

impl PrivateWitness {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, BalanceProofError> {
        let leaf_rlp = bytes
            .try_into()
            .map_err(|_| BalanceProofError::MalformedLeaf(format!("expected {LEAF_LEN} bytes, got {}", bytes.len())))?;
        Ok(PrivateWitness { leaf_rlp })
    }
}
