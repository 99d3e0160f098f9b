//! Account state: RLP, the canonical account leaf, a Keccak-hashed Merkle
//! Patricia trie with inclusion proofs, and hash-linked block headers.

mod chain;
mod leaf;
mod proof;
pub mod rlp;
mod trie;

use thiserror::Error;

pub use chain::{check_freshness, header_hash, BlockHeader, Chain};
pub use leaf::{
    decode_account_leaf, decode_balance, encode_account_leaf, AccountLeaf, U256, BALANCE_ITEM_OFFSET,
    BALANCE_OFFSET, LEAF_LEN,
};
pub use proof::{verify_account_proof, MptProof};
pub use rlp::{rlp_decode, rlp_encode, RlpItem};
pub use trie::{decode_hex_prefix, empty_root, hex_prefix, key_nibbles, to_nibbles, Address, Trie};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RlpError {
    #[error("input ends early")]
    Truncated,
    #[error("non-canonical length prefix")]
    NonCanonical,
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("expected {0}")]
    Unexpected(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LeafError {
    #[error("unsupported nonce {0:#x}: canonical leaves hold a single byte below 0x80")]
    UnsupportedNonce(u8),
    #[error("leaf must be 112 bytes, got {0}")]
    Length(usize),
    #[error("unexpected byte {found:#04x} at offset {offset}")]
    Layout { offset: usize, found: u8 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrieError {
    #[error("account {0} not found")]
    NotFound(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProofError {
    #[error("proof is for a different address")]
    AddressMismatch,
    #[error("node {index} does not hash to the expected reference")]
    HashMismatch { index: usize },
    #[error("path diverges from the key at node {index}")]
    PathDivergence { index: usize },
    #[error("malformed node {index}: {reason}")]
    Malformed { index: usize, reason: String },
    #[error("proof ends before reaching a leaf")]
    Incomplete,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("chain is empty")]
    Empty,
    #[error("timestamp regression: {given} is before {previous}")]
    TimestampRegression { previous: u64, given: u64 },
    #[error("header at height {height} does not match its hash")]
    BadHeaderHash { height: u64 },
    #[error("parent link broken at height {height}")]
    BrokenLink { height: u64 },
    #[error("block at height {height} is not on the chain")]
    NotOnChain { height: u64 },
}
