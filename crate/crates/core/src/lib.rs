//! Privacy-preserving constant-product energy exchange.

pub mod adversary;
pub mod amm;
pub mod balance_proof;
pub mod field_group;
pub mod hexser;
pub mod keccak;
pub mod ledger;
pub mod mpc;
pub mod protocol;
pub mod sim;
pub mod state_trie;
