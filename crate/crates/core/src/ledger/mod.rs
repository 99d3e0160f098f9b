//! Geo-sharded two-tier ledger: shards grouped into workchains, each run by
//! a `3f+1` committee, with finalized heads anchored on a masterchain.

mod consensus;
pub mod geo;
mod masterchain;
mod mempool;
mod registry;
mod shard;

use thiserror::Error;

use crate::state_trie::ChainError;

pub use consensus::{produce_block, select_committee, tally, Committee, Vote};
pub use geo::{audit_partition, Axis, GeoPoint, Zone};
pub use masterchain::{anchor_table_root, Anchor, MasterchainState, Workchain};
pub use mempool::{Mempool, MempoolEntry, ObservedEntry};
pub use registry::{NodeId, Peer, PeerRegistry};
pub use shard::{child_ids, fail_region, rebalance_shards, recover_region, Rebalance, ShardDescriptor, Thresholds};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("peer {0} is already registered")]
    DuplicatePeer(String),
    #[error("peer {0} reuses a registered key")]
    DuplicateKey(String),
    #[error("need {needed} validators, have {available}")]
    InsufficientValidators { needed: usize, available: usize },
    #[error("shard {shard} head at height {height} is not finalized")]
    Unfinalized { shard: String, height: u64 },
    #[error("transaction rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
}
