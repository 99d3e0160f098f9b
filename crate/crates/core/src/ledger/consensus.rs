use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::registry::{NodeId, PeerRegistry};
use super::LedgerError;
use crate::keccak::keccak256_concat;
use crate::state_trie::{BlockHeader, Chain};

/// A `3f+1` committee for one epoch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Committee {
    pub epoch: u64,
    pub f: usize,
    pub members: Vec<NodeId>,
}

impl Committee {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn quorum(&self) -> usize {
        2 * self.f + 1
    }

    pub fn is_member(&self, id: &str) -> bool {
        self.members.iter().any(|m| m == id)
    }
}

/// Draws `3f+1` members from `candidates`, determined by `seed`, `context`
/// and `epoch` alone. Members come back sorted.
pub fn select_committee(
    candidates: &[NodeId],
    f: usize,
    epoch: u64,
    seed: u64,
    context: &str,
) -> Result<Committee, LedgerError> {
    let n = 3 * f + 1;
    let pool: Vec<&NodeId> = candidates.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if pool.len() < n {
        return Err(LedgerError::InsufficientValidators {
            needed: n,
            available: pool.len(),
        });
    }
    let digest = keccak256_concat([
        &b"gridswap/committee"[..],
        &seed.to_be_bytes(),
        &epoch.to_be_bytes(),
        context.as_bytes(),
    ]);
    let mut rng = ChaCha20Rng::from_seed(digest);
    let mut picked: Vec<usize> = sample(&mut rng, pool.len(), n).into_vec();
    picked.sort_unstable();
    let members = picked.into_iter().map(|i| pool[i].clone()).collect();
    Ok(Committee { epoch, f, members })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub voter: NodeId,
    pub height: u64,
    #[serde(with = "crate::hexser::bytes32")]
    pub block_hash: [u8; 32],
    #[serde(with = "crate::hexser::bytes32")]
    pub tag: [u8; 32],
}

fn vote_tag(key: &[u8; 32], height: u64, block_hash: &[u8; 32]) -> [u8; 32] {
    keccak256_concat([&b"gridswap/vote"[..], key, &height.to_be_bytes(), block_hash])
}

impl Vote {
    pub fn cast(voter: &NodeId, key: &[u8; 32], height: u64, block_hash: [u8; 32]) -> Self {
        Vote {
            voter: voter.clone(),
            height,
            block_hash,
            tag: vote_tag(key, height, &block_hash),
        }
    }

    pub fn authentic(&self, registry: &PeerRegistry) -> bool {
        registry
            .get(&self.voter)
            .is_some_and(|p| vote_tag(&p.key, self.height, &self.block_hash) == self.tag)
    }
}

/// Counts authentic votes from distinct committee members per block hash at
/// `height` and returns every hash that reached `2f+1`.
pub fn tally(committee: &Committee, registry: &PeerRegistry, height: u64, votes: &[Vote]) -> Vec<[u8; 32]> {
    let mut counts: BTreeMap<[u8; 32], BTreeSet<&str>> = BTreeMap::new();
    for v in votes {
        if v.height == height && committee.is_member(&v.voter) && v.authentic(registry) {
            counts.entry(v.block_hash).or_default().insert(&v.voter);
        }
    }
    counts
        .into_iter()
        .filter(|(_, voters)| voters.len() >= committee.quorum())
        .map(|(h, _)| h)
        .collect()
}

/// Proposes the next header on `chain`, collects a vote from every member
/// for which `responds` is true, and appends the block iff it reached
/// quorum. Returns the finalized header.
pub fn produce_block(
    chain: &mut Chain,
    committee: &Committee,
    registry: &PeerRegistry,
    state_root: [u8; 32],
    timestamp: u64,
    mut responds: impl FnMut(&NodeId) -> bool,
) -> Result<Option<BlockHeader>, LedgerError> {
    let tip = chain.tip();
    if timestamp < tip.timestamp {
        return Err(LedgerError::Chain(crate::state_trie::ChainError::TimestampRegression {
            previous: tip.timestamp,
            given: timestamp,
        }));
    }
    let proposal = BlockHeader::new(tip.height + 1, tip.header_hash, timestamp, state_root);
    let votes: Vec<Vote> = committee
        .members
        .iter()
        .filter(|m| responds(m))
        .filter_map(|m| registry.get(m))
        .map(|p| Vote::cast(&p.id, &p.key, proposal.height, proposal.header_hash))
        .collect();
    if !tally(committee, registry, proposal.height, &votes).contains(&proposal.header_hash) {
        return Ok(None);
    }
    let appended = chain.append_block(state_root, timestamp)?;
    debug_assert_eq!(appended, proposal);
    Ok(Some(appended))
}
