use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geo::Zone;
use super::LedgerError;
use crate::keccak::keccak256;
use crate::state_trie::rlp::{rlp_encode_list, RlpItem};
use crate::state_trie::{BlockHeader, Chain};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Anchor {
    pub shard_height: u64,
    #[serde(with = "crate::hexser::bytes32")]
    pub head_hash: [u8; 32],
    pub stale: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workchain {
    pub id: u32,
    pub name: String,
    pub zone: Zone,
}

/// Digest of an anchor table: keccak over the RLP list of
/// `[shard id, height, head hash, stale]` rows in key order.
pub fn anchor_table_root(table: &BTreeMap<String, Anchor>) -> [u8; 32] {
    let rows: Vec<RlpItem> = table
        .iter()
        .map(|(id, a)| {
            RlpItem::List(vec![
                RlpItem::Bytes(id.as_bytes().to_vec()),
                RlpItem::uint(a.shard_height),
                RlpItem::Bytes(a.head_hash.to_vec()),
                RlpItem::uint(u64::from(a.stale)),
            ])
        })
        .collect();
    keccak256(rlp_encode_list(&rows))
}

/// The global coordination chain: workchains and the latest finalized head
/// of every live shard.
#[derive(Clone, Debug)]
pub struct MasterchainState {
    pub workchains: BTreeMap<u32, Workchain>,
    anchors: BTreeMap<String, Anchor>,
    chain: Chain,
}

impl MasterchainState {
    pub fn new(workchains: Vec<Workchain>, timestamp: u64) -> Self {
        let anchors = BTreeMap::new();
        let genesis = BlockHeader::genesis(timestamp, anchor_table_root(&anchors));
        MasterchainState {
            workchains: workchains.into_iter().map(|w| (w.id, w)).collect(),
            anchors,
            chain: Chain::new(genesis),
        }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn anchors(&self) -> &BTreeMap<String, Anchor> {
        &self.anchors
    }

    /// Records `head` as the shard's latest head. Rejects heads that are not
    /// finalized on `shard_chain` or that go backwards.
    pub fn anchor_to_masterchain(
        &mut self,
        shard_id: &str,
        shard_chain: &Chain,
        head: &BlockHeader,
    ) -> Result<(), LedgerError> {
        if !shard_chain.contains(head) {
            return Err(LedgerError::Unfinalized {
                shard: shard_id.to_string(),
                height: head.height,
            });
        }
        if let Some(prev) = self.anchors.get(shard_id) {
            if head.height < prev.shard_height {
                return Err(LedgerError::Unfinalized {
                    shard: shard_id.to_string(),
                    height: head.height,
                });
            }
        }
        self.anchors.insert(
            shard_id.to_string(),
            Anchor {
                shard_height: head.height,
                head_hash: head.header_hash,
                stale: false,
            },
        );
        Ok(())
    }

    /// Keeps the shard's last anchor but flags it.
    pub fn mark_stale(&mut self, shard_id: &str) {
        if let Some(a) = self.anchors.get_mut(shard_id) {
            a.stale = true;
        }
    }

    /// Drops a shard that was split or merged away.
    pub fn retire(&mut self, shard_id: &str) {
        self.anchors.remove(shard_id);
    }

    /// Seals the current anchor table into a masterchain block.
    pub fn seal(&mut self, timestamp: u64) -> Result<BlockHeader, LedgerError> {
        let root = anchor_table_root(&self.anchors);
        Ok(self.chain.append_block(root, timestamp)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfinalized_head_rejected() {
        let mut shard = Chain::new(BlockHeader::genesis(0, [0; 32]));
        let head = shard.append_block([1; 32], 5).unwrap();
        let mut mc = MasterchainState::new(vec![], 0);
        let pending = BlockHeader::new(2, head.header_hash, 10, [2; 32]);
        assert!(matches!(
            mc.anchor_to_masterchain("s", &shard, &pending),
            Err(LedgerError::Unfinalized { height: 2, .. })
        ));
        mc.anchor_to_masterchain("s", &shard, &head).unwrap();
        let sealed = mc.seal(5).unwrap();
        assert_eq!(sealed.state_root, anchor_table_root(mc.anchors()));
        let genesis = shard.get(0).unwrap().clone();
        assert!(mc.anchor_to_masterchain("s", &shard, &genesis).is_err());
    }

    #[test]
    fn stale_flag_changes_root() {
        let mut shard = Chain::new(BlockHeader::genesis(0, [0; 32]));
        let head = shard.append_block([1; 32], 5).unwrap();
        let mut mc = MasterchainState::new(vec![], 0);
        mc.anchor_to_masterchain("s", &shard, &head).unwrap();
        let before = anchor_table_root(mc.anchors());
        mc.mark_stale("s");
        assert!(mc.anchors()["s"].stale);
        assert_eq!(mc.anchors()["s"].shard_height, 1);
        assert_ne!(anchor_table_root(mc.anchors()), before);
        mc.retire("s");
        assert!(mc.anchors().is_empty());
    }
}
