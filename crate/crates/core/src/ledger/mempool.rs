use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::registry::NodeId;
use super::LedgerError;
use crate::balance_proof::Proof;
use crate::field_group::Commitment;
use crate::state_trie::MptProof;

/// A pending hidden order. Only the commitments are visible to observers;
/// validators additionally see the proofs needed to admit it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MempoolEntry {
    pub tx_id: u64,
    pub sender: NodeId,
    pub commitment: Commitment,
    pub share_commitments: Vec<Commitment>,
    pub balance_proof: Proof,
    pub account_proof: MptProof,
    pub arrival_tick: u64,
}

/// What an outside observer of the mempool sees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedEntry {
    pub tx_id: u64,
    pub commitment: Commitment,
    pub share_commitments: Vec<Commitment>,
    pub arrival_tick: u64,
}

#[derive(Clone, Debug, Default)]
pub struct Mempool {
    entries: BTreeMap<u64, MempoolEntry>,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Admits `entry` if `check` accepts it.
    pub fn submit_tx(
        &mut self,
        entry: MempoolEntry,
        check: impl FnOnce(&MempoolEntry) -> Result<(), String>,
    ) -> Result<u64, LedgerError> {
        if self.entries.contains_key(&entry.tx_id) {
            return Err(LedgerError::Rejected(format!("duplicate transaction {}", entry.tx_id)));
        }
        check(&entry).map_err(LedgerError::Rejected)?;
        let id = entry.tx_id;
        self.entries.insert(id, entry);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes and returns the oldest entry.
    pub fn pop_next(&mut self) -> Option<MempoolEntry> {
        self.entries.pop_first().map(|(_, e)| e)
    }

    pub fn remove(&mut self, tx_id: u64) -> Option<MempoolEntry> {
        self.entries.remove(&tx_id)
    }

    pub fn drain(&mut self) -> Vec<MempoolEntry> {
        std::mem::take(&mut self.entries).into_values().collect()
    }

    pub fn observer_view(&self) -> Vec<ObservedEntry> {
        self.entries
            .values()
            .map(|e| ObservedEntry {
                tx_id: e.tx_id,
                commitment: e.commitment.clone(),
                share_commitments: e.share_commitments.clone(),
                arrival_tick: e.arrival_tick,
            })
            .collect()
    }
}
