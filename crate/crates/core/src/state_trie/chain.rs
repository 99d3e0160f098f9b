use serde::{Deserialize, Serialize};

use super::proof::MptProof;
use super::rlp::{rlp_encode_list, RlpItem};
use super::ChainError;
use crate::keccak::keccak256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockHeader {
    pub height: u64,
    #[serde(with = "crate::hexser::bytes32")]
    pub parent_hash: [u8; 32],
    pub timestamp: u64,
    #[serde(with = "crate::hexser::bytes32")]
    pub state_root: [u8; 32],
    #[serde(with = "crate::hexser::bytes32")]
    pub header_hash: [u8; 32],
}

/// `keccak(rlp([height, parent_hash, timestamp, state_root]))`.
pub fn header_hash(height: u64, parent_hash: &[u8; 32], timestamp: u64, state_root: &[u8; 32]) -> [u8; 32] {
    keccak256(rlp_encode_list(&[
        RlpItem::uint(height),
        RlpItem::bytes(parent_hash.to_vec()),
        RlpItem::uint(timestamp),
        RlpItem::bytes(state_root.to_vec()),
    ]))
}

impl BlockHeader {
    pub fn new(height: u64, parent_hash: [u8; 32], timestamp: u64, state_root: [u8; 32]) -> Self {
        BlockHeader {
            height,
            parent_hash,
            timestamp,
            state_root,
            header_hash: header_hash(height, &parent_hash, timestamp, &state_root),
        }
    }

    pub fn genesis(timestamp: u64, state_root: [u8; 32]) -> Self {
        BlockHeader::new(0, [0; 32], timestamp, state_root)
    }

    pub fn computed_hash(&self) -> [u8; 32] {
        header_hash(self.height, &self.parent_hash, self.timestamp, &self.state_root)
    }

    /// Recomputes `header_hash` after a field was edited.
    pub fn rehash(&mut self) {
        self.header_hash = self.computed_hash();
    }
}

/// Hash-linked header chain starting at a genesis block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    headers: Vec<BlockHeader>,
}

impl Chain {
    pub fn new(genesis: BlockHeader) -> Self {
        Chain {
            headers: vec![genesis],
        }
    }

    pub fn from_headers(headers: Vec<BlockHeader>) -> Result<Self, ChainError> {
        if headers.is_empty() {
            return Err(ChainError::Empty);
        }
        Ok(Chain { headers })
    }

    pub fn headers(&self) -> &[BlockHeader] {
        &self.headers
    }

    pub fn headers_mut(&mut self) -> &mut [BlockHeader] {
        &mut self.headers
    }

    pub fn tip(&self) -> &BlockHeader {
        self.headers.last().expect("chain has a genesis block")
    }

    pub fn get(&self, height: u64) -> Option<&BlockHeader> {
        let first = self.headers[0].height;
        let idx = usize::try_from(height.checked_sub(first)?).ok()?;
        self.headers.get(idx)
    }

    pub fn append_block(&mut self, state_root: [u8; 32], timestamp: u64) -> Result<BlockHeader, ChainError> {
        let tip = self.tip();
        if timestamp < tip.timestamp {
            return Err(ChainError::TimestampRegression {
                previous: tip.timestamp,
                given: timestamp,
            });
        }
        let header = BlockHeader::new(tip.height + 1, tip.header_hash, timestamp, state_root);
        self.headers.push(header.clone());
        Ok(header)
    }

    /// Walks the chain from genesis and reports the first header whose own
    /// hash or parent link does not check out.
    pub fn validate(&self) -> Result<(), ChainError> {
        for (i, h) in self.headers.iter().enumerate() {
            if h.computed_hash() != h.header_hash {
                return Err(ChainError::BadHeaderHash { height: h.height });
            }
            if i > 0 {
                let prev = &self.headers[i - 1];
                if h.parent_hash != prev.header_hash || h.height != prev.height + 1 {
                    return Err(ChainError::BrokenLink { height: h.height });
                }
                if h.timestamp < prev.timestamp {
                    return Err(ChainError::TimestampRegression {
                        previous: prev.timestamp,
                        given: h.timestamp,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, header: &BlockHeader) -> bool {
        self.get(header.height) == Some(header)
    }

    /// Resolves the header a proof claims to come from.
    pub fn header_for(&self, proof: &MptProof) -> Result<&BlockHeader, ChainError> {
        self.get(proof.block_height)
            .filter(|h| h.header_hash == proof.header_hash)
            .ok_or(ChainError::NotOnChain {
                height: proof.block_height,
            })
    }
}

/// True iff the proof block has at least `confirmations` blocks on top of it
/// and is no older than `window` seconds at time `now`. Both headers must be
/// on `chain`.
pub fn check_freshness(
    chain: &Chain,
    tip: &BlockHeader,
    proof_block: &BlockHeader,
    confirmations: u64,
    window: u64,
    now: u64,
) -> Result<bool, ChainError> {
    for h in [tip, proof_block] {
        if !chain.contains(h) {
            return Err(ChainError::NotOnChain { height: h.height });
        }
    }
    let depth = tip.height.saturating_sub(proof_block.height);
    let age = now.saturating_sub(proof_block.timestamp);
    Ok(tip.height >= proof_block.height && depth >= confirmations && age <= window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(len: u64) -> Chain {
        let mut c = Chain::new(BlockHeader::genesis(1_000, [0; 32]));
        for h in 1..len {
            c.append_block([h as u8; 32], 1_000 + 10 * h).unwrap();
        }
        c
    }

    #[test]
    fn links_and_heights() {
        let c = chain(3);
        assert_eq!(c.headers()[0].parent_hash, [0; 32]);
        assert_eq!(c.tip().height, 2);
        assert_eq!(c.headers()[2].parent_hash, c.headers()[1].header_hash);
        c.validate().unwrap();
    }

    #[test]
    fn timestamp_regression() {
        let mut c = chain(2);
        assert!(matches!(
            c.append_block([0; 32], 5),
            Err(ChainError::TimestampRegression { .. })
        ));
    }

    #[test]
    fn mutated_history_breaks_at_descendant() {
        let mut c = chain(5);
        c.headers_mut()[1].state_root[0] ^= 0xff;
        assert_eq!(c.validate(), Err(ChainError::BadHeaderHash { height: 1 }));
        c.headers_mut()[1].rehash();
        assert_eq!(c.validate(), Err(ChainError::BrokenLink { height: 2 }));
    }

    #[test]
    fn freshness_examples() {
        let c = chain(14);
        let tip = c.get(13).unwrap();
        let pb = c.get(10).unwrap();
        let now = pb.timestamp + 60;
        assert!(check_freshness(&c, tip, pb, 3, 100, now).unwrap());
        assert!(!check_freshness(&c, c.get(12).unwrap(), pb, 3, 100, now).unwrap());
        assert!(!check_freshness(&c, tip, pb, 3, 59, now).unwrap());
        assert!(check_freshness(&c, tip, pb, 3, 60, now).unwrap());

        let mut forged = pb.clone();
        forged.state_root = [9; 32];
        forged.rehash();
        assert!(matches!(
            check_freshness(&c, tip, &forged, 3, 100, now),
            Err(ChainError::NotOnChain { height: 10 })
        ));
    }
}
