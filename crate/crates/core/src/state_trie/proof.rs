use serde::{Deserialize, Serialize};

use super::leaf::{decode_account_leaf, AccountLeaf};
use super::rlp::rlp_decode;
use super::trie::{decode_hex_prefix, key_nibbles, Address};
use super::ProofError;
use crate::keccak::keccak256;

/// Root-first node stack for one account plus the block it was taken from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MptProof {
    #[serde(with = "crate::hexser::bytes20")]
    pub address: Address,
    pub block_height: u64,
    #[serde(with = "crate::hexser::bytes32")]
    pub header_hash: [u8; 32],
    #[serde(with = "crate::hexser::bytes_list")]
    pub nodes: Vec<Vec<u8>>,
}

impl MptProof {
    pub fn at_block(mut self, height: u64, header_hash: [u8; 32]) -> Self {
        self.block_height = height;
        self.header_hash = header_hash;
        self
    }
}

/// Recomputes every node hash along the path for `address` and decodes the
/// leaf at its end.
pub fn verify_account_proof(
    state_root: &[u8; 32],
    address: &Address,
    proof: &MptProof,
) -> Result<AccountLeaf, ProofError> {
    if &proof.address != address {
        return Err(ProofError::AddressMismatch);
    }
    let key = key_nibbles(address);
    let mut expected = *state_root;
    let mut pos = 0usize;
    for (index, node) in proof.nodes.iter().enumerate() {
        if keccak256(node) != expected {
            return Err(ProofError::HashMismatch { index });
        }
        let malformed = |why: &str| ProofError::Malformed {
            index,
            reason: why.to_string(),
        };
        let item = rlp_decode(node).map_err(|e| malformed(&e.to_string()))?;
        let items = item.as_list().ok_or_else(|| malformed("node is not a list"))?;
        let child: &[u8] = match items.len() {
            17 => {
                let nibble = *key.get(pos).ok_or_else(|| malformed("branch below full key"))?;
                if !items[16].as_bytes().is_some_and(|v| v.is_empty()) {
                    return Err(malformed("branch carries a value"));
                }
                pos += 1;
                items[nibble as usize]
                    .as_bytes()
                    .ok_or_else(|| malformed("branch slot is a list"))?
            }
            2 => {
                let hp = items[0].as_bytes().ok_or_else(|| malformed("path is a list"))?;
                let (path, is_leaf) =
                    decode_hex_prefix(hp).ok_or_else(|| malformed("bad hex-prefix path"))?;
                let rest = &key[pos..];
                if is_leaf {
                    if path.as_slice() != rest {
                        return Err(ProofError::PathDivergence { index });
                    }
                    if index + 1 != proof.nodes.len() {
                        return Err(malformed("nodes after the leaf"));
                    }
                    let value = items[1].as_bytes().ok_or_else(|| malformed("leaf value is a list"))?;
                    return decode_account_leaf(value).map_err(|e| malformed(&e.to_string()));
                }
                if path.is_empty() || !rest.starts_with(&path) {
                    return Err(ProofError::PathDivergence { index });
                }
                pos += path.len();
                items[1]
                    .as_bytes()
                    .ok_or_else(|| malformed("extension child is a list"))?
            }
            n => return Err(malformed(&format!("node has {n} items"))),
        };
        if child.is_empty() {
            return Err(ProofError::PathDivergence { index });
        }
        expected = child
            .try_into()
            .map_err(|_| malformed("child reference is not 32 bytes"))?;
    }
    Err(ProofError::Incomplete)
}
