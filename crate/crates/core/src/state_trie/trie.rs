//! Persistent hexary Merkle Patricia trie keyed by `keccak(address)`.
//!
//! Every child is referenced by the 32-byte hash of its RLP, never inlined.

use std::sync::Arc;

use super::leaf::{decode_account_leaf, encode_account_leaf, AccountLeaf};
use super::proof::MptProof;
use super::rlp::{rlp_encode_list, RlpItem};
use super::{LeafError, TrieError};
use crate::keccak::keccak256;

pub type Address = [u8; 20];

/// 64 nibbles of `keccak(address)`.
pub fn key_nibbles(address: &Address) -> Vec<u8> {
    to_nibbles(&keccak256(address))
}

pub fn to_nibbles(bytes: &[u8]) -> Vec<u8> {
    bytes.iter().flat_map(|b| [b >> 4, b & 0x0f]).collect()
}

/// Hex-prefix encoding of a nibble path.
pub fn hex_prefix(path: &[u8], leaf: bool) -> Vec<u8> {
    let flag = if leaf { 2u8 } else { 0 };
    let mut out = Vec::with_capacity(path.len() / 2 + 1);
    let rest = if path.len() % 2 == 1 {
        out.push(((flag + 1) << 4) | path[0]);
        &path[1..]
    } else {
        out.push(flag << 4);
        path
    };
    for pair in rest.chunks_exact(2) {
        out.push((pair[0] << 4) | pair[1]);
    }
    out
}

/// Inverse of [`hex_prefix`]: returns `(path, is_leaf)`.
pub fn decode_hex_prefix(bytes: &[u8]) -> Option<(Vec<u8>, bool)> {
    let first = *bytes.first()?;
    let flag = first >> 4;
    if flag > 3 {
        return None;
    }
    let leaf = flag & 2 != 0;
    let mut path = Vec::with_capacity(bytes.len() * 2);
    if flag & 1 == 1 {
        path.push(first & 0x0f);
    } else if first & 0x0f != 0 {
        return None;
    }
    path.extend(to_nibbles(&bytes[1..]));
    Some((path, leaf))
}

#[derive(Debug)]
pub(crate) enum NodeKind {
    Leaf { path: Vec<u8>, value: Vec<u8> },
    Extension { path: Vec<u8>, child: Arc<Node> },
    Branch { children: [Option<Arc<Node>>; 16] },
}

#[derive(Debug)]
pub(crate) struct Node {
    pub(crate) kind: NodeKind,
    pub(crate) rlp: Vec<u8>,
    pub(crate) hash: [u8; 32],
}

impl Node {
    fn new(kind: NodeKind) -> Arc<Node> {
        let rlp = match &kind {
            NodeKind::Leaf { path, value } => rlp_encode_list(&[
                RlpItem::bytes(hex_prefix(path, true)),
                RlpItem::bytes(value.clone()),
            ]),
            NodeKind::Extension { path, child } => rlp_encode_list(&[
                RlpItem::bytes(hex_prefix(path, false)),
                RlpItem::bytes(child.hash.to_vec()),
            ]),
            NodeKind::Branch { children } => {
                let mut items: Vec<RlpItem> = children
                    .iter()
                    .map(|c| RlpItem::bytes(c.as_ref().map(|n| n.hash.to_vec()).unwrap_or_default()))
                    .collect();
                items.push(RlpItem::bytes(vec![]));
                rlp_encode_list(&items)
            }
        };
        let hash = keccak256(&rlp);
        Arc::new(Node { kind, rlp, hash })
    }

    fn leaf(path: &[u8], value: Vec<u8>) -> Arc<Node> {
        Node::new(NodeKind::Leaf {
            path: path.to_vec(),
            value,
        })
    }

    /// Wraps `child` in an extension unless `path` is empty.
    fn extend(path: &[u8], child: Arc<Node>) -> Arc<Node> {
        if path.is_empty() {
            child
        } else {
            Node::new(NodeKind::Extension {
                path: path.to_vec(),
                child,
            })
        }
    }
}

fn common_prefix(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

fn insert(node: Option<&Arc<Node>>, key: &[u8], value: Vec<u8>) -> Arc<Node> {
    let Some(node) = node else {
        return Node::leaf(key, value);
    };
    match &node.kind {
        NodeKind::Leaf { path, value: old } => {
            if path.as_slice() == key {
                return Node::leaf(key, value);
            }
            let l = common_prefix(path, key);
            let mut children: [Option<Arc<Node>>; 16] = Default::default();
            children[path[l] as usize] = Some(Node::leaf(&path[l + 1..], old.clone()));
            children[key[l] as usize] = Some(Node::leaf(&key[l + 1..], value));
            Node::extend(&key[..l], Node::new(NodeKind::Branch { children }))
        }
        NodeKind::Extension { path, child } => {
            let l = common_prefix(path, key);
            if l == path.len() {
                return Node::extend(path, insert(Some(child), &key[l..], value));
            }
            let mut children: [Option<Arc<Node>>; 16] = Default::default();
            children[path[l] as usize] = Some(Node::extend(&path[l + 1..], child.clone()));
            children[key[l] as usize] = Some(Node::leaf(&key[l + 1..], value));
            Node::extend(&key[..l], Node::new(NodeKind::Branch { children }))
        }
        NodeKind::Branch { children } => {
            let mut children = children.clone();
            let slot = key[0] as usize;
            children[slot] = Some(insert(children[slot].as_ref(), &key[1..], value));
            Node::new(NodeKind::Branch { children })
        }
    }
}

/// Copy-on-write trie: updates share untouched subtrees with earlier versions.
#[derive(Clone, Debug, Default)]
pub struct Trie {
    root: Option<Arc<Node>>,
    len: usize,
}

pub fn empty_root() -> [u8; 32] {
    keccak256([0x80])
}

impl Trie {
    pub fn new() -> Self {
        Trie::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Returns the updated trie; `self` is unchanged.
    pub fn update(&self, address: &Address, acct: &AccountLeaf) -> Result<Trie, LeafError> {
        let value = encode_account_leaf(acct)?.to_vec();
        let key = key_nibbles(address);
        let existed = self.get(address).is_some();
        Ok(Trie {
            root: Some(insert(self.root.as_ref(), &key, value)),
            len: self.len + usize::from(!existed),
        })
    }

    pub fn insert(&mut self, address: &Address, acct: &AccountLeaf) -> Result<(), LeafError> {
        *self = self.update(address, acct)?;
        Ok(())
    }

    pub fn root(&self) -> [u8; 32] {
        self.root.as_ref().map(|n| n.hash).unwrap_or_else(empty_root)
    }

    /// Nodes from the root to the account's leaf.
    fn path_to(&self, address: &Address) -> Option<Vec<&Arc<Node>>> {
        let key = key_nibbles(address);
        let mut pos = 0;
        let mut stack = Vec::new();
        let mut cur = self.root.as_ref()?;
        loop {
            stack.push(cur);
            match &cur.kind {
                NodeKind::Leaf { path, .. } => {
                    return (path.as_slice() == &key[pos..]).then_some(stack);
                }
                NodeKind::Extension { path, child } => {
                    if !key[pos..].starts_with(path) {
                        return None;
                    }
                    pos += path.len();
                    cur = child;
                }
                NodeKind::Branch { children } => {
                    cur = children[*key.get(pos)? as usize].as_ref()?;
                    pos += 1;
                }
            }
        }
    }

    pub fn get(&self, address: &Address) -> Option<AccountLeaf> {
        let stack = self.path_to(address)?;
        match &stack.last()?.kind {
            NodeKind::Leaf { value, .. } => decode_account_leaf(value).ok(),
            _ => None,
        }
    }

    /// Account proof with an unset block reference.
    pub fn prove_account(&self, address: &Address) -> Result<MptProof, TrieError> {
        let stack = self
            .path_to(address)
            .ok_or_else(|| TrieError::NotFound(hex::encode(address)))?;
        Ok(MptProof {
            address: *address,
            block_height: 0,
            header_hash: [0; 32],
            nodes: stack.into_iter().map(|n| n.rlp.clone()).collect(),
        })
    }
}
