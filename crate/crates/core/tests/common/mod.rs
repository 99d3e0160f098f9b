//! Reference account-trie root built directly from the sorted key set.

use gridswap::state_trie::{encode_account_leaf, AccountLeaf};
use sha3::{Digest, Keccak256};

pub fn keccak(data: &[u8]) -> [u8; 32] {
    Keccak256::digest(data).into()
}

fn rlp_str(b: &[u8]) -> Vec<u8> {
    if b.len() == 1 && b[0] < 0x80 {
        return b.to_vec();
    }
    let mut out = rlp_len(b.len(), 0x80);
    out.extend_from_slice(b);
    out
}

fn rlp_list(items: &[Vec<u8>]) -> Vec<u8> {
    let body: Vec<u8> = items.concat();
    let mut out = rlp_len(body.len(), 0xc0);
    out.extend(body);
    out
}

fn rlp_len(len: usize, base: u8) -> Vec<u8> {
    if len < 56 {
        vec![base + len as u8]
    } else {
        let be: Vec<u8> = len.to_be_bytes().into_iter().skip_while(|b| *b == 0).collect();
        let mut out = vec![base + 55 + be.len() as u8];
        out.extend(be);
        out
    }
}

fn compact(nibbles: &[u8], leaf: bool) -> Vec<u8> {
    let flag = if leaf { 2 } else { 0 } + (nibbles.len() % 2) as u8;
    let mut n = vec![flag];
    if nibbles.len().is_multiple_of(2) {
        n.push(0);
    }
    n.extend_from_slice(nibbles);
    n.chunks(2).map(|c| c[0] << 4 | c[1]).collect()
}

fn node_ref(rlp: Vec<u8>) -> Vec<u8> {
    if rlp.len() < 32 {
        rlp
    } else {
        rlp_str(&keccak(&rlp))
    }
}

/// Textbook trie construction from the sorted key set.
fn oracle_node(items: &[(Vec<u8>, Vec<u8>)], depth: usize) -> Vec<u8> {
    if items.len() == 1 {
        return rlp_list(&[rlp_str(&compact(&items[0].0[depth..], true)), rlp_str(&items[0].1)]);
    }
    let first = &items[0].0;
    let mut common = 0;
    while depth + common < first.len() && items.iter().all(|(k, _)| k[depth + common] == first[depth + common]) {
        common += 1;
    }
    if common > 0 {
        let child = oracle_node(items, depth + common);
        return rlp_list(&[rlp_str(&compact(&first[depth..depth + common], false)), node_ref(child)]);
    }
    let mut slots = Vec::with_capacity(17);
    for nib in 0..16u8 {
        let group: Vec<_> = items.iter().filter(|(k, _)| k[depth] == nib).cloned().collect();
        slots.push(if group.is_empty() { rlp_str(&[]) } else { node_ref(oracle_node(&group, depth + 1)) });
    }
    slots.push(rlp_str(&[]));
    rlp_list(&slots)
}

pub fn oracle_root(accounts: &[([u8; 20], AccountLeaf)]) -> [u8; 32] {
    if accounts.is_empty() {
        return keccak(&rlp_str(&[]));
    }
    let mut items: Vec<(Vec<u8>, Vec<u8>)> = accounts
        .iter()
        .map(|(a, l)| {
            let key = keccak(a).iter().flat_map(|b| [b >> 4, b & 15]).collect();
            (key, encode_account_leaf(l).unwrap().to_vec())
        })
        .collect();
    items.sort();
    keccak(&oracle_node(&items, 0))
}
