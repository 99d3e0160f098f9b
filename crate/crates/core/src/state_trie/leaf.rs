use std::fmt;

use num_bigint::BigUint;

use super::LeafError;

pub const LEAF_LEN: usize = 112;
/// Offset of the balance item (its `0xa0` prefix) inside the leaf.
pub const BALANCE_ITEM_OFFSET: usize = 3;
pub const BALANCE_OFFSET: usize = 4;

/// 256-bit unsigned integer as two 128-bit limbs.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct U256 {
    hi: u128,
    lo: u128,
}

impl U256 {
    pub const ZERO: U256 = U256 { hi: 0, lo: 0 };

    pub const fn from_limbs(hi: u128, lo: u128) -> Self {
        U256 { hi, lo }
    }

    pub const fn from_u128(v: u128) -> Self {
        U256 { hi: 0, lo: v }
    }

    pub fn hi(&self) -> u128 {
        self.hi
    }

    pub fn lo(&self) -> u128 {
        self.lo
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out[..16].copy_from_slice(&self.hi.to_be_bytes());
        out[16..].copy_from_slice(&self.lo.to_be_bytes());
        out
    }

    pub fn from_be_bytes(b: &[u8; 32]) -> Self {
        let hi = u128::from_be_bytes(b[..16].try_into().expect("16 bytes"));
        let lo = u128::from_be_bytes(b[16..].try_into().expect("16 bytes"));
        U256 { hi, lo }
    }

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.to_be_bytes())
    }

    /// `None` if `v` needs more than 256 bits.
    pub fn from_biguint(v: &BigUint) -> Option<Self> {
        let raw = v.to_bytes_be();
        if raw.len() > 32 {
            return None;
        }
        let mut b = [0u8; 32];
        b[32 - raw.len()..].copy_from_slice(&raw);
        Some(U256::from_be_bytes(&b))
    }

    pub fn checked_add(&self, rhs: &U256) -> Option<U256> {
        let (lo, carry) = self.lo.overflowing_add(rhs.lo);
        let hi = self.hi.checked_add(rhs.hi)?.checked_add(u128::from(carry))?;
        Some(U256 { hi, lo })
    }

    pub fn checked_sub(&self, rhs: &U256) -> Option<U256> {
        if self < rhs {
            return None;
        }
        let (lo, borrow) = self.lo.overflowing_sub(rhs.lo);
        Some(U256 {
            hi: self.hi - rhs.hi - u128::from(borrow),
            lo,
        })
    }

    /// The low limb when the high limb is zero.
    pub fn to_u128(&self) -> Option<u128> {
        (self.hi == 0).then_some(self.lo)
    }
}

impl From<u128> for U256 {
    fn from(v: u128) -> Self {
        U256::from_u128(v)
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U256({})", self.to_biguint())
    }
}

impl fmt::Display for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_biguint())
    }
}

/// Account record `{nonce, balance, storageRoot, codeHash}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct AccountLeaf {
    pub nonce: u8,
    pub balance: U256,
    pub storage_root: [u8; 32],
    pub code_hash: [u8; 32],
}

/// Canonical 112-byte leaf:
///
/// ```text
/// [0..2)     f8 6e         list header, 110-byte payload
/// [2]        nonce         single byte < 0x80
/// [3]        a0            balance item
/// [4..36)    balance       big-endian
/// [36]       a0
/// [37..69)   storage root
/// [69]       a0
/// [70..102)  code hash
/// [102]      89            9-byte reserved item
/// [103..112) zero
/// ```
pub fn encode_account_leaf(acct: &AccountLeaf) -> Result<[u8; LEAF_LEN], LeafError> {
    if acct.nonce > 0x7f {
        return Err(LeafError::UnsupportedNonce(acct.nonce));
    }
    let mut out = [0u8; LEAF_LEN];
    out[0] = 0xf8;
    out[1] = 0x6e;
    out[2] = acct.nonce;
    out[3] = 0xa0;
    out[4..36].copy_from_slice(&acct.balance.to_be_bytes());
    out[36] = 0xa0;
    out[37..69].copy_from_slice(&acct.storage_root);
    out[69] = 0xa0;
    out[70..102].copy_from_slice(&acct.code_hash);
    out[102] = 0x89;
    Ok(out)
}

pub fn decode_account_leaf(bytes: &[u8]) -> Result<AccountLeaf, LeafError> {
    if bytes.len() != LEAF_LEN {
        return Err(LeafError::Length(bytes.len()));
    }
    let fixed = [
        (0usize, 0xf8u8),
        (1, 0x6e),
        (3, 0xa0),
        (36, 0xa0),
        (69, 0xa0),
        (102, 0x89),
    ];
    for (at, want) in fixed {
        if bytes[at] != want {
            return Err(LeafError::Layout { offset: at, found: bytes[at] });
        }
    }
    if bytes[2] > 0x7f {
        return Err(LeafError::UnsupportedNonce(bytes[2]));
    }
    if let Some(i) = bytes[103..].iter().position(|b| *b != 0) {
        return Err(LeafError::Layout {
            offset: 103 + i,
            found: bytes[103 + i],
        });
    }
    Ok(AccountLeaf {
        nonce: bytes[2],
        balance: U256::from_be_bytes(bytes[4..36].try_into().expect("32 bytes")),
        storage_root: bytes[37..69].try_into().expect("32 bytes"),
        code_hash: bytes[70..102].try_into().expect("32 bytes"),
    })
}

/// Reads the balance as `(hi, lo)` 128-bit limbs straight from leaf bytes.
pub fn decode_balance(bytes: &[u8; LEAF_LEN]) -> (u128, u128) {
    let hi = u128::from_be_bytes(bytes[4..20].try_into().expect("16 bytes"));
    let lo = u128::from_be_bytes(bytes[20..36].try_into().expect("16 bytes"));
    (hi, lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_trie::rlp::{rlp_decode, RlpItem};
    use proptest::prelude::*;

    fn leaf(balance: U256) -> AccountLeaf {
        AccountLeaf {
            balance,
            ..AccountLeaf::default()
        }
    }

    #[test]
    fn layout_examples() {
        let b = encode_account_leaf(&leaf(U256::from_u128(1))).unwrap();
        assert_eq!(b.len(), 112);
        assert_eq!(b[1], 0x6e);
        assert_eq!(b[35], 0x01);
        assert!(b[4..35].iter().all(|x| *x == 0));

        let b = encode_account_leaf(&leaf(U256::from_limbs(1, 0))).unwrap();
        assert_eq!(b[19], 0x01);
        assert!(b[4..36].iter().enumerate().all(|(i, x)| i + 4 == 19 || *x == 0));
        assert_eq!(decode_balance(&b), (1, 0));
    }

    #[test]
    fn leaf_is_valid_rlp() {
        let acct = AccountLeaf {
            nonce: 9,
            balance: U256::from_limbs(3, 4),
            storage_root: [7; 32],
            code_hash: [8; 32],
        };
        let b = encode_account_leaf(&acct).unwrap();
        let items = rlp_decode(&b).unwrap();
        let items = items.as_list().unwrap();
        assert_eq!(items.len(), 5);
        assert_eq!(items[0], RlpItem::bytes(vec![9]));
        assert_eq!(items[1].as_bytes().unwrap(), &acct.balance.to_be_bytes());
        assert_eq!(items[4], RlpItem::bytes(vec![0; 9]));
    }

    #[test]
    fn nonce_bound() {
        let acct = AccountLeaf {
            nonce: 0x80,
            ..AccountLeaf::default()
        };
        assert_eq!(encode_account_leaf(&acct), Err(LeafError::UnsupportedNonce(0x80)));
    }

    #[test]
    fn decode_rejects_layout_damage() {
        let b = encode_account_leaf(&leaf(U256::from_u128(5))).unwrap();
        for at in [0, 1, 3, 36, 69, 102, 105] {
            let mut bad = b;
            bad[at] ^= 0x01;
            assert!(decode_account_leaf(&bad).is_err(), "offset {at}");
        }
        assert!(decode_account_leaf(&b[..111]).is_err());
    }

    #[test]
    fn u256_arithmetic() {
        let max_lo = U256::from_u128(u128::MAX);
        let one = U256::from_u128(1);
        let sum = max_lo.checked_add(&one).unwrap();
        assert_eq!(sum, U256::from_limbs(1, 0));
        assert_eq!(sum.checked_sub(&one).unwrap(), max_lo);
        assert!(one.checked_sub(&sum).is_none());
        assert!(U256::from_limbs(u128::MAX, u128::MAX).checked_add(&one).is_none());
    }

    proptest! {
        #[test]
        fn roundtrip(nonce in 0u8..0x80, hi in any::<u128>(), lo in any::<u128>(),
                     sr in any::<[u8; 32]>(), ch in any::<[u8; 32]>()) {
            let acct = AccountLeaf { nonce, balance: U256::from_limbs(hi, lo), storage_root: sr, code_hash: ch };
            let b = encode_account_leaf(&acct).unwrap();
            prop_assert_eq!(decode_account_leaf(&b).unwrap(), acct);
            prop_assert_eq!(decode_balance(&b), (hi, lo));
        }

        #[test]
        fn order_matches_biguint(a in any::<(u128, u128)>(), b in any::<(u128, u128)>()) {
            let (x, y) = (U256::from_limbs(a.0, a.1), U256::from_limbs(b.0, b.1));
            prop_assert_eq!(x.cmp(&y), x.to_biguint().cmp(&y.to_biguint()));
        }
    }
}
