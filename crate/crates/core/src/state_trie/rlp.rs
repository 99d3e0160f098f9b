//! Recursive length prefix serialization.

use super::RlpError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RlpItem {
    Bytes(Vec<u8>),
    List(Vec<RlpItem>),
}

impl RlpItem {
    pub fn bytes(b: impl Into<Vec<u8>>) -> Self {
        RlpItem::Bytes(b.into())
    }

    /// Minimal big-endian encoding of an unsigned integer (zero is empty).
    pub fn uint(v: u64) -> Self {
        let raw = v.to_be_bytes();
        let skip = raw.iter().take_while(|b| **b == 0).count();
        RlpItem::Bytes(raw[skip..].to_vec())
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            RlpItem::Bytes(b) => Some(b),
            RlpItem::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[RlpItem]> {
        match self {
            RlpItem::List(l) => Some(l),
            RlpItem::Bytes(_) => None,
        }
    }

    /// Reads a minimal big-endian integer.
    pub fn as_uint(&self) -> Result<u64, RlpError> {
        let b = self.as_bytes().ok_or(RlpError::Unexpected("integer"))?;
        if b.len() > 8 {
            return Err(RlpError::Unexpected("integer wider than 64 bits"));
        }
        if b.first() == Some(&0) {
            return Err(RlpError::NonCanonical);
        }
        Ok(b.iter().fold(0u64, |acc, x| (acc << 8) | u64::from(*x)))
    }
}

fn length_prefix(out: &mut Vec<u8>, len: usize, short: u8, long: u8) {
    if len <= 55 {
        out.push(short + len as u8);
    } else {
        let raw = (len as u64).to_be_bytes();
        let skip = raw.iter().take_while(|b| **b == 0).count();
        out.push(long + (8 - skip) as u8);
        out.extend_from_slice(&raw[skip..]);
    }
}

fn encode_into(item: &RlpItem, out: &mut Vec<u8>) {
    match item {
        RlpItem::Bytes(b) if b.len() == 1 && b[0] < 0x80 => out.push(b[0]),
        RlpItem::Bytes(b) => {
            length_prefix(out, b.len(), 0x80, 0xb7);
            out.extend_from_slice(b);
        }
        RlpItem::List(items) => {
            let mut payload = Vec::new();
            for it in items {
                encode_into(it, &mut payload);
            }
            length_prefix(out, payload.len(), 0xc0, 0xf7);
            out.extend_from_slice(&payload);
        }
    }
}

pub fn rlp_encode(item: &RlpItem) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(item, &mut out);
    out
}

/// Encodes a list without building an [`RlpItem`] tree for it.
pub fn rlp_encode_list(items: &[RlpItem]) -> Vec<u8> {
    let mut payload = Vec::new();
    for it in items {
        encode_into(it, &mut payload);
    }
    let mut out = Vec::with_capacity(payload.len() + 9);
    length_prefix(&mut out, payload.len(), 0xc0, 0xf7);
    out.extend_from_slice(&payload);
    out
}

/// Strict decoder: rejects non-minimal prefixes and trailing bytes.
pub fn rlp_decode(data: &[u8]) -> Result<RlpItem, RlpError> {
    let (item, used) = decode_at(data)?;
    if used != data.len() {
        return Err(RlpError::TrailingBytes(data.len() - used));
    }
    Ok(item)
}

fn read_long_len(data: &[u8], n: usize) -> Result<usize, RlpError> {
    if n == 0 || n > 8 {
        return Err(RlpError::NonCanonical);
    }
    let bytes = data.get(1..1 + n).ok_or(RlpError::Truncated)?;
    if bytes[0] == 0 {
        return Err(RlpError::NonCanonical);
    }
    let len = bytes.iter().fold(0u64, |acc, b| (acc << 8) | u64::from(*b));
    if len <= 55 {
        return Err(RlpError::NonCanonical);
    }
    usize::try_from(len).map_err(|_| RlpError::Truncated)
}

fn decode_at(data: &[u8]) -> Result<(RlpItem, usize), RlpError> {
    let first = *data.first().ok_or(RlpError::Truncated)?;
    match first {
        0x00..=0x7f => Ok((RlpItem::Bytes(vec![first]), 1)),
        0x80..=0xb7 => {
            let len = usize::from(first - 0x80);
            let body = data.get(1..1 + len).ok_or(RlpError::Truncated)?;
            if len == 1 && body[0] < 0x80 {
                return Err(RlpError::NonCanonical);
            }
            Ok((RlpItem::Bytes(body.to_vec()), 1 + len))
        }
        0xb8..=0xbf => {
            let n = usize::from(first - 0xb7);
            let len = read_long_len(data, n)?;
            let start = 1 + n;
            let body = data
                .get(start..start.checked_add(len).ok_or(RlpError::Truncated)?)
                .ok_or(RlpError::Truncated)?;
            Ok((RlpItem::Bytes(body.to_vec()), start + len))
        }
        0xc0..=0xf7 => {
            let len = usize::from(first - 0xc0);
            let body = data.get(1..1 + len).ok_or(RlpError::Truncated)?;
            Ok((RlpItem::List(decode_list(body)?), 1 + len))
        }
        0xf8..=0xff => {
            let n = usize::from(first - 0xf7);
            let len = read_long_len(data, n)?;
            let start = 1 + n;
            let body = data
                .get(start..start.checked_add(len).ok_or(RlpError::Truncated)?)
                .ok_or(RlpError::Truncated)?;
            Ok((RlpItem::List(decode_list(body)?), start + len))
        }
    }
}

fn decode_list(mut body: &[u8]) -> Result<Vec<RlpItem>, RlpError> {
    let mut items = Vec::new();
    while !body.is_empty() {
        let (item, used) = decode_at(body)?;
        items.push(item);
        body = &body[used..];
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spec_examples() {
        assert_eq!(rlp_encode(&RlpItem::bytes(vec![])), vec![0x80]);
        assert_eq!(rlp_encode(&RlpItem::bytes(vec![0x05])), vec![0x05]);
        let two_empty = RlpItem::List(vec![RlpItem::bytes(vec![]), RlpItem::bytes(vec![])]);
        assert_eq!(rlp_encode(&two_empty), vec![0xc2, 0x80, 0x80]);
    }

    #[test]
    fn well_known_vectors() {
        assert_eq!(rlp_encode(&RlpItem::bytes(b"dog".to_vec())), b"\x83dog");
        let cat_dog = RlpItem::List(vec![RlpItem::bytes(b"cat".to_vec()), RlpItem::bytes(b"dog".to_vec())]);
        assert_eq!(rlp_encode(&cat_dog), b"\xc8\x83cat\x83dog");
        assert_eq!(rlp_encode(&RlpItem::uint(0)), vec![0x80]);
        assert_eq!(rlp_encode(&RlpItem::uint(15)), vec![0x0f]);
        assert_eq!(rlp_encode(&RlpItem::uint(1024)), vec![0x82, 0x04, 0x00]);
        let long = vec![b'a'; 56];
        let enc = rlp_encode(&RlpItem::bytes(long.clone()));
        assert_eq!(&enc[..2], &[0xb8, 56]);
        assert_eq!(&enc[2..], &long[..]);
        // [ [], [[]], [ [], [[]] ] ]
        let e = || RlpItem::List(vec![]);
        let set = RlpItem::List(vec![
            e(),
            RlpItem::List(vec![e()]),
            RlpItem::List(vec![e(), RlpItem::List(vec![e()])]),
        ]);
        assert_eq!(rlp_encode(&set), vec![0xc7, 0xc0, 0xc1, 0xc0, 0xc3, 0xc0, 0xc1, 0xc0]);
    }

    #[test]
    fn rejects_non_canonical() {
        assert_eq!(rlp_decode(&[0x81, 0x05]), Err(RlpError::NonCanonical));
        assert_eq!(rlp_decode(&[0xb8, 0x01, 0xff]), Err(RlpError::NonCanonical));
        assert_eq!(rlp_decode(&[0x83, b'd', b'o']), Err(RlpError::Truncated));
        assert_eq!(rlp_decode(&[0x05, 0x05]), Err(RlpError::TrailingBytes(1)));
        assert_eq!(RlpItem::bytes(vec![0, 1]).as_uint(), Err(RlpError::NonCanonical));
    }

    fn arb_item() -> impl Strategy<Value = RlpItem> {
        let leaf = prop::collection::vec(any::<u8>(), 0..80).prop_map(RlpItem::Bytes);
        leaf.prop_recursive(3, 40, 8, |inner| {
            prop::collection::vec(inner, 0..8).prop_map(RlpItem::List)
        })
    }

    proptest! {
        #[test]
        fn roundtrip(item in arb_item()) {
            let enc = rlp_encode(&item);
            prop_assert_eq!(rlp_decode(&enc).unwrap(), item);
        }

        #[test]
        fn uint_roundtrip(v in any::<u64>()) {
            prop_assert_eq!(rlp_decode(&rlp_encode(&RlpItem::uint(v))).unwrap().as_uint().unwrap(), v);
        }
    }
}
