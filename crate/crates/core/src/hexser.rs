//! Serde adapters for lowercase `0x`-prefixed hex.

use serde::{Deserialize, Deserializer, Serializer};

pub fn encode(b: &[u8]) -> String {
    format!("0x{}", hex::encode(b))
}

pub fn decode(s: &str) -> Result<Vec<u8>, String> {
    let digits = s.strip_prefix("0x").ok_or("hex must be 0x-prefixed")?;
    if digits.bytes().any(|c| c.is_ascii_uppercase()) {
        return Err("hex must be lowercase".into());
    }
    hex::decode(digits).map_err(|e| e.to_string())
}

fn decode_de<E: serde::de::Error>(s: &str) -> Result<Vec<u8>, E> {
    decode(s).map_err(E::custom)
}

macro_rules! fixed {
    ($name:ident, $n:expr) => {
        pub mod $name {
            use super::*;

            pub fn serialize<S: Serializer>(v: &[u8; $n], s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&encode(v))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; $n], D::Error> {
                let s = String::deserialize(d)?;
                decode_de::<D::Error>(&s)?
                    .try_into()
                    .map_err(|_| serde::de::Error::custom(concat!("expected ", $n, " bytes")))
            }
        }
    };
}

fixed!(bytes20, 20);
fixed!(bytes32, 32);

pub mod bytes {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        decode_de::<D::Error>(&s)
    }
}

pub mod bytes_list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|n| encode(n)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| decode_de::<D::Error>(s)).collect()
    }
}
