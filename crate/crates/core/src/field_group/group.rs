use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::field::{FieldElement, PrimeField, MERSENNE_127};
use super::GroupError;
use crate::keccak::keccak256_concat;

const TEST_GROUP: (u32, u32, u32, u32) = (23, 11, 2, 3);
const DOMAIN_COFACTOR: &[u8] = b"gridswap/group/cofactor";
const DOMAIN_G: &[u8] = b"gridswap/group/g";
const DOMAIN_H: &[u8] = b"gridswap/pedersen/h";

/// A Schnorr group: the order-`q` subgroup of `Z_p^*`, with two generators
/// whose relative discrete log nobody knows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    g: BigUint,
    h: BigUint,
    scalars: PrimeField,
    cofactor: BigUint,
}

impl GroupParams {
    /// Validates and assembles parameters.
    pub fn from_parts(p: BigUint, q: BigUint, g: BigUint, h: BigUint) -> Result<Self, GroupError> {
        let q_small = q
            .to_u128()
            .ok_or_else(|| GroupError::Parameter("subgroup order must fit in 128 bits".into()))?;
        let scalars = PrimeField::new(q_small)
            .map_err(|_| GroupError::Parameter("subgroup order is not prime".into()))?;
        if p <= BigUint::from(3u32) || !is_probable_prime(&p) {
            return Err(GroupError::Parameter("modulus is not prime".into()));
        }
        let p_minus_1 = &p - 1u32;
        if !(&p_minus_1 % &q).is_zero() {
            return Err(GroupError::Parameter("q does not divide p - 1".into()));
        }
        let one = BigUint::one();
        for (name, gen) in [("g", &g), ("h", &h)] {
            if gen.is_zero() || *gen == one || *gen >= p {
                return Err(GroupError::Parameter(format!("{name} is not a subgroup generator")));
            }
            if gen.modpow(&q, &p) != one {
                return Err(GroupError::Parameter(format!("{name} is outside the order-q subgroup")));
            }
        }
        if g == h {
            return Err(GroupError::Parameter("g and h coincide".into()));
        }
        let cofactor = &p_minus_1 / &q;
        Ok(Self {
            p,
            q,
            g,
            h,
            scalars,
            cofactor,
        })
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn h(&self) -> &BigUint {
        &self.h
    }

    /// The exponent field `Z_q`.
    pub fn scalar_field(&self) -> PrimeField {
        self.scalars
    }

    /// Byte width of a group element.
    pub fn element_len(&self) -> usize {
        self.p.bits().div_ceil(8) as usize
    }

    pub fn is_member(&self, x: &BigUint) -> bool {
        !x.is_zero() && x < &self.p && x.modpow(&self.q, &self.p).is_one()
    }

    /// `base^e mod p` with a scalar exponent.
    pub fn exp(&self, base: &BigUint, e: &FieldElement) -> BigUint {
        base.modpow(&BigUint::from(e.value()), &self.p)
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    /// Fixed-width big-endian encoding of a group element.
    pub fn encode_element(&self, x: &BigUint) -> Vec<u8> {
        let raw = x.to_bytes_be();
        let mut out = vec![0u8; self.element_len().saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }

    /// Maps arbitrary bytes into the subgroup (never the identity).
    pub fn hash_to_group(&self, domain: &[u8], data: &[u8]) -> BigUint {
        let mut ctr = 0u32;
        loop {
            let wide = expand(domain, data, ctr, 64);
            let t = BigUint::from_bytes_be(&wide) % &self.p;
            let candidate = t.modpow(&self.cofactor, &self.p);
            if !candidate.is_zero() && !candidate.is_one() {
                return candidate;
            }
            ctr += 1;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GroupParamsJson {
    p: String,
    q: String,
    g: String,
    h: String,
}

fn parse_decimal<E: serde::de::Error>(s: &str, field: &str) -> Result<BigUint, E> {
    s.parse::<BigUint>()
        .map_err(|_| E::custom(format!("{field}: not a decimal integer")))
}

impl Serialize for GroupParams {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GroupParamsJson {
            p: self.p.to_string(),
            q: self.q.to_string(),
            g: self.g.to_string(),
            h: self.h.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupParams {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = GroupParamsJson::deserialize(d)?;
        GroupParams::from_parts(
            parse_decimal(&raw.p, "p")?,
            parse_decimal(&raw.q, "q")?,
            parse_decimal(&raw.g, "g")?,
            parse_decimal(&raw.h, "h")?,
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Generates group parameters.
///
/// `security_bits = 16` returns the fixed test group `(p, q, g, h) = (23, 11, 2, 3)`.
/// `security_bits = 256` returns a 256-bit prime `p = k*q + 1` with
/// `q = 2^127 - 1`, so the commitment exponent field coincides with the
/// default MPC field. `g` is derived from the seed and `h` is hashed out of a
/// domain-separated digest of `g`.
pub fn group_setup(security_bits: u32, seed: &[u8]) -> Result<GroupParams, GroupError> {
    if seed.is_empty() {
        return Err(GroupError::Parameter("seed must be non-empty".into()));
    }
    match security_bits {
        16 => {
            let (p, q, g, h) = TEST_GROUP;
            GroupParams::from_parts(p.into(), q.into(), g.into(), h.into())
        }
        256 => setup_256(seed),
        other => Err(GroupError::Parameter(format!(
            "unsupported security level {other} (expected 16 or 256)"
        ))),
    }
}

fn setup_256(seed: &[u8]) -> Result<GroupParams, GroupError> {
    let q = BigUint::from(MERSENNE_127);
    let mut k = BigUint::from_bytes_be(&expand(DOMAIN_COFACTOR, seed, 0, 17));
    // k in [2^128, 2^129), even, so p = kq + 1 is odd and 256 bits wide
    k %= BigUint::one() << 128u32;
    k |= BigUint::one() << 128u32;
    k.set_bit(0, false);
    let p = loop {
        let candidate = &k * &q + 1u32;
        if candidate.bits() == 256 && is_probable_prime(&candidate) {
            break candidate;
        }
        k += 2u32;
    };
    let one = BigUint::one();
    let mut ctr = 0u32;
    let g = loop {
        let t = BigUint::from_bytes_be(&expand(DOMAIN_G, seed, ctr, 64)) % &p;
        let g = t.modpow(&k, &p);
        if !g.is_zero() && g != one {
            break g;
        }
        ctr += 1;
    };
    let partial = GroupParams {
        p: p.clone(),
        q: q.clone(),
        g: g.clone(),
        h: g.clone(),
        scalars: PrimeField::mersenne127(),
        cofactor: k,
    };
    let g_bytes = partial.encode_element(&g);
    let h = partial.hash_to_group(DOMAIN_H, &g_bytes);
    GroupParams::from_parts(p, q, g, h)
}

/// Counter-mode Keccak expansion to `len` bytes.
fn expand(domain: &[u8], data: &[u8], ctr: u32, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut block = 0u32;
    while out.len() < len {
        let digest = keccak256_concat([
            domain,
            &(domain.len() as u32).to_be_bytes()[..],
            data,
            &ctr.to_be_bytes()[..],
            &block.to_be_bytes()[..],
        ]);
        out.extend_from_slice(&digest);
        block += 1;
    }
    out.truncate(len);
    out
}

const TRIAL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Miller-Rabin with the first 25 prime bases.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for p in TRIAL_PRIMES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'bases: for a in TRIAL_PRIMES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}
