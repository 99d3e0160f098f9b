use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::field::FieldElement;
use super::group::GroupParams;
use super::GroupError;

/// A Pedersen commitment `g^x h^r mod p`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Commitment(BigUint);

impl Commitment {
    pub fn identity() -> Self {
        Commitment(BigUint::one())
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Wraps a raw group element after checking subgroup membership.
    pub fn from_element(params: &GroupParams, c: BigUint) -> Result<Self, GroupError> {
        if !params.is_member(&c) {
            return Err(GroupError::NotInSubgroup);
        }
        Ok(Commitment(c))
    }

    pub fn is_in_subgroup(&self, params: &GroupParams) -> bool {
        params.is_member(&self.0)
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", self.0.to_str_radix(16))
    }
}

impl fmt::Debug for Commitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Commitment({})", self.to_hex())
    }
}

impl Serialize for Commitment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Commitment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let digits = s
            .strip_prefix("0x")
            .ok_or_else(|| serde::de::Error::custom("commitment must be 0x-prefixed hex"))?;
        BigUint::parse_bytes(digits.as_bytes(), 16)
            .map(Commitment)
            .ok_or_else(|| serde::de::Error::custom("commitment is not valid hex"))
    }
}

/// Committed value and blinding factor, both in `Z_q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Opening {
    pub x: FieldElement,
    pub r: FieldElement,
}

fn check_scalar(params: &GroupParams, v: &FieldElement) -> Result<(), GroupError> {
    if v.modulus() != params.scalar_field().modulus() {
        return Err(GroupError::Range {
            value: v.value(),
            modulus: params.scalar_field().modulus(),
        });
    }
    Ok(())
}

/// `Comm(x, r) = g^x h^r mod p`.
pub fn pedersen_commit(
    params: &GroupParams,
    x: &FieldElement,
    r: &FieldElement,
) -> Result<Commitment, GroupError> {
    check_scalar(params, x)?;
    check_scalar(params, r)?;
    let gx = params.exp(params.g(), x);
    let hr = params.exp(params.h(), r);
    Ok(Commitment(params.mul(&gx, &hr)))
}

/// Commits to raw integers, rejecting anything outside `[0, q)`.
pub fn commit_values(params: &GroupParams, x: u128, r: u128) -> Result<Commitment, GroupError> {
    let f = params.scalar_field();
    let x = f.checked_element(x).map_err(|_| GroupError::Range {
        value: x,
        modulus: f.modulus(),
    })?;
    let r = f.checked_element(r).map_err(|_| GroupError::Range {
        value: r,
        modulus: f.modulus(),
    })?;
    pedersen_commit(params, &x, &r)
}

pub fn pedersen_verify_opening(params: &GroupParams, c: &Commitment, open: &Opening) -> bool {
    match pedersen_commit(params, &open.x, &open.r) {
        Ok(expected) => &expected == c,
        Err(_) => false,
    }
}

/// Homomorphic combination: `Comm(x1, r1) * Comm(x2, r2) = Comm(x1 + x2, r1 + r2)`.
pub fn commitment_combine(params: &GroupParams, c1: &Commitment, c2: &Commitment) -> Commitment {
    Commitment(params.mul(&c1.0, &c2.0))
}

/// Product of any number of commitments.
pub fn commitment_combine_all<'a>(
    params: &GroupParams,
    cs: impl IntoIterator<Item = &'a Commitment>,
) -> Commitment {
    cs.into_iter()
        .fold(Commitment::identity(), |acc, c| commitment_combine(params, &acc, c))
}

#[cfg(test)]
mod tests {
    use super::super::group::group_setup;
    use super::*;

    fn test_group() -> GroupParams {
        group_setup(16, b"test").unwrap()
    }

    fn c(params: &GroupParams, x: u128, r: u128) -> Commitment {
        commit_values(params, x, r).unwrap()
    }

    #[test]
    fn commit_examples() {
        let g = test_group();
        // 2^4 * 3^5 = 16 * 243 = 3888 = 169*23 + 1
        assert_eq!(c(&g, 4, 5).value(), &BigUint::from(1u32));
        assert_eq!(c(&g, 0, 0), Commitment::identity());
        assert_eq!(c(&g, 1, 1).value(), &BigUint::from(6u32));
    }

    #[test]
    fn range_errors() {
        let g = test_group();
        assert!(matches!(commit_values(&g, 11, 0), Err(GroupError::Range { .. })));
        assert!(matches!(commit_values(&g, 0, 12), Err(GroupError::Range { .. })));
        let foreign = crate::field_group::PrimeField::new(101).unwrap().element(3);
        let zero = g.scalar_field().zero();
        assert!(pedersen_commit(&g, &foreign, &zero).is_err());
    }

    #[test]
    fn opening_examples() {
        let g = test_group();
        let f = g.scalar_field();
        let cm = c(&g, 4, 5);
        let open = |x, r| Opening {
            x: f.element(x),
            r: f.element(r),
        };
        assert!(pedersen_verify_opening(&g, &cm, &open(4, 5)));
        // 2^5 * 3^5 = 7776 = 338*23 + 2, which is not 1
        assert!(!pedersen_verify_opening(&g, &cm, &open(5, 5)));
        assert!(pedersen_verify_opening(&g, &Commitment::identity(), &open(0, 0)));
    }

    #[test]
    fn combine_examples() {
        let g = test_group();
        // 6 * 16 = 96 = 4*23 + 4; 2^3 * 3^4 = 648 = 28*23 + 4
        let sum = commitment_combine(&g, &c(&g, 1, 1), &c(&g, 2, 3));
        assert_eq!(sum.value(), &BigUint::from(4u32));
        assert_eq!(sum, c(&g, 3, 4));
        let x = c(&g, 7, 9);
        assert_eq!(commitment_combine(&g, &x, &c(&g, 0, 0)), x);
        assert_eq!(
            commitment_combine(&g, &c(&g, 7, 9), &c(&g, 11 - 7, 11 - 9)),
            Commitment::identity()
        );
    }

    #[test]
    fn json_hex_roundtrip() {
        let g = test_group();
        let cm = c(&g, 2, 3);
        let s = serde_json::to_string(&cm).unwrap();
        assert_eq!(s, "\"0x10\"");
        let back: Commitment = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cm);
        assert!(Commitment::from_element(&g, BigUint::from(5u32)).is_err());
    }
}
