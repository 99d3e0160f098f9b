use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;

use super::FieldError;

/// The Mersenne prime 2^127 - 1.
pub const MERSENNE_127: u128 = (1u128 << 127) - 1;

const LOW64: u128 = u64::MAX as u128;

/// A prime field `Z_p` with `p < 2^128`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeField {
    modulus: u128,
}

impl PrimeField {
    /// Builds the field, rejecting composite or tiny moduli.
    pub fn new(modulus: u128) -> Result<Self, FieldError> {
        if !is_prime_u128(modulus) {
            return Err(FieldError::NotPrime(modulus));
        }
        Ok(Self { modulus })
    }

    pub fn mersenne127() -> Self {
        Self {
            modulus: MERSENNE_127,
        }
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    /// Reduces `v` into the field.
    pub fn element(&self, v: u128) -> FieldElement {
        FieldElement {
            value: v % self.modulus,
            modulus: self.modulus,
        }
    }

    /// Like [`element`](Self::element) but refuses values that are not already reduced.
    pub fn checked_element(&self, v: u128) -> Result<FieldElement, FieldError> {
        if v >= self.modulus {
            return Err(FieldError::OutOfRange {
                value: v,
                modulus: self.modulus,
            });
        }
        Ok(self.element(v))
    }

    /// Maps a signed integer to its residue (negative values become field complements).
    pub fn from_i128(&self, v: i128) -> FieldElement {
        let m = self.modulus;
        let mag = v.unsigned_abs() % m;
        if v < 0 && mag != 0 {
            self.element(m - mag)
        } else {
            self.element(mag)
        }
    }

    pub fn zero(&self) -> FieldElement {
        self.element(0)
    }

    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    /// Uniform element.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        self.element(rng.gen_range(0..self.modulus))
    }
}

/// An element of a [`PrimeField`]. The modulus travels with the value; mixing
/// elements of different fields is a programming error and panics.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u128,
    modulus: u128,
}

impl FieldElement {
    pub fn value(&self) -> u128 {
        self.value
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    pub fn field(&self) -> PrimeField {
        PrimeField {
            modulus: self.modulus,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    /// Centered representative in `(-p/2, p/2]`.
    pub fn to_signed(&self) -> i128 {
        let half = self.modulus / 2;
        if self.value > half {
            -((self.modulus - self.value) as i128)
        } else {
            self.value as i128
        }
    }

    pub fn pow(&self, mut exp: u128) -> FieldElement {
        let mut base = *self;
        let mut acc = self.field().one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat; `None` for zero.
    pub fn inverse(&self) -> Option<FieldElement> {
        if self.value == 0 {
            None
        } else {
            Some(self.pow(self.modulus - 2))
        }
    }

    fn same_field(&self, other: &Self) {
        assert_eq!(
            self.modulus, other.modulus,
            "field elements from different moduli"
        );
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: Self) -> Self {
        self.same_field(&rhs);
        FieldElement {
            value: add_mod(self.value, rhs.value, self.modulus),
            modulus: self.modulus,
        }
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> Self {
        let value = if self.value == 0 {
            0
        } else {
            self.modulus - self.value
        };
        FieldElement {
            value,
            modulus: self.modulus,
        }
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: Self) -> Self {
        self.same_field(&rhs);
        FieldElement {
            value: mul_mod(self.value, rhs.value, self.modulus),
            modulus: self.modulus,
        }
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for FieldElement {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for FieldElement {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Sum for FieldElement {
    /// Panics on an empty iterator: there is no field to pick a zero from.
    fn sum<I: Iterator<Item = Self>>(mut iter: I) -> Self {
        let first = iter.next().expect("sum of an empty set of field elements");
        iter.fold(first, |acc, x| acc + x)
    }
}

fn add_mod(a: u128, b: u128, m: u128) -> u128 {
    let (s, overflow) = a.overflowing_add(b);
    if overflow || s >= m {
        s.wrapping_sub(m)
    } else {
        s
    }
}

fn widening_mul(a: u128, b: u128) -> (u128, u128) {
    let (a1, a0) = (a >> 64, a & LOW64);
    let (b1, b0) = (b >> 64, b & LOW64);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & LOW64) + (p10 & LOW64);
    let lo = (p00 & LOW64) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

fn mul_mod(a: u128, b: u128, m: u128) -> u128 {
    if m == MERSENNE_127 {
        // 2^127 = 1, so 2^128 = 2
        let (hi, lo) = widening_mul(a, b);
        let s = (hi << 1) + (lo >> 127) + (lo & MERSENNE_127);
        let s = (s & MERSENNE_127) + (s >> 127);
        return if s >= MERSENNE_127 {
            s - MERSENNE_127
        } else {
            s
        };
    }
    if m <= LOW64 {
        return (a * b) % m;
    }
    let mut acc = 0u128;
    let mut x = a;
    let mut y = b;
    while y > 0 {
        if y & 1 == 1 {
            acc = add_mod(acc, x, m);
        }
        x = add_mod(x, x, m);
        y >>= 1;
    }
    acc
}

fn pow_mod(mut base: u128, mut exp: u128, m: u128) -> u128 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

const SMALL_PRIMES: [u128; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

/// Miller-Rabin over the first twenty prime bases; deterministic below 3.3e24
/// and overwhelmingly reliable beyond.
pub fn is_prime_u128(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for p in SMALL_PRIMES {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'bases: for a in SMALL_PRIMES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn big_mulmod(a: u128, b: u128, m: u128) -> u128 {
        let r = (BigUint::from(a) * BigUint::from(b)) % BigUint::from(m);
        r.try_into().unwrap()
    }

    #[test]
    fn primality() {
        assert!(is_prime_u128(101));
        assert!(is_prime_u128(11));
        assert!(is_prime_u128(MERSENNE_127));
        assert!(!is_prime_u128(1));
        assert!(!is_prime_u128(100));
        assert!(!is_prime_u128((1u128 << 127) + 1));
        assert!(PrimeField::new(91).is_err());
    }

    #[test]
    fn signed_mapping() {
        let f = PrimeField::new(101).unwrap();
        assert_eq!(f.from_i128(-2).value(), 99);
        assert_eq!(f.from_i128(-101).value(), 0);
        assert_eq!(f.from_i128(-2).to_signed(), -2);
        assert_eq!(f.element(50).to_signed(), 50);
        assert_eq!(f.element(51).to_signed(), -50);
    }

    #[test]
    fn checked_element_rejects_unreduced() {
        let f = PrimeField::new(11).unwrap();
        assert!(f.checked_element(11).is_err());
        assert_eq!(f.checked_element(10).unwrap().value(), 10);
    }

    #[test]
    fn inverse_roundtrip() {
        let f = PrimeField::mersenne127();
        let x = f.element(123456789);
        assert_eq!((x * x.inverse().unwrap()).value(), 1);
        assert!(f.zero().inverse().is_none());
    }

    proptest! {
        #[test]
        fn mersenne_mul_matches_bigint(a in 0..MERSENNE_127, b in 0..MERSENNE_127) {
            let f = PrimeField::mersenne127();
            prop_assert_eq!((f.element(a) * f.element(b)).value(), big_mulmod(a, b, MERSENNE_127));
        }

        #[test]
        fn generic_mul_matches_bigint(a in any::<u128>(), b in any::<u128>()) {
            // a 90-bit prime exercises the double-and-add path
            let m: u128 = 1237940039285380274899124191;
            prop_assert!(is_prime_u128(m));
            let f = PrimeField::new(m).unwrap();
            prop_assert_eq!((f.element(a) * f.element(b)).value(), big_mulmod(a % m, b % m, m));
        }

        #[test]
        fn add_sub_inverse(a in any::<u128>(), b in any::<u128>()) {
            let f = PrimeField::mersenne127();
            let (x, y) = (f.element(a), f.element(b));
            prop_assert_eq!(x + y - y, x);
            prop_assert_eq!(x - x, f.zero());
        }
    }
}
