//! Prime-field arithmetic, the Schnorr group behind the commitments, and
//! Pedersen commitments with opening checks and homomorphic combination.

mod field;
mod group;
mod pedersen;

use thiserror::Error;

pub use field::{is_prime_u128, FieldElement, PrimeField, MERSENNE_127};
pub use group::{group_setup, is_probable_prime, GroupParams};
pub use pedersen::{
    commit_values, commitment_combine, commitment_combine_all, pedersen_commit,
    pedersen_verify_opening, Commitment, Opening,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u128),
    #[error("value {value} is not below the modulus {modulus}")]
    OutOfRange { value: u128, modulus: u128 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("invalid group parameters: {0}")]
    Parameter(String),
    #[error("exponent {value} is outside Z_{modulus}")]
    Range { value: u128, modulus: u128 },
    #[error("element is not in the order-q subgroup")]
    NotInSubgroup,
}
