//! Deterministic attestation backend.
//!
//! Not a SNARK. The prover role holds a Schnorr signing key bound to one
//! circuit; a proof is a signature over the circuit digest and the public
//! inputs, issued only after the prover has checked every constraint. The
//! signing nonce is derived from the key and the message, so a proof depends
//! on the public inputs alone and never on the witness.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::circuit::ConstraintSystem;
use super::{BalanceProofError, PrivateWitness, PublicInputs};
use crate::field_group::{group_setup, FieldElement, GroupParams};
use crate::keccak::keccak256_concat;

const DOMAIN_SK: &[u8] = b"gridswap/prover/sk";
const DOMAIN_NONCE: &[u8] = b"gridswap/prover/nonce";
const DOMAIN_CHALLENGE: &[u8] = b"gridswap/prover/challenge";
const SCALAR_LEN: usize = 16;

/// Public parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams {
    pub group: GroupParams,
}

#[derive(Clone)]
pub struct ProvingKey {
    circuit: ConstraintSystem,
    vk: VerifyingKey,
    secret: FieldElement,
}

impl std::fmt::Debug for ProvingKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProvingKey")
            .field("circuit_digest", &hex::encode(self.vk.circuit_digest))
            .finish_non_exhaustive()
    }
}

impl ProvingKey {
    pub fn verifying_key(&self) -> &VerifyingKey {
        &self.vk
    }

    pub fn circuit(&self) -> &ConstraintSystem {
        &self.circuit
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyingKey {
    pub circuit_digest: [u8; 32],
    pub group: GroupParams,
    pub public_key: BigUint,
}

impl VerifyingKey {
    /// `digest || p || q || g || h || public key`, group elements fixed-width.
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.group;
        let mut out = self.circuit_digest.to_vec();
        out.extend(g.encode_element(g.p()));
        out.extend(fixed(g.q(), SCALAR_LEN));
        for x in [g.g(), g.h(), &self.public_key] {
            out.extend(g.encode_element(x));
        }
        out
    }
}

fn fixed(x: &BigUint, len: usize) -> Vec<u8> {
    let raw = x.to_bytes_be();
    let mut out = vec![0u8; len.saturating_sub(raw.len())];
    out.extend(raw);
    out
}

/// `Setup(1^lambda)`: a 256-bit group derived from `seed`.
pub fn setup_params(seed: &[u8]) -> Result<PublicParams, BalanceProofError> {
    let group = group_setup(256, seed).map_err(|e| BalanceProofError::Setup(e.to_string()))?;
    Ok(PublicParams { group })
}

/// `Gen(pp, C)`: keys bound to the circuit digest.
pub fn generate_keys(pp: &PublicParams, cs: &ConstraintSystem, seed: &[u8]) -> (ProvingKey, VerifyingKey) {
    let digest = cs.digest();
    let scalars = pp.group.scalar_field();
    let secret = hash_to_scalar(&pp.group, &[DOMAIN_SK, seed, &digest]);
    let secret = if secret.is_zero() { scalars.one() } else { secret };
    let public_key = pp.group.exp(pp.group.g(), &secret);
    let vk = VerifyingKey {
        circuit_digest: digest,
        group: pp.group.clone(),
        public_key,
    };
    let pk = ProvingKey {
        circuit: cs.clone(),
        vk: vk.clone(),
        secret,
    };
    (pk, vk)
}

/// `Setup` followed by `Gen`.
pub fn setup(cs: &ConstraintSystem, seed: &[u8]) -> Result<(ProvingKey, VerifyingKey), BalanceProofError> {
    let pp = setup_params(seed)?;
    Ok(generate_keys(&pp, cs, seed))
}

fn hash_to_scalar(group: &GroupParams, parts: &[&[u8]]) -> FieldElement {
    let wide = keccak256_concat(parts.iter().copied());
    let v = u128::from_be_bytes(wide[..16].try_into().expect("16 bytes"));
    group.scalar_field().element(v)
}

fn message(vk: &VerifyingKey, publics: &PublicInputs) -> Vec<u8> {
    let mut m = vk.circuit_digest.to_vec();
    m.extend(publics.digest());
    m
}

fn challenge(vk: &VerifyingKey, r: &BigUint, msg: &[u8]) -> FieldElement {
    let g = &vk.group;
    hash_to_scalar(
        g,
        &[
            DOMAIN_CHALLENGE,
            &g.encode_element(r),
            &g.encode_element(&vk.public_key),
            msg,
        ],
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    #[serde(with = "crate::hexser::bytes")]
    pub vk: Vec<u8>,
    pub publics: PublicInputs,
    #[serde(with = "crate::hexser::bytes")]
    pub attestation: Vec<u8>,
}

/// `Prov(pk, t, w)`. Refuses to attest unless every constraint holds.
pub fn prove(pk: &ProvingKey, witness: &PrivateWitness, publics: &PublicInputs) -> Result<Proof, BalanceProofError> {
    pk.circuit
        .check(witness, publics)
        .map_err(|constraint| BalanceProofError::Unsatisfied { constraint })?;
    let vk = &pk.vk;
    let g = &vk.group;
    let msg = message(vk, publics);
    let sk_bytes = pk.secret.value().to_be_bytes();
    let mut nonce = hash_to_scalar(g, &[DOMAIN_NONCE, &sk_bytes, &msg]);
    if nonce.is_zero() {
        nonce = g.scalar_field().one();
    }
    let r = g.exp(g.g(), &nonce);
    let e = challenge(vk, &r, &msg);
    let s = nonce + e * pk.secret;
    let mut attestation = g.encode_element(&r);
    attestation.extend(s.value().to_be_bytes());
    Ok(Proof {
        vk: vk.to_bytes(),
        publics: publics.clone(),
        attestation,
    })
}

/// `Verif(vk, t, pi)`.
pub fn verify(vk: &VerifyingKey, publics: &PublicInputs, proof: &Proof) -> bool {
    if proof.vk != vk.to_bytes() || &proof.publics != publics {
        return false;
    }
    let g = &vk.group;
    let elen = g.element_len();
    if proof.attestation.len() != elen + SCALAR_LEN {
        return false;
    }
    let r = BigUint::from_bytes_be(&proof.attestation[..elen]);
    let s_raw = u128::from_be_bytes(proof.attestation[elen..].try_into().expect("16 bytes"));
    let Ok(s) = g.scalar_field().checked_element(s_raw) else {
        return false;
    };
    if r.is_zero() || !g.is_member(&r) {
        return false;
    }
    let e = challenge(vk, &r, &message(vk, publics));
    let lhs = g.exp(g.g(), &s);
    let rhs = g.mul(&r, &g.exp(&vk.public_key, &e));
    lhs == rhs
}
