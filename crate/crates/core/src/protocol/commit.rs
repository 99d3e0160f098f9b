use rand::Rng;

use super::{Crypto, ProtocolError};
use crate::balance_proof::{verify, Proof};
use crate::field_group::{
    commitment_combine_all, pedersen_commit, pedersen_verify_opening, Commitment, Opening,
};
use crate::keccak::keccak256;
use crate::mpc::{share_secret, AdditiveShare, ShareTag};
use crate::state_trie::{encode_account_leaf, AccountLeaf, MptProof, U256};

/// A committed value split for the committee: the public commitment, one
/// public commitment per share, and the private value and blinding shares.
pub(crate) struct SharedCommitment {
    pub commitment: Commitment,
    pub share_commitments: Vec<Commitment>,
    pub opening: Opening,
    pub value_shares: Vec<AdditiveShare>,
    pub blinding_shares: Vec<AdditiveShare>,
}

pub(crate) fn commit_and_share<R: Rng + ?Sized>(
    crypto: &Crypto,
    value: u128,
    parties: usize,
    label: &str,
    rng: &mut R,
) -> Result<SharedCommitment, ProtocolError> {
    let field = crypto.field();
    let x = field.checked_element(value).map_err(|e| ProtocolError::Amount(e.to_string()))?;
    let r = field.random(rng);
    let value_shares = share_secret(x, parties, ShareTag::new(format!("{label}/value")), rng)?;
    let blinding_shares = share_secret(r, parties, ShareTag::new(format!("{label}/blinding")), rng)?;
    let group = crypto.group();
    let share_commitments = value_shares
        .iter()
        .zip(&blinding_shares)
        .map(|(v, b)| pedersen_commit(group, &v.value, &b.value))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SharedCommitment {
        commitment: pedersen_commit(group, &x, &r)?,
        share_commitments,
        opening: Opening { x, r },
        value_shares,
        blinding_shares,
    })
}

/// The committee's consistency check: the share commitments multiply to the
/// public commitment, and each party's private share pair opens its own
/// share commitment.
pub(crate) fn check_shares(
    crypto: &Crypto,
    commitment: &Commitment,
    share_commitments: &[Commitment],
    values: &[AdditiveShare],
    blindings: &[AdditiveShare],
) -> Result<(), String> {
    let group = crypto.group();
    if share_commitments.len() != values.len() || values.len() != blindings.len() {
        return Err("share count mismatch".into());
    }
    if &commitment_combine_all(group, share_commitments) != commitment {
        return Err("share commitments do not combine to the commitment".into());
    }
    for ((c, v), b) in share_commitments.iter().zip(values).zip(blindings) {
        if v.party_id != b.party_id {
            return Err("share pairs are misaligned".into());
        }
        let opening = Opening {
            x: v.value,
            r: b.value,
        };
        if !pedersen_verify_opening(group, c, &opening) {
            return Err(format!("party {} holds a share that does not open its commitment", v.party_id));
        }
    }
    Ok(())
}

/// Admission check run by validators: the balance proof verifies for the
/// expected threshold and its leaf hash matches the leaf that
/// `check_account` resolves from the state-trie proof.
pub fn admit_submission(
    crypto: &Crypto,
    balance_proof: &Proof,
    account_proof: &MptProof,
    threshold: u128,
    check_account: impl FnOnce(&MptProof) -> Result<AccountLeaf, String>,
) -> Result<(), String> {
    let publics = &balance_proof.publics;
    if publics.threshold() != U256::from_u128(threshold) {
        return Err("balance proof is for a different threshold".into());
    }
    if !verify(&crypto.vk, publics, balance_proof) {
        return Err("balance proof does not verify".into());
    }
    let leaf = check_account(account_proof)?;
    let bytes = encode_account_leaf(&leaf).map_err(|e| e.to_string())?;
    if keccak256(bytes) != publics.leaf_hash_bytes() {
        return Err("balance proof is for a different account leaf".into());
    }
    Ok(())
}

