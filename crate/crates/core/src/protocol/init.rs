use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::commit::{check_shares, commit_and_share};
use super::{admit_submission, Crypto, FixedPool, ProtocolError, RunLog};
use crate::balance_proof::{prove, BalanceProofError, PrivateWitness, Proof, PublicInputs};
use crate::field_group::{commitment_combine_all, pedersen_commit, Commitment};
use crate::mpc::{AdditiveShare, Session};
use crate::state_trie::{AccountLeaf, MptProof, LEAF_LEN, U256};

/// One liquidity provider's private input.
#[derive(Clone, Debug)]
pub struct LpInput {
    pub lp_id: String,
    /// Energy contributed, in fixed-point units.
    pub liquidity: u128,
    pub leaf: [u8; LEAF_LEN],
    pub account_proof: MptProof,
}

/// What a provider publishes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LpSubmission {
    pub lp_id: String,
    pub commitment: Commitment,
    pub share_commitments: Vec<Commitment>,
    pub balance_proof: Proof,
    pub account_proof: MptProof,
}

#[derive(Clone, Debug)]
pub struct InitOutcome {
    pub submissions: Vec<LpSubmission>,
    pub accepted: Vec<String>,
    /// Provider id and the reason it was left out.
    pub rejected: Vec<(String, String)>,
    pub total: Option<u128>,
    pub pool: Option<FixedPool>,
    /// Committee-held shares of each accepted provider's liquidity.
    pub lp_shares: BTreeMap<String, Vec<AdditiveShare>>,
}

/// Commits, proves and shares each provider's liquidity, admits those whose
/// proofs check out, and opens the pool at `(X, m_reserve)` where `X` is the
/// secure sum of admitted contributions. `check_account` resolves a
/// provider's state-trie proof to its account leaf. With no admitted provider the pool
/// stays closed.
#[allow(clippy::too_many_arguments)]
pub fn run_init_phase<R: Rng + ?Sized>(
    crypto: &Crypto,
    session: &mut Session,
    lps: &[LpInput],
    threshold: u128,
    m_reserve: u128,
    check_account: impl Fn(&str, &MptProof) -> Result<AccountLeaf, String>,
    log: &mut RunLog,
    tick: u64,
    rng: &mut R,
) -> Result<InitOutcome, ProtocolError> {
    let n = session.parties();
    let k = U256::from_u128(threshold);
    let mut out = InitOutcome {
        submissions: Vec::new(),
        accepted: Vec::new(),
        rejected: Vec::new(),
        total: None,
        pool: None,
        lp_shares: BTreeMap::new(),
    };
    let mut value_matrix = Vec::new();
    let mut blinding_matrix = Vec::new();
    let mut admitted_commitments = Vec::new();

    for lp in lps {
        let publics = PublicInputs::for_leaf(k, &lp.leaf);
        let proof = match prove(&crypto.pk, &PrivateWitness { leaf_rlp: lp.leaf }, &publics) {
            Ok(p) => p,
            Err(BalanceProofError::Unsatisfied { constraint }) => {
                log.push(tick, &lp.lp_id, "lp_rejected", json!({ "reason": constraint }));
                out.rejected.push((lp.lp_id.clone(), constraint));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let shared = commit_and_share(crypto, lp.liquidity, n, &format!("lp/{}", lp.lp_id), rng)?;
        let submission = LpSubmission {
            lp_id: lp.lp_id.clone(),
            commitment: shared.commitment.clone(),
            share_commitments: shared.share_commitments.clone(),
            balance_proof: proof,
            account_proof: lp.account_proof.clone(),
        };
        let verdict = admit_submission(
            crypto,
            &submission.balance_proof,
            &submission.account_proof,
            threshold,
            |p| check_account(&lp.lp_id, p),
        )
        .and_then(|()| {
            check_shares(
                crypto,
                &shared.commitment,
                &shared.share_commitments,
                &shared.value_shares,
                &shared.blinding_shares,
            )
        });
        log.push(
            tick,
            &lp.lp_id,
            "lp_committed",
            json!({ "commitment": submission.commitment, "shareCommitments": submission.share_commitments }),
        );
        out.submissions.push(submission);
        if let Err(reason) = verdict {
            log.push(tick, &lp.lp_id, "lp_rejected", json!({ "reason": reason }));
            out.rejected.push((lp.lp_id.clone(), reason));
            continue;
        }
        admitted_commitments.push(shared.commitment);
        out.accepted.push(lp.lp_id.clone());
        out.lp_shares.insert(lp.lp_id.clone(), shared.value_shares.clone());
        value_matrix.push(shared.value_shares);
        blinding_matrix.push(shared.blinding_shares);
    }

    if value_matrix.is_empty() {
        log.push(tick, "committee", "pool_unopened", json!({ "reason": "no admitted liquidity" }));
        return Ok(out);
    }
    let x = session.secure_sum(&value_matrix)?;
    let r = session.secure_sum(&blinding_matrix)?;
    let aggregate = commitment_combine_all(crypto.group(), &admitted_commitments);
    if pedersen_commit(crypto.group(), &x, &r)? != aggregate {
        return Err(crate::mpc::MpcError::Protocol("liquidity total does not open the aggregate commitment".into()).into());
    }
    let total = x.value();
    let pool = FixedPool::new(total, m_reserve, session.field().modulus())?;
    log.push(
        tick,
        "committee",
        "pool_opened",
        json!({
            "providers": out.accepted.len(),
            "e": super::format_units(pool.e),
            "m": super::format_units(pool.m),
            "mpc": session.log(),
        }),
    );
    out.total = Some(total);
    out.pool = Some(pool);
    Ok(out)
}
