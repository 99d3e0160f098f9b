use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::commit::{check_shares, commit_and_share};
use super::{to_rational, Crypto, FixedPool, ProtocolError, RunLog};
use crate::amm::{AmmError, Rational, Side};
use crate::balance_proof::{prove, PrivateWitness, Proof, PublicInputs};
use crate::field_group::{pedersen_verify_opening, Commitment, FieldElement, Opening};
use crate::mpc::{share_secret, AdditiveShare, MpcError, Session, ShareTag};
use crate::state_trie::{MptProof, LEAF_LEN, U256};

/// A trader's private order together with the account it spends from.
#[derive(Clone, Debug)]
pub struct OrderInput {
    pub tx_id: u64,
    pub trader: String,
    pub side: Side,
    /// Energy quantity in fixed-point units.
    pub quantity: u128,
    /// Maximum money per energy for a buy, minimum for a sell.
    pub limit: Option<Rational>,
    /// Public amount locked for the trade, in units of the spent token.
    pub lock: u128,
    /// Leaf of the money account for a buy, the energy account for a sell.
    pub leaf: [u8; LEAF_LEN],
    pub account_proof: MptProof,
}

/// The public part of a hidden order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TradeSubmission {
    pub tx_id: u64,
    pub trader: String,
    pub commitment: Commitment,
    pub share_commitments: Vec<Commitment>,
    pub balance_proof: Proof,
    pub account_proof: MptProof,
}

/// Submission plus what the trader keeps to itself until settlement.
#[derive(Clone, Debug)]
pub struct PreparedOrder {
    pub submission: TradeSubmission,
    pub side: Side,
    pub quantity: u128,
    pub limit: Option<Rational>,
    pub lock: u128,
    opening: Opening,
    quantity_shares: Vec<AdditiveShare>,
    blinding_shares: Vec<AdditiveShare>,
}

impl PreparedOrder {
    /// Replaces the share delivered to `party_id` (1-based), as a dishonest
    /// trader would.
    pub fn tamper_share(&mut self, party_id: usize, delta: u128) {
        let s = &mut self.quantity_shares[party_id - 1];
        s.value = s.value + s.value.field().element(delta);
    }
}

/// Commits to the quantity, shares it with its blinding factor across
/// `parties`, and proves the spending account holds at least `lock`.
pub fn prepare_order<R: Rng + ?Sized>(
    crypto: &Crypto,
    parties: usize,
    order: &OrderInput,
    rng: &mut R,
) -> Result<PreparedOrder, ProtocolError> {
    if order.quantity == 0 {
        return Err(AmmError::Range(to_rational(0)).into());
    }
    if order.side == Side::Sell && order.quantity > order.lock {
        return Err(ProtocolError::Amount("sell quantity exceeds the lock".into()));
    }
    let publics = PublicInputs::for_leaf(U256::from_u128(order.lock), &order.leaf);
    let balance_proof = prove(&crypto.pk, &PrivateWitness { leaf_rlp: order.leaf }, &publics)?;
    let shared = commit_and_share(crypto, order.quantity, parties, &format!("tx/{}", order.tx_id), rng)?;
    Ok(PreparedOrder {
        submission: TradeSubmission {
            tx_id: order.tx_id,
            trader: order.trader.clone(),
            commitment: shared.commitment,
            share_commitments: shared.share_commitments,
            balance_proof,
            account_proof: order.account_proof.clone(),
        },
        side: order.side,
        quantity: order.quantity,
        limit: order.limit.clone(),
        lock: order.lock,
        opening: shared.opening,
        quantity_shares: shared.value_shares,
        blinding_shares: shared.blinding_shares,
    })
}

/// A trade settled inside the committee, awaiting block finalization.
#[derive(Clone, Debug)]
pub struct PendingSettlement {
    pub tx_id: u64,
    pub trader: String,
    pub side: Side,
    pub pool_before: FixedPool,
    /// Opened product of the new reserves.
    pub c_prime: u128,
    opening: Opening,
    commitment: Commitment,
    e_new: Vec<AdditiveShare>,
    m_new: Vec<AdditiveShare>,
}

#[derive(Clone, Debug)]
pub enum TradeOutcome {
    Settled(PendingSettlement),
    /// The trader declined at settlement time.
    Withdrawn { reason: String },
    /// The committee refused the trade.
    Voided { reason: String },
}

fn add_public(shares: &[AdditiveShare], c: FieldElement, tag: ShareTag) -> Vec<AdditiveShare> {
    shares
        .iter()
        .map(|s| AdditiveShare {
            party_id: s.party_id,
            value: if s.party_id == 1 { s.value + c } else { s.value },
            tag: tag.clone(),
        })
        .collect()
}

/// Settles one hidden trade against the published pool.
///
/// The trader prices the order against `pool` and shares the money delta;
/// the committee checks the quantity shares against the posted
/// commitments, computes `(M + m)(E + e)` in one broadcast round, opens the
/// product and requires it to be at least `C`.
pub fn run_trading_phase<R: Rng + ?Sized>(
    crypto: &Crypto,
    session: &mut Session,
    pool: FixedPool,
    order: &PreparedOrder,
    log: &mut RunLog,
    tick: u64,
    rng: &mut R,
) -> Result<TradeOutcome, ProtocolError> {
    let field = session.field();
    let n = session.parties();
    let tx = order.submission.tx_id;
    let actor = format!("tx{tx}");

    // trader side
    let (money, within_limit) = match order.side {
        Side::Buy => {
            let cost = pool.buy_cost(order.quantity)?;
            let ok = order
                .limit
                .as_ref()
                .is_none_or(|l| to_rational(cost) / to_rational(order.quantity) <= *l);
            (cost, ok)
        }
        Side::Sell => {
            let proceeds = pool.sell_proceeds(order.quantity)?;
            let ok = order
                .limit
                .as_ref()
                .is_none_or(|l| to_rational(proceeds) / to_rational(order.quantity) >= *l);
            (proceeds, ok)
        }
    };
    if !within_limit {
        log.push(tick, &actor, "order_withdrawn", json!({ "reason": "limit" }));
        return Ok(TradeOutcome::Withdrawn { reason: "limit".into() });
    }
    if order.side == Side::Buy && money > order.lock {
        log.push(tick, &actor, "order_withdrawn", json!({ "reason": "cost exceeds lock" }));
        return Ok(TradeOutcome::Withdrawn {
            reason: "cost exceeds lock".into(),
        });
    }
    let m_delta = match order.side {
        Side::Buy => field.element(money),
        Side::Sell => -field.element(money),
    };
    let m_shares = share_secret(m_delta, n, ShareTag::new(format!("tx/{tx}/m")), rng)?;

    // committee side
    let sub = &order.submission;
    if let Err(reason) = check_shares(
        crypto,
        &sub.commitment,
        &sub.share_commitments,
        &order.quantity_shares,
        &order.blinding_shares,
    ) {
        log.push(tick, &actor, "trade_voided", json!({ "reason": "poisoning", "detail": reason }));
        return Ok(TradeOutcome::Voided { reason: "poisoning".into() });
    }
    let e_tag = ShareTag::new(format!("tx/{tx}/e"));
    let e_shares: Vec<AdditiveShare> = order
        .quantity_shares
        .iter()
        .map(|s| AdditiveShare {
            party_id: s.party_id,
            value: if order.side == Side::Buy { -s.value } else { s.value },
            tag: e_tag.clone(),
        })
        .collect();
    let before = session.log();
    let triple = session.dealer_gen_triple(rng)?;
    let e_pub = field.element(pool.e);
    let m_pub = field.element(pool.m);
    let c_shares = session.settle_product(&m_shares, &e_shares, m_pub, e_pub, &triple)?;
    let c_prime = session.open(&c_shares, &format!("tx{tx}/C'"))?.value();
    let after = session.log();
    if c_prime < pool.c() || c_prime >= field.modulus() / 2 {
        log.push(tick, &actor, "trade_voided", json!({ "reason": "invariant" }));
        return Ok(TradeOutcome::Voided { reason: "invariant".into() });
    }
    log.push(
        tick,
        &actor,
        "trade_settled",
        json!({
            "cPrime": c_prime.to_string(),
            "onlineRounds": after.online_rounds - before.online_rounds,
            "messages": after.messages - before.messages,
            "elapsedMicros": after.elapsed_micros - before.elapsed_micros,
        }),
    );
    Ok(TradeOutcome::Settled(PendingSettlement {
        tx_id: tx,
        trader: sub.trader.clone(),
        side: order.side,
        pool_before: pool,
        c_prime,
        opening: order.opening,
        commitment: sub.commitment.clone(),
        e_new: add_public(&e_shares, e_pub, ShareTag::new(format!("tx/{tx}/E'"))),
        m_new: add_public(&m_shares, m_pub, ShareTag::new(format!("tx/{tx}/M'"))),
    }))
}

/// An opened order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub side: Side,
    pub quantity: u128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Revealed {
    pub tx_id: u64,
    pub pool: FixedPool,
    /// Change in the trader's energy holdings.
    pub energy_delta: i128,
    /// Change in the trader's money holdings.
    pub money_delta: i128,
    pub bid: Option<Bid>,
}

/// Opens the new reserves once the block carrying the trade is final, and
/// optionally the order itself.
pub fn reveal_and_settle(
    crypto: &Crypto,
    session: &mut Session,
    pending: &PendingSettlement,
    finalized: bool,
    reveal_bids: bool,
    log: &mut RunLog,
    tick: u64,
) -> Result<Revealed, ProtocolError> {
    if !finalized {
        return Err(ProtocolError::NotFinalized(pending.tx_id));
    }
    let tx = pending.tx_id;
    let e_new = session.open(&pending.e_new, &format!("tx{tx}/E'"))?.value();
    let m_new = session.open(&pending.m_new, &format!("tx{tx}/M'"))?.value();
    if e_new.checked_mul(m_new) != Some(pending.c_prime) {
        return Err(MpcError::Protocol(format!("opened reserves of tx {tx} disagree with the opened product")).into());
    }
    let pool = FixedPool { e: e_new, m: m_new };
    let before = pending.pool_before;
    let energy_delta = before.e as i128 - e_new as i128;
    let money_delta = before.m as i128 - m_new as i128;
    let bid = if reveal_bids {
        if !pedersen_verify_opening(crypto.group(), &pending.commitment, &pending.opening) {
            return Err(MpcError::Protocol(format!("bid of tx {tx} does not open its commitment")).into());
        }
        Some(Bid {
            side: pending.side,
            quantity: pending.opening.x.value(),
        })
    } else {
        None
    };
    log.push(
        tick,
        format!("tx{tx}"),
        "trade_revealed",
        json!({
            "trader": pending.trader,
            "e": super::format_units(e_new),
            "m": super::format_units(m_new),
            "bid": bid.as_ref().map(|b| json!({ "side": b.side, "quantity": super::format_units(b.quantity) })),
        }),
    );
    Ok(Revealed {
        tx_id: tx,
        pool,
        energy_delta,
        money_delta,
        bid,
    })
}
