use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::scenario::Scenario;
use super::SimError;
use crate::adversary::{
    run_arbitrage, run_frontrun, run_sandwich, sandwich_profit, AttackReport, Mode, SizeRange, Trials,
};
use crate::amm::{pool_init, Order, Rational, Side};
use crate::balance_proof::Proof;
use crate::keccak::keccak256_concat;
use crate::ledger::{
    fail_region, produce_block, rebalance_shards, recover_region, select_committee, Committee, GeoPoint,
    Mempool, MempoolEntry, MasterchainState, Peer, PeerRegistry, Rebalance, ShardDescriptor, Workchain, Zone,
};
use crate::mpc::{AdditiveShare, RoundLog, Session, SessionConfig};
use crate::protocol::{
    account_address, admit_submission, format_units, parse_amount, prepare_order, reveal_and_settle, run_init_phase,
    run_trading_phase, to_rational, Crypto, FixedPool, LpInput, OrderInput, PendingSettlement, PreparedOrder,
    ProtocolError, RunLog, Token, TradeOutcome,
};
use crate::state_trie::{
    check_freshness, encode_account_leaf, verify_account_proof, AccountLeaf, BlockHeader, Chain, MptProof, Trie, U256,
};

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRow {
    pub tick: u64,
    pub shard_id: String,
    pub tx_count: u64,
    pub blocks: u64,
    pub anchors: u64,
    pub adversary_profit: String,
}

/// One row of `anchors.csv`: the anchor table as sealed into a masterchain
/// block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorRow {
    pub masterchain_height: u64,
    pub shard_id: String,
    pub shard_height: u64,
    pub head_hash: String,
    pub stale: bool,
}

/// One line of `proofs.jsonl`: an admitted balance proof and the account
/// proof it was checked against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProofRecord {
    pub kind: String,
    pub shard: String,
    pub owner: String,
    pub token: Token,
    pub threshold: String,
    pub balance_proof: Proof,
    pub account_proof: MptProof,
}

/// A shard chain as written to `chain.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShardChainRecord {
    pub shard_id: String,
    pub parents: Vec<String>,
    pub headers: Vec<BlockHeader>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainsFile {
    pub masterchain: Vec<BlockHeader>,
    pub shards: Vec<ShardChainRecord>,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: Vec<MetricRow>,
    pub reports: Vec<AttackReport>,
    pub log: RunLog,
    pub summary: Value,
    pub chains: ChainsFile,
    pub anchors: Vec<AnchorRow>,
    pub proofs: Vec<ProofRecord>,
    /// Blocks produced per shard id, summed over every instance of the id.
    pub blocks: BTreeMap<String, u64>,
    pub final_pools: BTreeMap<String, Option<FixedPool>>,
    pub live_shards: Vec<String>,
}

fn derive_seed(seed: u64, label: &str) -> u64 {
    let d = keccak256_concat([&b"gridswap/seed"[..], &seed.to_be_bytes(), label.as_bytes()]);
    u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
}

fn rng_for(seed: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive_seed(seed, label))
}

fn peer_key(seed: u64, id: &str) -> [u8; 32] {
    keccak256_concat([&b"gridswap/peer-key"[..], &seed.to_be_bytes(), id.as_bytes()])
}

fn amount(s: &str) -> u128 {
    parse_amount(s).expect("validated scenario amount")
}

fn add_logs(a: RoundLog, b: RoundLog) -> RoundLog {
    RoundLog {
        offline_rounds: a.offline_rounds + b.offline_rounds,
        offline_messages: a.offline_messages + b.offline_messages,
        online_rounds: a.online_rounds + b.online_rounds,
        messages: a.messages + b.messages,
        openings: a.openings + b.openings,
        elapsed_micros: a.elapsed_micros + b.elapsed_micros,
    }
}

fn pool_json(p: Option<FixedPool>) -> Value {
    p.map_or(Value::Null, |p| json!({ "e": format_units(p.e), "m": format_units(p.m) }))
}

fn signed_units(v: i128) -> String {
    let sign = if v < 0 { "-" } else { "" };
    format!("{sign}{}", format_units(v.unsigned_abs()))
}

struct ShardRuntime {
    desc: ShardDescriptor,
    parents: Vec<String>,
    chain: Chain,
    /// State trie at each finalized height.
    tries: BTreeMap<u64, Trie>,
    working: Trie,
    session: Session,
    rng: ChaCha20Rng,
    pool: Option<FixedPool>,
    initialized: bool,
    lp_shares: BTreeMap<String, Vec<AdditiveShare>>,
    mempool: Mempool,
    committee: Option<Committee>,
    awaiting_reveal: Option<PendingSettlement>,
    blocks: u64,
    anchors: u64,
    adversary_profit: i128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct PendingOrder {
    index: usize,
    tx_id: u64,
}

#[derive(Default)]
struct Counters {
    submitted: u64,
    settled: u64,
    voided: u64,
    withdrawn: u64,
    rejected: u64,
    requeued: u64,
}

struct Sim<'a> {
    sc: &'a Scenario,
    crypto: Crypto,
    registry: PeerRegistry,
    tx_per_block: BTreeMap<String, u64>,
    shards: BTreeMap<String, ShardRuntime>,
    retired: Vec<ShardChainRecord>,
    retired_mpc: RoundLog,
    master: MasterchainState,
    log: RunLog,
    pending: Vec<PendingOrder>,
    prepared: BTreeMap<u64, PreparedOrder>,
    metrics: Vec<MetricRow>,
    anchor_rows: Vec<AnchorRow>,
    proofs: Vec<ProofRecord>,
    shard_events: Vec<Value>,
    blocks: BTreeMap<String, u64>,
    counters: Counters,
    lock: u128,
}

/// Runs `scenario` end to end and returns every artifact in memory.
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput, SimError> {
    sc.validate()?;
    let crypto = Crypto::setup(&sc.seed.to_be_bytes()).map_err(|e| SimError::Config(e.to_string()))?;
    let mut sim = Sim::new(sc, crypto)?;
    for tick in 0..=sc.duration_ticks {
        sim.step(tick)?;
    }
    sim.finish()
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario, crypto: Crypto) -> Result<Self, SimError> {
        let mut registry = PeerRegistry::new();
        let mut tx_per_block = BTreeMap::new();
        for p in &sc.peers {
            registry
                .register_peer(Peer {
                    id: p.id.clone(),
                    location: p.location(),
                    key: peer_key(sc.seed, &p.id),
                    validator: p.validator,
                })
                .map_err(|e| SimError::Config(e.to_string()))?;
            tx_per_block.insert(p.id.clone(), p.tx_per_block);
        }
        let workchains = sc
            .workchains
            .iter()
            .map(|w| Workchain {
                id: w.id,
                name: w.name.clone(),
                zone: w.zone.zone().expect("validated zone"),
            })
            .collect();
        let mut sim = Sim {
            sc,
            crypto,
            registry,
            tx_per_block,
            shards: BTreeMap::new(),
            retired: Vec::new(),
            retired_mpc: RoundLog::default(),
            master: MasterchainState::new(workchains, 0),
            log: RunLog::default(),
            pending: Vec::new(),
            prepared: BTreeMap::new(),
            metrics: Vec::new(),
            anchor_rows: Vec::new(),
            proofs: Vec::new(),
            shard_events: Vec::new(),
            blocks: BTreeMap::new(),
            counters: Counters::default(),
            lock: amount(&sc.trading.lock),
        };
        let mut genesis_accounts = Trie::new();
        for p in &sc.peers {
            for (token, bal) in [(Token::Energy, &p.energy), (Token::Money, &p.money)] {
                let balance = U256::from_u128(bal.as_deref().map(amount).unwrap_or(0));
                let leaf = AccountLeaf {
                    nonce: 1,
                    balance,
                    ..AccountLeaf::default()
                };
                genesis_accounts
                    .insert(&account_address(&p.id, token), &leaf)
                    .map_err(|e| SimError::Config(e.to_string()))?;
            }
        }
        for w in &sc.workchains {
            let zone = w.zone.zone().expect("validated zone");
            let layout: Vec<(String, Zone)> = if w.shards.is_empty() {
                vec![(w.name.clone(), zone)]
            } else {
                w.shards.iter().map(|s| (s.name.clone(), s.zone.zone().expect("validated zone"))).collect()
            };
            for (id, zone) in layout {
                let desc = ShardDescriptor::new(id.clone(), w.id, zone, &sim.registry);
                let needed = 3 * sc.consensus.f + 1;
                if desc.validators.len() < needed {
                    return Err(SimError::Config(format!(
                        "shard {id}: need {needed} validators, zone holds {}",
                        desc.validators.len()
                    )));
                }
                let trie = sim.accounts_in(&genesis_accounts, &zone);
                let chain = Chain::new(BlockHeader::genesis(0, trie.root()));
                sim.add_shard(desc, Vec::new(), chain, trie, None, false, BTreeMap::new())?;
            }
        }
        for (i, lp) in sc.lps.iter().enumerate() {
            let loc = sim.location(&lp.peer);
            if !sim.shards.values().any(|s| s.desc.zone.contains(&loc)) {
                return Err(SimError::Config(format!("lps[{i}].peer: `{}` lies outside every shard", lp.peer)));
            }
        }
        Ok(sim)
    }

    fn location(&self, peer: &str) -> GeoPoint {
        self.registry.get(peer).expect("validated peer").location
    }

    /// Copies the accounts of peers located in `zone`.
    fn accounts_in(&self, source: &Trie, zone: &Zone) -> Trie {
        let mut out = Trie::new();
        for p in self.registry.in_zone(zone) {
            for token in [Token::Energy, Token::Money] {
                let addr = account_address(&p.id, token);
                if let Some(leaf) = source.get(&addr) {
                    out.insert(&addr, &leaf).expect("leaf was encodable");
                }
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn add_shard(
        &mut self,
        desc: ShardDescriptor,
        parents: Vec<String>,
        chain: Chain,
        trie: Trie,
        pool: Option<FixedPool>,
        initialized: bool,
        lp_shares: BTreeMap<String, Vec<AdditiveShare>>,
    ) -> Result<(), SimError> {
        let id = desc.shard_id.clone();
        let field = self.crypto.field();
        let mut cfg = SessionConfig::new(self.sc.mpc.parties, field)
            .with_executor(self.sc.mpc.executor)
            .with_latency(self.sc.mpc.latency, derive_seed(self.sc.seed, &format!("latency/{id}")));
        cfg.modulus = field.modulus();
        let session = Session::new(cfg).map_err(|e| SimError::Config(e.to_string()))?;
        let mut tries = BTreeMap::new();
        tries.insert(chain.tip().height, trie.clone());
        let rt = ShardRuntime {
            desc,
            parents,
            rng: rng_for(self.sc.seed, &format!("shard/{id}/{}", chain.tip().height)),
            chain,
            tries,
            working: trie,
            session,
            pool,
            initialized,
            lp_shares,
            mempool: Mempool::new(),
            committee: None,
            awaiting_reveal: None,
            blocks: 0,
            anchors: 0,
            adversary_profit: 0,
        };
        self.shards.insert(id, rt);
        Ok(())
    }

    fn step(&mut self, tick: u64) -> Result<(), SimError> {
        self.apply_failures(tick);
        for (index, t) in self.sc.trades.iter().enumerate() {
            if t.tick == tick {
                self.pending.push(PendingOrder {
                    index,
                    tx_id: index as u64,
                });
            }
        }
        self.submit_pending(tick)?;
        if tick > 0 && tick.is_multiple_of(self.sc.consensus.block_interval) {
            self.block_round(tick)?;
        }
        Ok(())
    }

    fn apply_failures(&mut self, tick: u64) {
        for f in &self.sc.failures {
            let region = f.zone.zone().expect("validated zone");
            let mut descs: BTreeMap<String, ShardDescriptor> =
                self.shards.iter().map(|(k, v)| (k.clone(), v.desc.clone())).collect();
            let (changed, event) = if f.start_tick == tick {
                (fail_region(&mut descs, &region), "region_failed")
            } else if f.end_tick == Some(tick) {
                (recover_region(&mut descs, &region), "region_recovered")
            } else {
                continue;
            };
            for id in &changed {
                let rt = self.shards.get_mut(id).expect("known shard");
                rt.desc.failed = descs[id].failed;
            }
            if !changed.is_empty() {
                self.log.push(tick, "ledger", event, json!({ "shards": changed }));
                self.shard_events.push(json!({ "tick": tick, "kind": event, "shards": changed }));
            }
        }
    }

    fn shard_of(&self, peer: &str) -> Option<String> {
        let loc = self.location(peer);
        self.shards.values().find(|s| s.desc.zone.contains(&loc)).map(|s| s.desc.shard_id.clone())
    }

    /// The trader's order against the newest confirmed state, or `None` while
    /// no confirmed block is fresh enough to prove against.
    fn order_input(&self, shard: &ShardRuntime, p: PendingOrder, tick: u64) -> Result<Option<OrderInput>, SimError> {
        let t = &self.sc.trades[p.index];
        let n = self.sc.freshness.confirmations;
        let tip = shard.chain.tip();
        let Some(height) = tip.height.checked_sub(n) else {
            return Ok(None);
        };
        let (Some(header), Some(trie)) = (shard.chain.get(height), shard.tries.get(&height)) else {
            return Ok(None);
        };
        if tick.saturating_sub(header.timestamp) > self.sc.freshness.window {
            return Ok(None);
        }
        let token = match t.side {
            Side::Buy => Token::Money,
            Side::Sell => Token::Energy,
        };
        let addr = account_address(&t.trader, token);
        let Some(leaf) = trie.get(&addr) else {
            return Ok(None);
        };
        let account_proof = trie
            .prove_account(&addr)
            .map_err(|e| SimError::Invariant(e.to_string()))?
            .at_block(height, header.header_hash);
        Ok(Some(OrderInput {
            tx_id: p.tx_id,
            trader: t.trader.clone(),
            side: t.side,
            quantity: amount(&t.quantity),
            limit: t.limit.as_deref().map(|l| to_rational(amount(l))),
            lock: self.lock,
            leaf: encode_account_leaf(&leaf).map_err(|e| SimError::Invariant(e.to_string()))?,
            account_proof,
        }))
    }

    fn submit_pending(&mut self, tick: u64) -> Result<(), SimError> {
        let pending = std::mem::take(&mut self.pending);
        for p in pending {
            let trader = self.sc.trades[p.index].trader.clone();
            let Some(shard_id) = self.shard_of(&trader) else {
                self.pending.push(p);
                continue;
            };
            let shard = &self.shards[&shard_id];
            if shard.desc.failed || shard.pool.is_none() {
                self.pending.push(p);
                continue;
            }
            let Some(input) = self.order_input(shard, p, tick)? else {
                self.pending.push(p);
                continue;
            };
            let mut rng = rng_for(self.sc.seed, &format!("order/{}/{tick}", p.tx_id));
            let prepared = match prepare_order(&self.crypto, self.sc.mpc.parties, &input, &mut rng) {
                Ok(prep) => prep,
                Err(e @ (ProtocolError::Proof(_) | ProtocolError::Amount(_))) => {
                    self.counters.rejected += 1;
                    self.log.push(tick, &trader, "order_rejected", json!({ "tx": p.tx_id, "reason": e.to_string() }));
                    continue;
                }
                Err(e) => return Err(SimError::Invariant(e.to_string())),
            };
            let sub = &prepared.submission;
            let entry = MempoolEntry {
                tx_id: sub.tx_id,
                sender: sub.trader.clone(),
                commitment: sub.commitment.clone(),
                share_commitments: sub.share_commitments.clone(),
                balance_proof: sub.balance_proof.clone(),
                account_proof: sub.account_proof.clone(),
                arrival_tick: tick,
            };
            let token = match prepared.side {
                Side::Buy => Token::Money,
                Side::Sell => Token::Energy,
            };
            let expected = account_address(&trader, token);
            let fresh = &self.sc.freshness;
            let shard = self.shards.get_mut(&shard_id).expect("known shard");
            let crypto = &self.crypto;
            let lock = self.lock;
            let chain = &shard.chain;
            let admitted = shard.mempool.submit_tx(entry, |e| {
                admit_submission(crypto, &e.balance_proof, &e.account_proof, lock, |proof| {
                    check_account(chain, proof, &expected, fresh.confirmations, fresh.window, tick)
                })
            });
            match admitted {
                Ok(_) => {
                    self.counters.submitted += 1;
                    let observed = shard.mempool.observer_view().into_iter().find(|o| o.tx_id == p.tx_id);
                    self.log.push(tick, &shard_id, "order_submitted", json!({ "observed": observed }));
                    self.proofs.push(ProofRecord {
                        kind: "order".into(),
                        shard: shard_id.clone(),
                        owner: trader.clone(),
                        token,
                        threshold: lock.to_string(),
                        balance_proof: prepared.submission.balance_proof.clone(),
                        account_proof: prepared.submission.account_proof.clone(),
                    });
                    self.prepared.insert(p.tx_id, prepared);
                }
                Err(e) => {
                    self.counters.rejected += 1;
                    self.log.push(tick, &trader, "order_rejected", json!({ "tx": p.tx_id, "reason": e.to_string() }));
                }
            }
        }
        Ok(())
    }

    fn background_load(&self, zone: &Zone, tick: u64) -> u64 {
        self.registry
            .in_zone(zone)
            .map(|p| {
                self.sc
                    .load_surges
                    .iter()
                    .rev()
                    .find(|s| {
                        s.start_tick <= tick
                            && tick < s.end_tick
                            && s.zone.zone().is_some_and(|z| z.contains(&p.location))
                    })
                    .map(|s| s.tx_per_block)
                    .unwrap_or(self.tx_per_block[&p.id])
            })
            .sum()
    }

    fn init_shard(&mut self, shard_id: &str, tick: u64) -> Result<(), SimError> {
        let n = self.sc.freshness.confirmations;
        let shard = &self.shards[shard_id];
        let Some(height) = shard.chain.tip().height.checked_sub(n) else {
            return Ok(());
        };
        let header = shard.chain.get(height).expect("height on chain").clone();
        let trie = shard.tries[&height].clone();
        let zone = shard.desc.zone;
        let mut inputs = Vec::new();
        for lp in &self.sc.lps {
            if !zone.contains(&self.location(&lp.peer)) {
                continue;
            }
            let addr = account_address(&lp.peer, Token::Energy);
            let leaf = trie.get(&addr).unwrap_or_default();
            let account_proof = trie
                .prove_account(&addr)
                .map_err(|e| SimError::Invariant(e.to_string()))?
                .at_block(height, header.header_hash);
            inputs.push(LpInput {
                lp_id: lp.peer.clone(),
                liquidity: amount(&lp.liquidity),
                leaf: encode_account_leaf(&leaf).map_err(|e| SimError::Invariant(e.to_string()))?,
                account_proof,
            });
        }
        let m_reserve = self
            .sc
            .workchains
            .iter()
            .find(|w| w.id == shard.desc.workchain_id)
            .map(|w| amount(&w.m_reserve))
            .expect("shard belongs to a workchain");
        let threshold = amount(&self.sc.lp_threshold);
        let fresh = self.sc.freshness.clone();
        let shard = self.shards.get_mut(shard_id).expect("known shard");
        let chain = &shard.chain;
        let checker = |lp: &str, proof: &MptProof| {
            check_account(chain, proof, &account_address(lp, Token::Energy), fresh.confirmations, fresh.window, tick)
        };
        let outcome = run_init_phase(
            &self.crypto,
            &mut shard.session,
            &inputs,
            threshold,
            m_reserve,
            checker,
            &mut self.log,
            tick,
            &mut shard.rng,
        )
        .map_err(|e| SimError::Invariant(e.to_string()))?;
        for sub in &outcome.submissions {
            if outcome.accepted.contains(&sub.lp_id) {
                self.proofs.push(ProofRecord {
                    kind: "lp".into(),
                    shard: shard_id.to_string(),
                    owner: sub.lp_id.clone(),
                    token: Token::Energy,
                    threshold: threshold.to_string(),
                    balance_proof: sub.balance_proof.clone(),
                    account_proof: sub.account_proof.clone(),
                });
            }
        }
        if let Some(p) = outcome.pool {
            self.log.push(
                tick,
                shard_id,
                "pool_published",
                json!({ "cause": "opened", "e": format_units(p.e), "m": format_units(p.m) }),
            );
        }
        shard.pool = outcome.pool;
        shard.lp_shares = outcome.lp_shares;
        shard.initialized = true;
        Ok(())
    }

    fn block_round(&mut self, tick: u64) -> Result<(), SimError> {
        let ids: Vec<String> = self.shards.keys().cloned().collect();
        let mut loads = BTreeMap::new();
        for id in &ids {
            if self.shards[id].desc.failed {
                loads.insert(id.clone(), 0);
                continue;
            }
            if !self.shards[id].initialized {
                self.init_shard(id, tick)?;
            }
            let settled = self.settle_next(id, tick)?;
            let load = self.background_load(&self.shards[id].desc.zone, tick) + u64::from(settled);
            let window = self.sc.thresholds.window_blocks;
            let shard = self.shards.get_mut(id).expect("known shard");
            shard.desc.record_load(load, window);
            loads.insert(id.clone(), load);
            self.produce(id, tick)?;
        }
        self.anchor_round(tick)?;
        for id in &ids {
            let s = &self.shards[id];
            self.metrics.push(MetricRow {
                tick,
                shard_id: id.clone(),
                tx_count: loads[id],
                blocks: s.blocks,
                anchors: s.anchors,
                adversary_profit: signed_units(s.adversary_profit),
            });
        }
        self.rebalance(tick)
    }

    /// Runs the committee protocol on the oldest admitted order. Returns
    /// whether a trade settled.
    fn settle_next(&mut self, id: &str, tick: u64) -> Result<bool, SimError> {
        let shard = self.shards.get_mut(id).expect("known shard");
        let Some(pool) = shard.pool else {
            return Ok(false);
        };
        if shard.awaiting_reveal.is_some() {
            return Ok(false);
        }
        let Some(entry) = shard.mempool.pop_next() else {
            return Ok(false);
        };
        let prepared = self.prepared.remove(&entry.tx_id).expect("trader kept its order");
        let outcome = run_trading_phase(
            &self.crypto,
            &mut shard.session,
            pool,
            &prepared,
            &mut self.log,
            tick,
            &mut shard.rng,
        )
        .map_err(|e| SimError::Invariant(e.to_string()))?;
        Ok(match outcome {
            TradeOutcome::Settled(p) => {
                shard.awaiting_reveal = Some(p);
                self.prepared.insert(entry.tx_id, prepared);
                true
            }
            TradeOutcome::Voided { .. } => {
                self.counters.voided += 1;
                false
            }
            TradeOutcome::Withdrawn { .. } => {
                self.counters.withdrawn += 1;
                false
            }
        })
    }

    fn produce(&mut self, id: &str, tick: u64) -> Result<(), SimError> {
        let f = self.sc.consensus.f;
        let epoch_blocks = self.sc.consensus.epoch_blocks;
        let seed = self.sc.seed;
        let shard = self.shards.get_mut(id).expect("known shard");
        let epoch = shard.chain.tip().height / epoch_blocks;
        if shard.committee.as_ref().is_none_or(|c| c.epoch != epoch) {
            let c = select_committee(&shard.desc.validators, f, epoch, seed, id)
                .map_err(|e| SimError::Invariant(format!("shard {id}: {e}")))?;
            shard.committee = Some(c);
        }
        let committee = shard.committee.as_ref().expect("committee selected");
        let failed = shard.desc.failed;
        let header = produce_block(&mut shard.chain, committee, &self.registry, shard.working.root(), tick, |_| !failed)
            .map_err(|e| SimError::Invariant(e.to_string()))?;
        let Some(header) = header else {
            return Ok(());
        };
        shard.tries.insert(header.height, shard.working.clone());
        shard.blocks += 1;
        *self.blocks.entry(id.to_string()).or_default() += 1;
        self.log.push(
            tick,
            id,
            "block_finalized",
            json!({ "height": header.height, "hash": crate::hexser::encode(&header.header_hash) }),
        );
        if let Some(pending) = shard.awaiting_reveal.take() {
            self.reveal(id, &pending, tick)?;
        }
        Ok(())
    }

    fn reveal(&mut self, id: &str, pending: &PendingSettlement, tick: u64) -> Result<(), SimError> {
        let reveal_bids = self.sc.trading.reveal_bids;
        let shard = self.shards.get_mut(id).expect("known shard");
        let revealed = reveal_and_settle(&self.crypto, &mut shard.session, pending, true, reveal_bids, &mut self.log, tick)
            .map_err(|e| SimError::Invariant(e.to_string()))?;
        let before = pending.pool_before;
        let after = revealed.pool;
        let c_after = after.c();
        if c_after < before.c() || c_after >= before.c() + after.e + after.m {
            return Err(SimError::Invariant(format!(
                "constant product: tx {} moved C from {} to {c_after}",
                pending.tx_id,
                before.c()
            )));
        }
        shard.pool = Some(after);
        for (token, delta) in [(Token::Energy, revealed.energy_delta), (Token::Money, revealed.money_delta)] {
            let addr = account_address(&pending.trader, token);
            let mut leaf = shard.working.get(&addr).unwrap_or(AccountLeaf {
                nonce: 1,
                ..AccountLeaf::default()
            });
            let bal = leaf.balance.to_u128().ok_or_else(|| SimError::Invariant("balance overflow".into()))?;
            let next = bal
                .checked_add_signed(delta)
                .ok_or_else(|| SimError::Invariant(format!("balance underflow: {} on tx {}", pending.trader, pending.tx_id)))?;
            leaf.balance = U256::from_u128(next);
            shard.working.insert(&addr, &leaf).map_err(|e| SimError::Invariant(e.to_string()))?;
        }
        self.counters.settled += 1;
        let prepared = self.prepared.remove(&pending.tx_id).expect("trader kept its order");
        let profit = self.shadow_profit(&before, &prepared)?;
        let shard = self.shards.get_mut(id).expect("known shard");
        shard.adversary_profit += profit;
        self.log.push(
            tick,
            id,
            "pool_published",
            json!({ "cause": "trade", "tx": pending.tx_id, "e": format_units(after.e), "m": format_units(after.m) }),
        );
        Ok(())
    }

    /// What the in-simulation attacker would have made around this trade,
    /// in fixed-point units rounded down. Evaluated on the exact pool and
    /// never applied to the ledger.
    fn shadow_profit(&self, before: &FixedPool, order: &PreparedOrder) -> Result<i128, SimError> {
        let adv = &self.sc.adversary;
        let pool = pool_init(to_rational(before.e), to_rational(before.m)).map_err(|e| SimError::Invariant(e.to_string()))?;
        let victim = Order {
            side: order.side,
            quantity_e: to_rational(order.quantity),
            limit_rate: order.limit.clone().unwrap_or_else(|| match order.side {
                Side::Buy => to_rational(u128::from(u64::MAX)),
                Side::Sell => to_rational(0),
            }),
            trader_id: order.submission.trader.clone(),
        };
        let (side, size, slot) = match adv.mempool {
            Mode::Plaintext => (order.side, to_rational(amount(&adv.attacker_size)), 1),
            Mode::Committed => {
                let mut rng = rng_for(self.sc.seed, &format!("shadow/{}", order.submission.tx_id));
                let side = if rng.gen_bool(0.5) { Side::Buy } else { Side::Sell };
                let size = victim_range(adv).sample_units(&mut rng);
                (side, to_rational(size), rng.gen_range(0..3u8))
            }
        };
        if &size >= pool.e() {
            return Ok(0);
        }
        let p = sandwich_profit(&pool, Some(&victim), side, &size, slot).map_err(|e| SimError::Invariant(e.to_string()))?;
        let units = (p * Rational::from(num_bigint::BigInt::from(crate::protocol::SCALE))).floor().to_integer();
        Ok(i128::try_from(units).unwrap_or(0))
    }

    fn anchor_round(&mut self, tick: u64) -> Result<(), SimError> {
        for (id, s) in self.shards.iter_mut() {
            if s.desc.failed {
                self.master.mark_stale(id);
            } else {
                self.master
                    .anchor_to_masterchain(id, &s.chain, s.chain.tip())
                    .map_err(|e| SimError::Invariant(e.to_string()))?;
                s.anchors += 1;
            }
        }
        let sealed = self.master.seal(tick).map_err(|e| SimError::Invariant(e.to_string()))?;
        for (id, a) in self.master.anchors() {
            if let Some(s) = self.shards.get(id) {
                if !s.desc.failed && a.stale {
                    return Err(SimError::Invariant(format!("anchor completeness: live shard {id} is stale")));
                }
            }
            self.anchor_rows.push(AnchorRow {
                masterchain_height: sealed.height,
                shard_id: id.clone(),
                shard_height: a.shard_height,
                head_hash: crate::hexser::encode(&a.head_hash),
                stale: a.stale,
            });
        }
        for id in self.shards.keys() {
            if !self.master.anchors().contains_key(id) && !self.shards[id].desc.failed {
                return Err(SimError::Invariant(format!("anchor completeness: live shard {id} has no anchor")));
            }
        }
        Ok(())
    }

    fn retire(&mut self, id: &str) -> ShardRuntime {
        let rt = self.shards.remove(id).expect("known shard");
        self.master.retire(id);
        self.retired.push(ShardChainRecord {
            shard_id: id.to_string(),
            parents: rt.parents.clone(),
            headers: rt.chain.headers().to_vec(),
        });
        self.retired_mpc = add_logs(self.retired_mpc, rt.session.log());
        rt
    }

    fn requeue(&mut self, mut rt_mempool: Mempool, tick: u64) {
        for e in rt_mempool.drain() {
            self.prepared.remove(&e.tx_id);
            self.counters.requeued += 1;
            self.log.push(tick, "ledger", "order_requeued", json!({ "tx": e.tx_id }));
            self.pending.push(PendingOrder {
                index: e.tx_id as usize,
                tx_id: e.tx_id,
            });
        }
        self.pending.sort_by_key(|p| p.tx_id);
    }

    fn rebalance(&mut self, tick: u64) -> Result<(), SimError> {
        let descs: BTreeMap<String, ShardDescriptor> =
            self.shards.iter().map(|(k, v)| (k.clone(), v.desc.clone())).collect();
        let plan = rebalance_shards(&descs, &self.registry, self.sc.consensus.f, &self.sc.thresholds);
        for action in plan {
            match action {
                Rebalance::Split { shard_id, children } => self.split(&shard_id, children, tick)?,
                Rebalance::Merge {
                    children,
                    shard_id,
                    zone,
                } => self.merge(children, &shard_id, zone, tick)?,
            }
        }
        Ok(())
    }

    fn split(&mut self, id: &str, children: [(String, Zone); 2], tick: u64) -> Result<(), SimError> {
        let parent_zone = self.shards[id].desc.zone;
        crate::ledger::audit_partition(&parent_zone, &[children[0].1, children[1].1])
            .map_err(|e| SimError::Invariant(format!("zone partition: {e}")))?;
        // liquidity weights: secure sums of each half's provider shares
        let mut weights = [0u128; 2];
        let mut shares: [BTreeMap<String, Vec<AdditiveShare>>; 2] = Default::default();
        for (lp, s) in &self.shards[id].lp_shares {
            let loc = self.location(lp);
            let side = usize::from(!children[0].1.contains(&loc));
            shares[side].insert(lp.clone(), s.clone());
        }
        for (w, group) in weights.iter_mut().zip(&shares) {
            if !group.is_empty() {
                let matrix: Vec<Vec<AdditiveShare>> = group.values().cloned().collect();
                let session = &mut self.shards.get_mut(id).expect("known shard").session;
                *w = session.secure_sum(&matrix).map_err(|e| SimError::Invariant(e.to_string()))?.value();
            }
        }
        let mut parent = self.retire(id);
        let total = weights[0] + weights[1];
        let pools: [Option<FixedPool>; 2] = match parent.pool {
            Some(p) if total > 0 => {
                let e0 = p.e * weights[0] / total;
                let m0 = p.m * weights[0] / total;
                let (e1, m1) = (p.e - e0, p.m - m0);
                if e0 + e1 != p.e || m0 + m1 != p.m {
                    return Err(SimError::Invariant(format!("liquidity conservation: split of {id}")));
                }
                let modulus = self.crypto.field().modulus();
                [FixedPool::new(e0, m0, modulus).ok(), FixedPool::new(e1, m1, modulus).ok()]
            }
            _ => [None, None],
        };
        let conserved_e: u128 = pools.iter().flatten().map(|p| p.e).sum();
        let conserved_m: u128 = pools.iter().flatten().map(|p| p.m).sum();
        if let Some(p) = parent.pool {
            if pools.iter().all(Option::is_some) && (conserved_e != p.e || conserved_m != p.m) {
                return Err(SimError::Invariant(format!("liquidity conservation: split of {id}")));
            }
        }
        let tip = parent.chain.tip().clone();
        let mut described = Vec::new();
        for (((child_id, zone), pool), lp_shares) in children.into_iter().zip(pools).zip(shares) {
            let trie = self.accounts_in(&parent.working, &zone);
            let genesis = BlockHeader::new(tip.height + 1, tip.header_hash, tick, trie.root());
            let mut desc = ShardDescriptor::new(child_id.clone(), parent.desc.workchain_id, zone, &self.registry);
            desc.failed = false;
            described.push(json!({
                "id": child_id,
                "zone": zone,
                "pool": pool_json(pool),
            }));
            self.add_shard(desc, vec![id.to_string()], Chain::new(genesis), trie, pool, true, lp_shares)?;
        }
        let event = json!({
            "parent": id,
            "pool": pool_json(parent.pool),
            "children": described,
        });
        self.log.push(tick, "ledger", "shard_split", event.clone());
        let mut e = event;
        e["tick"] = json!(tick);
        e["kind"] = json!("split");
        self.shard_events.push(e);
        let mempool = std::mem::take(&mut parent.mempool);
        self.requeue(mempool, tick);
        Ok(())
    }

    fn merge(&mut self, children: [String; 2], id: &str, zone: Zone, tick: u64) -> Result<(), SimError> {
        let a = self.retire(&children[0]);
        let b = self.retire(&children[1]);
        let pool = match (a.pool, b.pool) {
            (Some(x), Some(y)) => Some(
                FixedPool::new(x.e + y.e, x.m + y.m, self.crypto.field().modulus())
                    .map_err(|e| SimError::Invariant(format!("liquidity conservation: {e}")))?,
            ),
            (x, y) => x.or(y),
        };
        let mut trie = a.working.clone();
        for p in self.registry.in_zone(&b.desc.zone) {
            for token in [Token::Energy, Token::Money] {
                let addr = account_address(&p.id, token);
                if let Some(leaf) = b.working.get(&addr) {
                    trie.insert(&addr, &leaf).map_err(|e| SimError::Invariant(e.to_string()))?;
                }
            }
        }
        let height = a.chain.tip().height.max(b.chain.tip().height) + 1;
        let genesis = BlockHeader::new(height, a.chain.tip().header_hash, tick, trie.root());
        let mut lp_shares = a.lp_shares.clone();
        lp_shares.extend(b.lp_shares.clone());
        let desc = ShardDescriptor::new(id.to_string(), a.desc.workchain_id, zone, &self.registry);
        self.add_shard(desc, children.to_vec(), Chain::new(genesis), trie, pool, true, lp_shares)?;
        let event = json!({
            "children": children,
            "shard": id,
            "pools": [pool_json(a.pool), pool_json(b.pool)],
            "pool": pool_json(pool),
        });
        self.log.push(tick, "ledger", "shard_merged", event.clone());
        let mut e = event;
        e["tick"] = json!(tick);
        e["kind"] = json!("merge");
        self.shard_events.push(e);
        self.requeue(a.mempool, tick);
        self.requeue(b.mempool, tick);
        Ok(())
    }

    fn attack_reports(&self) -> Result<Vec<AttackReport>, SimError> {
        let adv = &self.sc.adversary;
        let rat = |s: &str| to_rational(amount(s));
        let inv = |e: crate::amm::AmmError| SimError::Invariant(e.to_string());
        let pool = pool_init(rat(&adv.pool[0]), rat(&adv.pool[1])).map_err(inv)?;
        let victim = Order {
            side: adv.victim.side,
            quantity_e: rat(&adv.victim.quantity),
            limit_rate: match adv.victim.side {
                Side::Buy => to_rational(u128::from(u64::MAX)),
                Side::Sell => to_rational(0),
            },
            trader_id: "victim".into(),
        };
        let trials = Trials {
            count: adv.trials,
            seed: derive_seed(self.sc.seed, "attacks"),
            range: SizeRange {
                min: rat(&adv.victim_range[0]),
                max: rat(&adv.victim_range[1]),
                resolution: crate::protocol::SCALE as u64,
            },
        };
        let size = rat(&adv.attacker_size);
        let a = pool_init(rat(&adv.arbitrage[0][0]), rat(&adv.arbitrage[0][1])).map_err(inv)?;
        let b = pool_init(rat(&adv.arbitrage[1][0]), rat(&adv.arbitrage[1][1])).map_err(inv)?;
        let mut out = Vec::new();
        for mode in [Mode::Plaintext, Mode::Committed] {
            out.push(run_frontrun(&pool, Some(&victim), &size, mode, &trials).map_err(inv)?);
            out.push(run_sandwich(&pool, Some(&victim), &size, mode, &trials).map_err(inv)?);
            out.push(run_arbitrage(&a, &b, mode).map_err(inv)?);
        }
        out.sort_by_key(|r| (r.strategy, r.mode));
        Ok(out)
    }

    fn finish(mut self) -> Result<RunOutput, SimError> {
        let end = self.sc.duration_ticks;
        for p in std::mem::take(&mut self.pending) {
            self.log.push(end, "ledger", "order_expired", json!({ "tx": p.tx_id }));
        }
        let reports = self.attack_reports()?;
        let mut mpc = self.retired_mpc;
        for s in self.shards.values() {
            mpc = add_logs(mpc, s.session.log());
        }
        let mut shards_json = serde_json::Map::new();
        let mut final_pools = BTreeMap::new();
        for (id, s) in &self.shards {
            final_pools.insert(id.clone(), s.pool);
            shards_json.insert(
                id.clone(),
                json!({
                    "zone": s.desc.zone,
                    "height": s.chain.tip().height,
                    "blocks": s.blocks,
                    "anchors": s.anchors,
                    "failed": s.desc.failed,
                    "pool": pool_json(s.pool),
                    "adversaryProfit": signed_units(s.adversary_profit),
                }),
            );
        }
        let c = &self.counters;
        let throughput = Rational::new(
            num_bigint::BigInt::from(c.settled),
            num_bigint::BigInt::from(end.max(1)),
        );
        let summary = json!({
            "seed": self.sc.seed,
            "ticks": end,
            "verifyingKey": crate::hexser::encode(&self.crypto.vk.to_bytes()),
            "trades": {
                "scheduled": self.sc.trades.len(),
                "submitted": c.submitted,
                "settled": c.settled,
                "voided": c.voided,
                "withdrawn": c.withdrawn,
                "rejected": c.rejected,
                "requeued": c.requeued,
            },
            "throughputPerTick": crate::amm::format_rational(&throughput),
            "mpc": mpc,
            "masterchainHeight": self.master.chain().tip().height,
            "shards": shards_json,
            "shardEvents": self.shard_events,
        });
        let mut chains = self.retired.clone();
        for (id, s) in &self.shards {
            chains.push(ShardChainRecord {
                shard_id: id.clone(),
                parents: s.parents.clone(),
                headers: s.chain.headers().to_vec(),
            });
        }
        Ok(RunOutput {
            metrics: self.metrics,
            reports,
            log: self.log,
            summary,
            chains: ChainsFile {
                masterchain: self.master.chain().headers().to_vec(),
                shards: chains,
            },
            anchors: self.anchor_rows,
            proofs: self.proofs,
            blocks: self.blocks,
            final_pools,
            live_shards: self.shards.keys().cloned().collect(),
        })
    }
}

fn victim_range(adv: &super::scenario::AdversaryConfig) -> UnitRange {
    UnitRange {
        lo: amount(&adv.victim_range[0]),
        hi: amount(&adv.victim_range[1]),
    }
}

struct UnitRange {
    lo: u128,
    hi: u128,
}

impl UnitRange {
    fn sample_units<R: Rng + ?Sized>(&self, rng: &mut R) -> u128 {
        rng.gen_range(self.lo..=self.hi)
    }
}

/// Validator-side account check: the proof is for `expected`, comes from a
/// header on `chain` with enough confirmations and recent enough, and
/// resolves against that header's state root.
pub fn check_account(
    chain: &Chain,
    proof: &MptProof,
    expected: &crate::state_trie::Address,
    confirmations: u64,
    window: u64,
    now: u64,
) -> Result<AccountLeaf, String> {
    if &proof.address != expected {
        return Err("account does not belong to the sender".into());
    }
    let header = chain.header_for(proof).map_err(|e| e.to_string())?;
    if !check_freshness(chain, chain.tip(), header, confirmations, window, now).map_err(|e| e.to_string())? {
        return Err("stale account proof".into());
    }
    verify_account_proof(&header.state_root, expected, proof).map_err(|e| e.to_string())
}
