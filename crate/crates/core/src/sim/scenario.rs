use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::adversary::Mode;
use crate::amm::Side;
use crate::field_group::MERSENNE_127;
use crate::ledger::{GeoPoint, Thresholds, Zone};
use crate::mpc::{Executor, LatencyModel};
use crate::protocol::parse_amount;

fn default_bits() -> u32 {
    256
}

fn yes() -> bool {
    true
}

fn default_trials() -> u64 {
    1_000
}

fn default_epoch() -> u64 {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct Scenario {
    pub seed: u64,
    #[serde(default = "default_bits")]
    pub security_bits: u32,
    pub mpc: MpcConfig,
    pub consensus: ConsensusConfig,
    pub freshness: FreshnessConfig,
    pub thresholds: Thresholds,
    pub workchains: Vec<WorkchainConfig>,
    pub peers: Vec<PeerConfig>,
    #[serde(default)]
    pub lps: Vec<LpConfig>,
    pub lp_threshold: String,
    pub trading: TradingConfig,
    #[serde(default)]
    pub trades: Vec<TradeConfig>,
    #[serde(default)]
    pub load_surges: Vec<SurgeConfig>,
    #[serde(default)]
    pub failures: Vec<FailureConfig>,
    pub adversary: AdversaryConfig,
    pub duration_ticks: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    pub parties: usize,
    /// Decimal modulus; only the commitment group's exponent field is accepted.
    #[serde(default)]
    pub modulus: Option<String>,
    #[serde(default)]
    pub executor: Executor,
    #[serde(default)]
    pub latency: LatencyModel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusConfig {
    pub f: usize,
    /// Ticks between block rounds.
    pub block_interval: u64,
    /// Blocks per committee epoch.
    #[serde(default = "default_epoch")]
    pub epoch_blocks: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreshnessConfig {
    pub confirmations: u64,
    /// Maximum proof age in ticks.
    pub window: u64,
}

/// Rectangle in decimal degrees; converted to microdegrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneConfig {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl ZoneConfig {
    pub fn zone(&self) -> Option<Zone> {
        Zone::from_degrees(self.south, self.west, self.north, self.east)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkchainConfig {
    pub id: u32,
    pub name: String,
    pub zone: ZoneConfig,
    /// Money reserve each initial shard's pool opens with.
    pub m_reserve: String,
    /// Initial shards; empty means a single shard covering the zone.
    #[serde(default)]
    pub shards: Vec<ShardConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShardConfig {
    pub name: String,
    pub zone: ZoneConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerConfig {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub validator: bool,
    /// Background transactions this peer contributes per block.
    #[serde(default)]
    pub tx_per_block: u64,
    #[serde(default)]
    pub energy: Option<String>,
    #[serde(default)]
    pub money: Option<String>,
}

impl PeerConfig {
    pub fn location(&self) -> GeoPoint {
        GeoPoint::from_degrees(self.lat, self.lon)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpConfig {
    pub peer: String,
    pub liquidity: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradingConfig {
    /// Amount every order locks and proves, in the spent token.
    pub lock: String,
    #[serde(default = "yes")]
    pub reveal_bids: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeConfig {
    pub tick: u64,
    pub trader: String,
    pub side: Side,
    pub quantity: String,
    /// Worst acceptable money per energy.
    #[serde(default)]
    pub limit: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurgeConfig {
    pub start_tick: u64,
    pub end_tick: u64,
    pub zone: ZoneConfig,
    pub tx_per_block: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureConfig {
    pub zone: ZoneConfig,
    pub start_tick: u64,
    #[serde(default)]
    pub end_tick: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VictimConfig {
    pub side: Side,
    pub quantity: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    /// What the in-simulation attacker sees of the shard mempools.
    #[serde(default = "committed")]
    pub mempool: Mode,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub pool: [String; 2],
    pub victim: VictimConfig,
    pub attacker_size: String,
    pub victim_range: [String; 2],
    pub arbitrage: [[String; 2]; 2],
}

fn committed() -> Mode {
    Mode::Committed
}

/// Parses scenario JSON, reporting the failing field path on error.
pub fn parse_scenario(text: &str) -> Result<Scenario, SimError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        SimError::Config(format!(
            "line {} column {}: {}: {}",
            inner.line(),
            inner.column(),
            e.path(),
            inner
        ))
    })?;
    scenario.validate()?;
    Ok(scenario)
}

fn cfg(path: impl std::fmt::Display, msg: impl std::fmt::Display) -> SimError {
    SimError::Config(format!("{path}: {msg}"))
}

fn amount(path: &str, s: &str) -> Result<u128, SimError> {
    parse_amount(s).map_err(|e| cfg(path, e))
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.security_bits != 256 {
            return Err(cfg("security_bits", "only 256-bit groups are supported"));
        }
        if self.mpc.parties < 2 {
            return Err(cfg("mpc.parties", "need at least 2 parties"));
        }
        if let Some(m) = &self.mpc.modulus {
            if m.parse::<u128>().ok() != Some(MERSENNE_127) {
                return Err(cfg("mpc.modulus", "must equal the commitment exponent field 2^127 - 1"));
            }
        }
        if self.consensus.block_interval == 0 {
            return Err(cfg("consensus.block_interval", "must be positive"));
        }
        if self.consensus.epoch_blocks == 0 {
            return Err(cfg("consensus.epoch_blocks", "must be positive"));
        }
        if self.thresholds.merge_tps >= self.thresholds.split_tps {
            return Err(cfg("thresholds", "merge_tps must be below split_tps"));
        }
        let mut ids = BTreeSet::new();
        for (i, p) in self.peers.iter().enumerate() {
            if !ids.insert(p.id.as_str()) {
                return Err(cfg(format!("peers[{i}].id"), format!("duplicate peer `{}`", p.id)));
            }
            if !(-90.0..90.0).contains(&p.lat) || !(-180.0..180.0).contains(&p.lon) {
                return Err(cfg(format!("peers[{i}]"), "location out of range"));
            }
            for (field, v) in [("energy", &p.energy), ("money", &p.money)] {
                if let Some(v) = v {
                    amount(&format!("peers[{i}].{field}"), v)?;
                }
            }
        }
        let mut wc_ids = BTreeSet::new();
        let mut names = BTreeSet::new();
        for (i, w) in self.workchains.iter().enumerate() {
            if !wc_ids.insert(w.id) {
                return Err(cfg(format!("workchains[{i}].id"), "duplicate workchain id"));
            }
            let zone = w.zone.zone().ok_or_else(|| cfg(format!("workchains[{i}].zone"), "empty rectangle"))?;
            amount(&format!("workchains[{i}].m_reserve"), &w.m_reserve)?;
            let shard_zones = w
                .shards
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    if s.name.contains('.') || !names.insert(s.name.clone()) {
                        return Err(cfg(format!("workchains[{i}].shards[{j}].name"), "must be unique and contain no `.`"));
                    }
                    s.zone.zone().ok_or_else(|| cfg(format!("workchains[{i}].shards[{j}].zone"), "empty rectangle"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if shard_zones.is_empty() {
                if w.name.contains('.') || !names.insert(w.name.clone()) {
                    return Err(cfg(format!("workchains[{i}].name"), "must be unique and contain no `.`"));
                }
            } else {
                crate::ledger::audit_partition(&zone, &shard_zones).map_err(|e| cfg(format!("workchains[{i}].shards"), e))?;
            }
        }
        if self.workchains.is_empty() {
            return Err(cfg("workchains", "need at least one workchain"));
        }
        amount("lp_threshold", &self.lp_threshold)?;
        amount("trading.lock", &self.trading.lock)?;
        for (i, lp) in self.lps.iter().enumerate() {
            if !ids.contains(lp.peer.as_str()) {
                return Err(cfg(format!("lps[{i}].peer"), format!("unknown peer `{}`", lp.peer)));
            }
            if amount(&format!("lps[{i}].liquidity"), &lp.liquidity)? == 0 {
                return Err(cfg(format!("lps[{i}].liquidity"), "must be positive"));
            }
        }
        for (i, t) in self.trades.iter().enumerate() {
            if !ids.contains(t.trader.as_str()) {
                return Err(cfg(format!("trades[{i}].trader"), format!("unknown peer `{}`", t.trader)));
            }
            if amount(&format!("trades[{i}].quantity"), &t.quantity)? == 0 {
                return Err(cfg(format!("trades[{i}].quantity"), "must be positive"));
            }
            if let Some(l) = &t.limit {
                amount(&format!("trades[{i}].limit"), l)?;
            }
        }
        for (i, s) in self.load_surges.iter().enumerate() {
            s.zone.zone().ok_or_else(|| cfg(format!("load_surges[{i}].zone"), "empty rectangle"))?;
        }
        for (i, f) in self.failures.iter().enumerate() {
            f.zone.zone().ok_or_else(|| cfg(format!("failures[{i}].zone"), "empty rectangle"))?;
            if f.end_tick.is_some_and(|e| e <= f.start_tick) {
                return Err(cfg(format!("failures[{i}].end_tick"), "must follow start_tick"));
            }
        }
        let a = &self.adversary;
        for (j, v) in a.pool.iter().enumerate() {
            amount(&format!("adversary.pool[{j}]"), v)?;
        }
        amount("adversary.victim.quantity", &a.victim.quantity)?;
        amount("adversary.attacker_size", &a.attacker_size)?;
        let lo = amount("adversary.victim_range[0]", &a.victim_range[0])?;
        let hi = amount("adversary.victim_range[1]", &a.victim_range[1])?;
        if lo == 0 || lo > hi {
            return Err(cfg("adversary.victim_range", "need 0 < min <= max"));
        }
        for (j, pool) in a.arbitrage.iter().enumerate() {
            for (k, v) in pool.iter().enumerate() {
                amount(&format!("adversary.arbitrage[{j}][{k}]"), v)?;
            }
        }
        Ok(())
    }
}
