use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use super::runner::{AnchorRow, ChainsFile, ProofRecord};
use super::{ANCHORS, CHAINS, PROOFS, RUN_LOG, SUMMARY};
use crate::hexser;
use crate::ledger::{anchor_table_root, Anchor};
use crate::protocol::{admit_submission, parse_amount, Crypto, RunLog};
use crate::state_trie::{verify_account_proof, Chain};

/// First failed check, named by the invariant it protects.
#[derive(Debug, Error)]
pub enum VerifyFailure {
    #[error("unreadable artifact {file}: {msg}")]
    Io { file: String, msg: String },
    #[error("invariant violated: {invariant}: {detail}")]
    Invariant { invariant: &'static str, detail: String },
}

impl VerifyFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            VerifyFailure::Io { .. } => 1,
            VerifyFailure::Invariant { .. } => 2,
        }
    }
}

fn fail(invariant: &'static str, detail: impl Into<String>) -> VerifyFailure {
    VerifyFailure::Invariant {
        invariant,
        detail: detail.into(),
    }
}

fn read(dir: &Path, file: &str) -> Result<String, VerifyFailure> {
    fs::read_to_string(dir.join(file)).map_err(|e| VerifyFailure::Io {
        file: file.into(),
        msg: e.to_string(),
    })
}

fn parse<T: serde::de::DeserializeOwned>(file: &str, text: &str, invariant: &'static str) -> Result<T, VerifyFailure> {
    serde_json::from_str(text).map_err(|e| fail(invariant, format!("{file}: {e}")))
}

/// Re-checks a run directory: header chains, every published proof, the
/// anchor table behind each masterchain block, and the pool history.
pub fn verify_artifacts(dir: &Path) -> Result<(), VerifyFailure> {
    let summary: Value = parse(SUMMARY, &read(dir, SUMMARY)?, "summary")?;
    let seed = summary["seed"].as_u64().ok_or_else(|| fail("summary", "missing seed"))?;
    let crypto = Crypto::setup(&seed.to_be_bytes()).map_err(|e| fail("setup", e.to_string()))?;
    if summary["verifyingKey"].as_str() != Some(hexser::encode(&crypto.vk.to_bytes()).as_str()) {
        return Err(fail("verifying key", "summary key does not match the seed's setup"));
    }

    let chains: ChainsFile = parse(CHAINS, &read(dir, CHAINS)?, "chain integrity")?;
    let master = Chain::from_headers(chains.masterchain.clone()).map_err(|e| fail("chain integrity", e.to_string()))?;
    master.validate().map_err(|e| fail("chain integrity", format!("masterchain: {e}")))?;
    let mut shard_chains: BTreeMap<&str, Vec<Chain>> = BTreeMap::new();
    for rec in &chains.shards {
        let chain =
            Chain::from_headers(rec.headers.clone()).map_err(|e| fail("chain integrity", format!("{}: {e}", rec.shard_id)))?;
        chain.validate().map_err(|e| fail("chain integrity", format!("shard {}: {e}", rec.shard_id)))?;
        for parent in &rec.parents {
            let tips: Vec<[u8; 32]> = chains
                .shards
                .iter()
                .filter(|p| &p.shard_id == parent)
                .filter_map(|p| p.headers.last().map(|h| h.header_hash))
                .collect();
            if rec.parents.len() == 1 && !tips.contains(&chain.headers()[0].parent_hash) {
                return Err(fail("chain integrity", format!("shard {} does not extend {parent}", rec.shard_id)));
            }
            if tips.is_empty() {
                return Err(fail("chain integrity", format!("shard {} names unknown parent {parent}", rec.shard_id)));
            }
        }
        shard_chains.entry(rec.shard_id.as_str()).or_default().push(chain);
    }

    let proofs = read(dir, PROOFS)?;
    for (i, line) in proofs.lines().enumerate() {
        let rec: ProofRecord = parse(PROOFS, line, "balance proof")?;
        let threshold = rec.threshold.parse::<u128>().map_err(|e| fail("balance proof", format!("line {}: {e}", i + 1)))?;
        let candidates = shard_chains.get(rec.shard.as_str()).map(Vec::as_slice).unwrap_or_default();
        admit_submission(&crypto, &rec.balance_proof, &rec.account_proof, threshold, |proof| {
            let header = candidates
                .iter()
                .find_map(|c| c.header_for(proof).ok())
                .ok_or_else(|| "account proof names a block not on the shard chain".to_string())?;
            verify_account_proof(&header.state_root, &proof.address, proof).map_err(|e| e.to_string())
        })
        .map_err(|e| fail("balance proof", format!("{PROOFS} line {}: {e}", i + 1)))?;
    }

    let anchors = read(dir, ANCHORS)?;
    let mut reader = csv::Reader::from_reader(anchors.as_bytes());
    let mut tables: BTreeMap<u64, BTreeMap<String, Anchor>> = BTreeMap::new();
    for row in reader.deserialize::<AnchorRow>() {
        let row = row.map_err(|e| fail("anchor completeness", format!("{ANCHORS}: {e}")))?;
        let head_hash: [u8; 32] = hexser::decode(&row.head_hash)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| fail("anchor completeness", format!("bad head hash {}", row.head_hash)))?;
        let on_chain = shard_chains
            .get(row.shard_id.as_str())
            .is_some_and(|cs| cs.iter().any(|c| c.get(row.shard_height).is_some_and(|h| h.header_hash == head_hash)));
        if !on_chain {
            return Err(fail(
                "anchor completeness",
                format!("anchor {}@{} is not a block of that shard", row.shard_id, row.shard_height),
            ));
        }
        tables.entry(row.masterchain_height).or_default().insert(
            row.shard_id,
            Anchor {
                shard_height: row.shard_height,
                head_hash,
                stale: row.stale,
            },
        );
    }
    for h in master.headers().iter().skip(1) {
        let table = tables.remove(&h.height).unwrap_or_default();
        if anchor_table_root(&table) != h.state_root {
            return Err(fail(
                "anchor completeness",
                format!("anchors listed for masterchain block {} do not reproduce its root", h.height),
            ));
        }
    }
    if let Some(h) = tables.keys().next() {
        return Err(fail("anchor completeness", format!("anchors for unknown masterchain block {h}")));
    }

    let log = RunLog::from_jsonl(&read(dir, RUN_LOG)?).map_err(|e| fail("conservation", format!("{RUN_LOG}: {e}")))?;
    replay_pools(&log)
}

fn reserves(v: &Value) -> Result<(u128, u128), VerifyFailure> {
    let get = |k: &str| {
        v[k].as_str()
            .and_then(|s| parse_amount(s).ok())
            .ok_or_else(|| fail("conservation", format!("malformed pool {v}")))
    };
    Ok((get("e")?, get("m")?))
}

/// Walks the pool events: every trade keeps the product within rounding of
/// the previous one, and splits and merges neither create nor destroy
/// reserves.
fn replay_pools(log: &RunLog) -> Result<(), VerifyFailure> {
    let mut pools: BTreeMap<String, (u128, u128)> = BTreeMap::new();
    for ev in &log.events {
        let p = &ev.payload;
        match ev.event.as_str() {
            "pool_published" if p["cause"] == "opened" => {
                let (e, m) = reserves(p)?;
                if e == 0 || m == 0 {
                    return Err(fail("conservation", format!("{} opened an empty pool", ev.actor)));
                }
                pools.insert(ev.actor.clone(), (e, m));
            }
            "pool_published" => {
                let (e, m) = reserves(p)?;
                let (e0, m0) = pools
                    .get(&ev.actor)
                    .copied()
                    .ok_or_else(|| fail("conservation", format!("trade on {} before its pool opened", ev.actor)))?;
                let (c0, c1) = (e0 * m0, e * m);
                if c1 < c0 || c1 >= c0 + e + m {
                    return Err(fail("conservation", format!("tick {}: {} moved C from {c0} to {c1}", ev.tick, ev.actor)));
                }
                pools.insert(ev.actor.clone(), (e, m));
            }
            "shard_split" => {
                let parent = p["parent"].as_str().unwrap_or_default().to_string();
                let before = pools.remove(&parent);
                let claimed = if p["pool"].is_null() { None } else { Some(reserves(&p["pool"])?) };
                if before != claimed {
                    return Err(fail("conservation", format!("split of {parent} misstates its pool")));
                }
                let mut sum = (0, 0);
                let mut any = false;
                for c in p["children"].as_array().into_iter().flatten() {
                    if !c["pool"].is_null() {
                        let (e, m) = reserves(&c["pool"])?;
                        sum = (sum.0 + e, sum.1 + m);
                        any = true;
                        pools.insert(c["id"].as_str().unwrap_or_default().to_string(), (e, m));
                    }
                }
                if any && Some(sum) != before {
                    return Err(fail("conservation", format!("split of {parent} changed total reserves")));
                }
            }
            "shard_merged" => {
                let mut sum = (0, 0);
                for c in p["children"].as_array().into_iter().flatten() {
                    if let Some((e, m)) = pools.remove(c.as_str().unwrap_or_default()) {
                        sum = (sum.0 + e, sum.1 + m);
                    }
                }
                let merged = if p["pool"].is_null() { (0, 0) } else { reserves(&p["pool"])? };
                if merged != sum {
                    return Err(fail("conservation", format!("merge into {} changed total reserves", p["shard"])));
                }
                if merged != (0, 0) {
                    pools.insert(p["shard"].as_str().unwrap_or_default().to_string(), merged);
                }
            }
            _ => {}
        }
    }
    Ok(())
}
