//! Scenario-driven simulation of the sharded exchange and the checks run
//! over its output directory.

mod runner;
mod scenario;
mod verify;

use std::fs;
use std::path::Path;

use thiserror::Error;

pub use runner::{
    check_account, run_scenario, AnchorRow, ChainsFile, MetricRow, ProofRecord, RunOutput, ShardChainRecord,
};
pub use scenario::*;
pub use verify::{verify_artifacts, VerifyFailure};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("io error: {0}")]
    Io(String),
}

impl SimError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Invariant(_) => 2,
            SimError::Config(_) | SimError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

pub const METRICS: &str = "metrics.csv";
pub const ATTACKS: &str = "attack_report.csv";
pub const RUN_LOG: &str = "run.jsonl";
pub const SUMMARY: &str = "summary.json";
pub const CHAINS: &str = "chain.json";
pub const ANCHORS: &str = "anchors.csv";
pub const PROOFS: &str = "proofs.jsonl";

fn csv_bytes<T: serde::Serialize>(rows: &[T]) -> Result<Vec<u8>, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| SimError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| SimError::Io(e.to_string()))
}

fn pretty(v: &impl serde::Serialize) -> Result<Vec<u8>, SimError> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| SimError::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes every artifact of `run` into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, run: &RunOutput) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(METRICS), csv_bytes(&run.metrics)?)?;
    let mut attacks = Vec::new();
    crate::adversary::write_reports(&run.reports, &mut attacks).map_err(|e| SimError::Io(e.to_string()))?;
    fs::write(dir.join(ATTACKS), attacks)?;
    fs::write(dir.join(RUN_LOG), run.log.to_jsonl())?;
    fs::write(dir.join(SUMMARY), pretty(&run.summary)?)?;
    fs::write(dir.join(CHAINS), pretty(&run.chains)?)?;
    fs::write(dir.join(ANCHORS), csv_bytes(&run.anchors)?)?;
    let mut proofs = String::new();
    for p in &run.proofs {
        proofs.push_str(&serde_json::to_string(p).map_err(|e| SimError::Io(e.to_string()))?);
        proofs.push('\n');
    }
    fs::write(dir.join(PROOFS), proofs)?;
    Ok(())
}
