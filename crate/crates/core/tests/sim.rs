use gridswap::sim::{parse_scenario, run_scenario, verify_artifacts, write_artifacts, Scenario, SimError};

fn smoke() -> Scenario {
    parse_scenario(include_str!("../../../scenarios/smoke.json")).unwrap()
}

#[test]
fn smoke_run_settles_and_verifies() {
    let run = run_scenario(&smoke()).unwrap();
    assert_eq!(run.summary["trades"]["settled"], 10);
    assert_eq!(run.proofs.iter().filter(|p| p.kind == "order").count(), 10);
    let dir = tempfile::tempdir().unwrap();
    write_artifacts(dir.path(), &run).unwrap();
    verify_artifacts(dir.path()).unwrap();
}

#[test]
fn observer_never_sees_order_sizes() {
    let sc = smoke();
    let run = run_scenario(&sc).unwrap();
    for e in run.log.events.iter().filter(|e| e.event == "order_submitted") {
        let text = e.payload.to_string();
        assert!(!text.contains("quantity"), "{text}");
        assert!(!text.contains("\"side\""), "{text}");
    }
}

#[test]
fn failed_region_leaves_other_shards_untouched() {
    let sc = parse_scenario(include_str!("../../../scenarios/regions.json")).unwrap();
    let mut control = sc.clone();
    control.failures.clear();
    let (a, b) = (run_scenario(&sc).unwrap(), run_scenario(&control).unwrap());
    let mut differing: Vec<&String> = b.blocks.keys().filter(|id| a.blocks.get(*id) != b.blocks.get(*id)).collect();
    differing.sort();
    assert_eq!(differing, vec!["east"]);
    assert!(a.log.events.iter().any(|e| e.event == "shard_split"));
    assert!(a.log.events.iter().any(|e| e.event == "shard_merged"));
}

#[test]
fn over_draining_order_is_a_liquidity_error() {
    let mut sc = smoke();
    sc.trades.truncate(1);
    sc.trades[0].quantity = "600".into();
    sc.trades[0].side = gridswap::amm::Side::Buy;
    let err = run_scenario(&sc).unwrap_err();
    assert!(matches!(err, SimError::Invariant(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn bad_config_is_rejected_up_front() {
    let mut sc = smoke();
    sc.peers.retain(|p| !p.id.starts_with('v') || p.id == "v0");
    assert!(matches!(run_scenario(&sc), Err(SimError::Config(_))));
    let err = parse_scenario(&include_str!("../../../scenarios/smoke.json").replace("\"seed\"", "\"sead\"")).unwrap_err();
    assert!(err.to_string().contains("sead"), "{err}");
}
