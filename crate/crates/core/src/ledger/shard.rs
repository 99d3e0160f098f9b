use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::geo::{audit_partition, Zone};
use super::registry::{NodeId, PeerRegistry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Split when every block in the window carries strictly more.
    pub split_tps: u64,
    /// Merge siblings when every block in both windows carries strictly less.
    pub merge_tps: u64,
    pub window_blocks: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardDescriptor {
    pub shard_id: String,
    pub workchain_id: u32,
    pub zone: Zone,
    pub validators: Vec<NodeId>,
    pub load_window: VecDeque<u64>,
    pub failed: bool,
}

impl ShardDescriptor {
    pub fn new(shard_id: impl Into<String>, workchain_id: u32, zone: Zone, registry: &PeerRegistry) -> Self {
        ShardDescriptor {
            shard_id: shard_id.into(),
            workchain_id,
            zone,
            validators: registry.validators_in(&zone),
            load_window: VecDeque::new(),
            failed: false,
        }
    }

    pub fn record_load(&mut self, tx_count: u64, window: usize) {
        self.load_window.push_back(tx_count);
        while self.load_window.len() > window {
            self.load_window.pop_front();
        }
    }

    fn sustained(&self, window: usize, pred: impl Fn(u64) -> bool) -> bool {
        window > 0 && self.load_window.len() == window && self.load_window.iter().all(|&l| pred(l))
    }
}

/// Ids of the two halves of a split.
pub fn child_ids(shard_id: &str) -> [String; 2] {
    [format!("{shard_id}.0"), format!("{shard_id}.1")]
}

fn parent_id(shard_id: &str) -> Option<(&str, &str)> {
    shard_id.rsplit_once('.')
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Rebalance {
    Split {
        shard_id: String,
        children: [(String, Zone); 2],
    },
    Merge {
        children: [String; 2],
        shard_id: String,
        zone: Zone,
    },
}

/// Decides splits and merges from the recorded load windows. A split cuts
/// the longer axis at the median peer coordinate and happens only if each
/// half keeps `3f+1` validators. Failed shards are left alone.
pub fn rebalance_shards(
    shards: &BTreeMap<String, ShardDescriptor>,
    registry: &PeerRegistry,
    f: usize,
    th: &Thresholds,
) -> Vec<Rebalance> {
    let mut out = Vec::new();
    for s in shards.values() {
        if s.failed || !s.sustained(th.window_blocks, |l| l > th.split_tps) {
            continue;
        }
        let points: Vec<_> = registry.in_zone(&s.zone).map(|p| p.location).collect();
        let Some((a, b)) = s.zone.split_by_median(&points) else {
            continue;
        };
        debug_assert!(audit_partition(&s.zone, &[a, b]).is_ok());
        if registry.validators_in(&a).len() < 3 * f + 1 || registry.validators_in(&b).len() < 3 * f + 1 {
            continue;
        }
        let [ia, ib] = child_ids(&s.shard_id);
        out.push(Rebalance::Split {
            shard_id: s.shard_id.clone(),
            children: [(ia, a), (ib, b)],
        });
    }
    for s in shards.values() {
        let Some((parent, "0")) = parent_id(&s.shard_id) else {
            continue;
        };
        let Some(sib) = shards.get(&format!("{parent}.1")) else {
            continue;
        };
        let calm = |d: &ShardDescriptor| !d.failed && d.sustained(th.window_blocks, |l| l < th.merge_tps);
        if !calm(s) || !calm(sib) {
            continue;
        }
        let zone = Zone {
            south: s.zone.south.min(sib.zone.south),
            west: s.zone.west.min(sib.zone.west),
            north: s.zone.north.max(sib.zone.north),
            east: s.zone.east.max(sib.zone.east),
        };
        if audit_partition(&zone, &[s.zone, sib.zone]).is_err() {
            continue;
        }
        out.push(Rebalance::Merge {
            children: [s.shard_id.clone(), sib.shard_id.clone()],
            shard_id: parent.to_string(),
            zone,
        });
    }
    out
}

/// Takes every shard overlapping `region` offline. Returns the affected ids.
pub fn fail_region(shards: &mut BTreeMap<String, ShardDescriptor>, region: &Zone) -> Vec<String> {
    set_failed(shards, region, true)
}

/// Brings every shard overlapping `region` back online.
pub fn recover_region(shards: &mut BTreeMap<String, ShardDescriptor>, region: &Zone) -> Vec<String> {
    set_failed(shards, region, false)
}

fn set_failed(shards: &mut BTreeMap<String, ShardDescriptor>, region: &Zone, failed: bool) -> Vec<String> {
    shards
        .values_mut()
        .filter(|s| s.zone.overlaps(region) && s.failed != failed)
        .map(|s| {
            s.failed = failed;
            s.shard_id.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::geo::GeoPoint;
    use crate::ledger::registry::Peer;

    fn registry(lons: &[i64]) -> PeerRegistry {
        let mut r = PeerRegistry::new();
        for (i, &lon) in lons.iter().enumerate() {
            r.register_peer(Peer {
                id: format!("p{i}"),
                location: GeoPoint { lat: 5, lon },
                key: [i as u8; 32],
                validator: true,
            })
            .unwrap();
        }
        r
    }

    const TH: Thresholds = Thresholds {
        split_tps: 100,
        merge_tps: 30,
        window_blocks: 3,
    };

    #[test]
    fn split_needs_sustained_strict_excess() {
        let r = registry(&[1, 2, 3, 4, 11, 12, 13, 14]);
        let mut s = ShardDescriptor::new("w0", 0, Zone::new(0, 0, 10, 20).unwrap(), &r);
        let mut shards = BTreeMap::new();
        for load in [120, 120] {
            s.record_load(load, 3);
        }
        shards.insert(s.shard_id.clone(), s.clone());
        assert!(rebalance_shards(&shards, &r, 1, &TH).is_empty());
        s.record_load(100, 3);
        shards.insert(s.shard_id.clone(), s.clone());
        assert!(rebalance_shards(&shards, &r, 1, &TH).is_empty());
        s.record_load(101, 3);
        s.record_load(101, 3);
        s.record_load(101, 3);
        shards.insert(s.shard_id.clone(), s.clone());
        let plan = rebalance_shards(&shards, &r, 1, &TH);
        let Rebalance::Split { children, .. } = &plan[0] else {
            panic!("expected split")
        };
        assert_eq!(children[0].1, Zone::new(0, 0, 10, 11).unwrap());
        assert_eq!(children[1].0, "w0.1");
        // too few validators per half with f = 2
        assert!(rebalance_shards(&shards, &r, 2, &TH).is_empty());
    }

    #[test]
    fn siblings_merge_when_both_calm() {
        let r = registry(&[1, 2, 3, 4, 11, 12, 13, 14]);
        let mut a = ShardDescriptor::new("w0.0", 0, Zone::new(0, 0, 10, 11).unwrap(), &r);
        let mut b = ShardDescriptor::new("w0.1", 0, Zone::new(0, 11, 10, 20).unwrap(), &r);
        for _ in 0..3 {
            a.record_load(10, 3);
            b.record_load(30, 3);
        }
        let mut shards: BTreeMap<_, _> = [(a.shard_id.clone(), a.clone()), (b.shard_id.clone(), b.clone())].into();
        assert!(rebalance_shards(&shards, &r, 1, &TH).is_empty());
        b.record_load(29, 3);
        b.record_load(29, 3);
        b.record_load(29, 3);
        shards.insert(b.shard_id.clone(), b);
        assert_eq!(
            rebalance_shards(&shards, &r, 1, &TH),
            vec![Rebalance::Merge {
                children: ["w0.0".into(), "w0.1".into()],
                shard_id: "w0".into(),
                zone: Zone::new(0, 0, 10, 20).unwrap(),
            }]
        );
    }

    #[test]
    fn failure_is_confined_to_the_region() {
        let r = registry(&[1, 12]);
        let mut shards: BTreeMap<String, ShardDescriptor> = [
            ShardDescriptor::new("a", 0, Zone::new(0, 0, 10, 11).unwrap(), &r),
            ShardDescriptor::new("b", 0, Zone::new(0, 11, 10, 20).unwrap(), &r),
        ]
        .into_iter()
        .map(|s| (s.shard_id.clone(), s))
        .collect();
        let region = Zone::new(0, 0, 10, 5).unwrap();
        assert_eq!(fail_region(&mut shards, &region), vec!["a".to_string()]);
        assert!(shards["a"].failed && !shards["b"].failed);
        assert!(fail_region(&mut shards, &region).is_empty());
        assert_eq!(recover_region(&mut shards, &region), vec!["a".to_string()]);
    }
}
