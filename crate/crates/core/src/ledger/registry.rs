use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::geo::{GeoPoint, Zone};
use super::LedgerError;

pub type NodeId = String;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Peer {
    pub id: NodeId,
    pub location: GeoPoint,
    #[serde(with = "crate::hexser::bytes32")]
    pub key: [u8; 32],
    pub validator: bool,
}

/// Known peers, unique by id and by key.
#[derive(Clone, Debug, Default)]
pub struct PeerRegistry {
    peers: BTreeMap<NodeId, Peer>,
    keys: BTreeSet<[u8; 32]>,
}

impl PeerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_peer(&mut self, peer: Peer) -> Result<(), LedgerError> {
        if self.peers.contains_key(&peer.id) {
            return Err(LedgerError::DuplicatePeer(peer.id));
        }
        if !self.keys.insert(peer.key) {
            return Err(LedgerError::DuplicateKey(peer.id));
        }
        self.peers.insert(peer.id.clone(), peer);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Peer> {
        self.peers.get(id)
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Peer> {
        self.peers.values()
    }

    pub fn in_zone<'a>(&'a self, zone: &'a Zone) -> impl Iterator<Item = &'a Peer> + 'a {
        self.peers.values().filter(move |p| zone.contains(&p.location))
    }

    /// Validator ids located in `zone`, sorted.
    pub fn validators_in(&self, zone: &Zone) -> Vec<NodeId> {
        self.in_zone(zone).filter(|p| p.validator).map(|p| p.id.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peer(id: &str, key: u8, lat: i64) -> Peer {
        Peer {
            id: id.into(),
            location: GeoPoint { lat, lon: 0 },
            key: [key; 32],
            validator: true,
        }
    }

    #[test]
    fn duplicate_keys_rejected() {
        let mut r = PeerRegistry::new();
        r.register_peer(peer("a", 1, 0)).unwrap();
        assert_eq!(r.register_peer(peer("b", 1, 0)), Err(LedgerError::DuplicateKey("b".into())));
        assert_eq!(r.register_peer(peer("a", 2, 0)), Err(LedgerError::DuplicatePeer("a".into())));
        r.register_peer(peer("b", 2, 0)).unwrap();
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn boundary_peer_belongs_to_one_zone() {
        let mut r = PeerRegistry::new();
        r.register_peer(peer("edge", 1, 5)).unwrap();
        let south = Zone::new(0, -10, 5, 10).unwrap();
        let north = Zone::new(5, -10, 10, 10).unwrap();
        assert!(r.validators_in(&south).is_empty());
        assert_eq!(r.validators_in(&north), vec!["edge".to_string()]);
    }
}
