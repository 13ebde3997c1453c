use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{Circuit, DirectoryError, NodeRecord, NodeRole, NodeView, Requester, TrustAnchors};
use crate::crypto::Hop;
use crate::ids::{Pseudonym, ServiceNumber, TrueId};
use crate::rng::SimRng;

pub const DEFAULT_MIN_CIRCUIT_LENGTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationEpoch {
    pub epoch_number: u64,
    pub prng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryAck {
    pub size: usize,
}

/// What the manager asks a circuit for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub service_number: ServiceNumber,
}

/// Old pseudonym to new pseudonym, one entry per registered node.
pub type RotationMapping = BTreeMap<Pseudonym, Pseudonym>;

/// Node registry held by the directory server.
#[derive(Debug, Clone)]
pub struct Registry {
    nodes: BTreeMap<TrueId, NodeRecord>,
    by_pseudonym: BTreeMap<Pseudonym, TrueId>,
    epoch: RotationEpoch,
    min_circuit_length: usize,
    trust: TrustAnchors,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new(DEFAULT_MIN_CIRCUIT_LENGTH)
    }
}

impl Registry {
    pub fn new(min_circuit_length: usize) -> Self {
        Registry {
            nodes: BTreeMap::new(),
            by_pseudonym: BTreeMap::new(),
            epoch: RotationEpoch {
                epoch_number: 0,
                prng_seed: 0,
            },
            min_circuit_length,
            trust: TrustAnchors::default(),
        }
    }

    pub fn with_trust_anchors(mut self, trust: TrustAnchors) -> Self {
        self.trust = trust;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn epoch(&self) -> RotationEpoch {
        self.epoch
    }

    pub fn min_circuit_length(&self) -> usize {
        self.min_circuit_length
    }

    pub fn get(&self, id: &TrueId) -> Option<&NodeRecord> {
        self.nodes.get(id)
    }

    pub fn by_pseudonym(&self, p: &Pseudonym) -> Option<&NodeRecord> {
        self.by_pseudonym.get(p).and_then(|id| self.nodes.get(id))
    }

    pub fn records(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    /// Draw a pseudonym not currently held by any node.
    pub fn fresh_pseudonym(&self, rng: &mut impl RngCore) -> Pseudonym {
        loop {
            let p = Pseudonym::random(rng);
            if !self.by_pseudonym.contains_key(&p) {
                return p;
            }
        }
    }

    pub fn register_node(&mut self, record: NodeRecord) -> Result<RegistryAck, DirectoryError> {
        if self.nodes.contains_key(&record.true_id) {
            return Err(DirectoryError::DuplicateTrueId(record.true_id.to_string()));
        }
        if self.by_pseudonym.contains_key(&record.pseudonym) {
            return Err(DirectoryError::DuplicatePseudonym(
                record.pseudonym.to_string(),
            ));
        }
        self.by_pseudonym
            .insert(record.pseudonym.clone(), record.true_id.clone());
        self.nodes.insert(record.true_id.clone(), record);
        Ok(RegistryAck {
            size: self.nodes.len(),
        })
    }

    /// Give every node a fresh pseudonym and advance the epoch.
    ///
    /// One seed is drawn from `prng` per epoch and recorded in the epoch; the
    /// names themselves come from a generator seeded with it. New names never
    /// reuse a name from the previous epoch, so a stale pseudonym can only
    /// fail to resolve, never resolve to a different node.
    pub fn rotate_pseudonyms(&mut self, prng: &mut impl RngCore) -> RotationMapping {
        let seed = prng.next_u64();
        let mut names = SimRng::seed_from_u64(seed);
        let mut taken: BTreeSet<Pseudonym> = self.by_pseudonym.keys().cloned().collect();
        let mut mapping = RotationMapping::new();
        let mut by_pseudonym = BTreeMap::new();
        for record in self.nodes.values_mut() {
            let fresh = loop {
                let p = Pseudonym::random(&mut names);
                if taken.insert(p.clone()) {
                    break p;
                }
            };
            mapping.insert(record.pseudonym.clone(), fresh.clone());
            by_pseudonym.insert(fresh.clone(), record.true_id.clone());
            record.pseudonym = fresh;
        }
        self.by_pseudonym = by_pseudonym;
        self.epoch = RotationEpoch {
            epoch_number: self.epoch.epoch_number + 1,
            prng_seed: seed,
        };
        mapping
    }

    pub fn is_stale(&self, circuit: &Circuit) -> bool {
        circuit.epoch < self.epoch.epoch_number
    }

    /// Pick `length - 1` distinct slave nodes uniformly without replacement
    /// and append the master node.
    pub fn build_circuit(
        &self,
        request: &ServiceDescriptor,
        mn: &NodeRecord,
        length: usize,
        prng: &mut impl RngCore,
    ) -> Result<Circuit, DirectoryError> {
        let _ = request.service_number;
        if length < self.min_circuit_length {
            return Err(DirectoryError::CircuitTooShort {
                length,
                min: self.min_circuit_length,
            });
        }
        match self.nodes.get(&mn.true_id) {
            Some(r) if r.role == NodeRole::Master => {}
            _ => return Err(DirectoryError::UnknownMaster),
        }
        let mut slaves: Vec<&NodeRecord> = self
            .nodes
            .values()
            .filter(|r| r.role == NodeRole::Slave)
            .collect();
        let needed = length - 1;
        if slaves.len() < needed {
            return Err(DirectoryError::Capacity {
                needed,
                available: slaves.len(),
            });
        }
        let (chosen, _) = slaves.partial_shuffle(prng, needed);
        let master = &self.nodes[&mn.true_id];
        let hops = chosen
            .iter()
            .map(|r| r.hop())
            .chain(std::iter::once(master.hop()))
            .collect();
        Ok(Circuit {
            hops,
            epoch: self.epoch.epoch_number,
        })
    }

    /// Pseudonym and key view of the registry. True ids stay here.
    pub fn current_list(&self, requester: Requester) -> Result<Vec<NodeView>, DirectoryError> {
        if !self.trust.permits(requester) {
            return Err(DirectoryError::AccessDenied(requester));
        }
        Ok(self.nodes.values().map(NodeRecord::view).collect())
    }

    pub fn master(&self) -> Option<&NodeRecord> {
        self.nodes.values().find(|r| r.role == NodeRole::Master)
    }
}

impl NodeRecord {
    pub fn hop(&self) -> Hop {
        Hop {
            pseudonym: self.pseudonym.clone(),
            key: self.public_key.clone(),
        }
    }

    pub fn view(&self) -> NodeView {
        NodeView {
            pseudonym: self.pseudonym.clone(),
            public_key: self.public_key.clone(),
            role: self.role,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::generate_keypair;
    use crate::rng::stream;

    fn record(i: u32, role: NodeRole, rng: &mut SimRng, reg: &Registry) -> NodeRecord {
        NodeRecord {
            true_id: TrueId::new(format!("sn-{i:04}")),
            pseudonym: reg.fresh_pseudonym(rng),
            public_key: generate_keypair(u64::from(i)).public().clone(),
            role,
        }
    }

    fn populated(slaves: u32) -> (Registry, NodeRecord) {
        let mut reg = Registry::default();
        let mut rng = stream(1, "test");
        for i in 1..=slaves {
            let r = record(i, NodeRole::Slave, &mut rng, &reg);
            reg.register_node(r).unwrap();
        }
        let mut mn = record(0, NodeRole::Master, &mut rng, &reg);
        mn.true_id = TrueId::new("mn-0000");
        reg.register_node(mn.clone()).unwrap();
        (reg, mn)
    }

    const REQ: ServiceDescriptor = ServiceDescriptor {
        service_number: ServiceNumber(1),
    };

    #[test]
    fn register_grows_and_rejects_duplicates() {
        let mut reg = Registry::default();
        let mut rng = stream(2, "test");
        let r = record(1, NodeRole::Slave, &mut rng, &reg);
        assert_eq!(reg.register_node(r.clone()).unwrap().size, 1);
        let mut same_id = r.clone();
        same_id.pseudonym = reg.fresh_pseudonym(&mut rng);
        assert!(matches!(
            reg.register_node(same_id),
            Err(DirectoryError::DuplicateTrueId(_))
        ));
        let mut same_alias = record(2, NodeRole::Slave, &mut rng, &reg);
        same_alias.pseudonym = r.pseudonym.clone();
        assert!(matches!(
            reg.register_node(same_alias),
            Err(DirectoryError::DuplicatePseudonym(_))
        ));
    }

    #[test]
    fn fifty_slaves_and_a_master() {
        let (reg, _) = populated(50);
        assert_eq!(reg.len(), 51);
    }

    #[test]
    fn rotating_empty_registry_still_advances() {
        let mut reg = Registry::default();
        let mapping = reg.rotate_pseudonyms(&mut stream(3, "rot"));
        assert!(mapping.is_empty());
        assert_eq!(reg.epoch().epoch_number, 1);
    }

    #[test]
    fn rotation_is_deterministic() {
        let (a, _) = populated(10);
        let mut b = a.clone();
        let mut a = a;
        assert_eq!(
            a.rotate_pseudonyms(&mut stream(9, "rot")),
            b.rotate_pseudonyms(&mut stream(9, "rot"))
        );
    }

    #[test]
    fn rotation_of_ten_nodes_is_a_bijection() {
        let (mut reg, _) = populated(9);
        let before: BTreeSet<Pseudonym> = reg.records().map(|r| r.pseudonym.clone()).collect();
        let mapping = reg.rotate_pseudonyms(&mut stream(4, "rot"));
        let keys: BTreeSet<_> = mapping.keys().cloned().collect();
        let values: BTreeSet<_> = mapping.values().cloned().collect();
        assert_eq!(keys, before);
        assert_eq!(values.len(), 10);
        assert!(values.is_disjoint(&before));
        let after: BTreeSet<_> = reg.records().map(|r| r.pseudonym.clone()).collect();
        assert_eq!(after, values);
    }

    #[test]
    fn circuit_of_three_from_five() {
        let (reg, mn) = populated(5);
        let c = reg
            .build_circuit(&REQ, &mn, 3, &mut stream(5, "circ"))
            .unwrap();
        assert_eq!(c.hops.len(), 3);
        assert_eq!(c.hops[2].pseudonym, mn.pseudonym);
        assert_ne!(c.hops[0].pseudonym, c.hops[1].pseudonym);
        assert!(c.validate(3, mn.public_key.key_id()).is_ok());
    }

    #[test]
    fn one_slave_cannot_fill_three_hops() {
        let (reg, mn) = populated(1);
        assert_eq!(
            reg.build_circuit(&REQ, &mn, 3, &mut stream(5, "circ")),
            Err(DirectoryError::Capacity {
                needed: 2,
                available: 1
            })
        );
    }

    #[test]
    fn circuit_below_minimum_rejected() {
        let (reg, mn) = populated(5);
        assert!(matches!(
            reg.build_circuit(&REQ, &mn, 2, &mut stream(5, "circ")),
            Err(DirectoryError::CircuitTooShort { .. })
        ));
    }

    #[test]
    fn same_seed_same_circuit() {
        let (reg, mn) = populated(10);
        let a = reg
            .build_circuit(&REQ, &mn, 4, &mut stream(6, "c"))
            .unwrap();
        let b = reg
            .build_circuit(&REQ, &mn, 4, &mut stream(6, "c"))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn list_access_follows_trust_anchors() {
        let (mut reg, _) = populated(3);
        let list = reg.current_list(Requester::Manager).unwrap();
        assert_eq!(list.len(), 4);
        assert!(reg.current_list(Requester::MasterNode).is_ok());
        assert_eq!(
            reg.current_list(Requester::Customer),
            Err(DirectoryError::AccessDenied(Requester::Customer))
        );
        reg.rotate_pseudonyms(&mut stream(1, "r"));
        let current: BTreeSet<_> = reg.records().map(|r| r.pseudonym.clone()).collect();
        let listed: BTreeSet<_> = reg
            .current_list(Requester::Manager)
            .unwrap()
            .into_iter()
            .map(|v| v.pseudonym)
            .collect();
        assert_eq!(listed, current);
    }

    #[test]
    fn circuits_go_stale_after_rotation() {
        let (mut reg, mn) = populated(4);
        let c = reg
            .build_circuit(&REQ, &mn, 3, &mut stream(1, "c"))
            .unwrap();
        assert!(!reg.is_stale(&c));
        reg.rotate_pseudonyms(&mut stream(1, "r"));
        assert!(reg.is_stale(&c));
    }
}
