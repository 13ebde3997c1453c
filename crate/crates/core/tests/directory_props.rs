mod common;

use std::collections::BTreeSet;

use anoncloud_core::compute::ComputeError;
use anoncloud_core::directory::{DirectoryError, Requester, ServiceDescriptor};
use anoncloud_core::ids::{Pseudonym, ServiceNumber};
use anoncloud_core::manager::TokenState;
use anoncloud_core::rng::SimRng;
use common::directory::{circuit, present, registry};
use proptest::prelude::*;
use rand::SeedableRng;

fn pseudonyms(f: &common::directory::Fixture) -> BTreeSet<Pseudonym> {
    f.registry.records().map(|r| r.pseudonym.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_is_a_bijection_onto_fresh_names(nodes in 2usize..40, seed in any::<u64>(), rounds in 1usize..4) {
        let mut f = registry(nodes, seed);
        let mut prng = SimRng::seed_from_u64(seed);
        for round in 1..=rounds {
            let before = pseudonyms(&f);
            let ids_before: Vec<_> = f.registry.records().map(|r| (r.true_id.clone(), r.pseudonym.clone())).collect();
            let mapping = f.registry.rotate_pseudonyms(&mut prng);
            let after = pseudonyms(&f);
            prop_assert_eq!(mapping.keys().cloned().collect::<BTreeSet<_>>(), before.clone());
            prop_assert_eq!(mapping.values().cloned().collect::<BTreeSet<_>>(), after.clone());
            prop_assert_eq!(after.len(), nodes);
            prop_assert!(before.is_disjoint(&after));
            for (id, old) in ids_before {
                prop_assert_eq!(&f.registry.get(&id).unwrap().pseudonym, &mapping[&old]);
                prop_assert!(f.registry.by_pseudonym(&old).is_none());
            }
            prop_assert_eq!(f.registry.epoch().epoch_number, round as u64);
        }
    }

    #[test]
    fn rotation_is_reproducible(seed in any::<u64>()) {
        let run = || {
            let mut f = registry(12, 3);
            f.registry.rotate_pseudonyms(&mut SimRng::seed_from_u64(seed))
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn circuits_have_distinct_slaves_and_end_at_the_master(nodes in 3usize..30, seed in any::<u64>(), extra in 0usize..6) {
        let f = registry(nodes, seed);
        let length = (3 + extra).min(nodes);
        let mut rng = SimRng::seed_from_u64(seed);
        let c = circuit(&f, length, &mut rng);
        prop_assert_eq!(c.len(), length);
        prop_assert!(c.validate(3, f.master_key.key_id()).is_ok());
        let distinct: BTreeSet<_> = c.hops.iter().map(|h| h.pseudonym.clone()).collect();
        prop_assert_eq!(distinct.len(), length);
    }
}

#[test]
fn circuits_below_three_hops_or_beyond_capacity_are_refused() {
    let f = registry(4, 1);
    let desc = ServiceDescriptor {
        service_number: ServiceNumber(1),
    };
    let mut rng = SimRng::seed_from_u64(0);
    let master = f.registry.master().unwrap().clone();
    assert!(matches!(
        f.registry.build_circuit(&desc, &master, 2, &mut rng),
        Err(DirectoryError::CircuitTooShort { length: 2, min: 3 })
    ));
    assert!(matches!(
        f.registry.build_circuit(&desc, &master, 5, &mut rng),
        Err(DirectoryError::Capacity {
            needed: 4,
            available: 3
        })
    ));
}

#[test]
fn stale_circuit_is_refused_without_redeeming() {
    let mut f = registry(6, 2);
    let mut rng = SimRng::seed_from_u64(5);
    let old = circuit(&f, 3, &mut rng);
    f.registry.rotate_pseudonyms(&mut rng);
    assert!(f.registry.is_stale(&old));
    let (outcome, state) = present(&f, old, 1);
    assert!(matches!(
        outcome,
        Err(ComputeError::StaleCircuit {
            circuit: 0,
            current: 1
        })
    ));
    assert_eq!(state, TokenState::Issued);

    let fresh = circuit(&f, 3, &mut rng);
    let (outcome, state) = present(&f, fresh, 1);
    assert_eq!(outcome, Ok(()));
    assert_eq!(state, TokenState::Redeemed);
}

#[test]
fn node_list_is_for_trust_anchors_only() {
    let f = registry(5, 1);
    assert_eq!(
        f.registry.current_list(Requester::Manager).unwrap().len(),
        5
    );
    assert!(matches!(
        f.registry.current_list(Requester::Customer),
        Err(DirectoryError::AccessDenied(Requester::Customer))
    ));
}

#[test]
fn duplicate_registrations_are_refused() {
    let mut f = registry(3, 1);
    let dup = f.master.clone();
    assert!(matches!(
        f.registry.register_node(dup),
        Err(DirectoryError::DuplicateTrueId(_))
    ));
}
