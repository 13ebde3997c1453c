mod common;

use std::collections::BTreeSet;

use anoncloud_core::scenario::{run, slave_label, ScenarioConfig};
use anoncloud_core::simnet::{
    knowledge, principal, store_scan, AnalysisError, SecretKind, Transcript, UnitGraph,
};
use proptest::prelude::*;

fn canonical() -> Transcript {
    run(&ScenarioConfig::canonical(11, 3)).unwrap().transcript
}

#[test]
fn master_node_sees_the_token_but_not_the_customer() {
    let t = canonical();
    let k = knowledge(&t, principal::MASTER).unwrap();
    assert!(k.kinds().contains(&SecretKind::TokenId));
    for kind in [
        SecretKind::CustomerId,
        SecretKind::PaymentHandle,
        SecretKind::PaymentRef,
        SecretKind::TrueId,
        SecretKind::ProcessId,
    ] {
        assert!(!k.kinds().contains(&kind), "mn knows {kind}");
    }
}

#[test]
fn slave_nodes_see_exactly_their_own_sub_payloads() {
    let t = canonical();
    let mut total = 0;
    for i in 0..3 {
        let sn = slave_label(i);
        let k = knowledge(&t, &sn).unwrap();
        let allowed = BTreeSet::from([SecretKind::HopPseudonym, SecretKind::SubPayload]);
        assert!(k.kinds().is_subset(&allowed), "{sn}: {:?}", k.kinds());
        let seen: BTreeSet<&str> = k
            .of_kind(SecretKind::SubPayload)
            .map(|r| r.value.as_str())
            .collect();
        let owned: BTreeSet<&str> = t
            .secret_entries()
            .iter()
            .filter(|e| e.kind == SecretKind::SubPayload && e.owner.as_deref() == Some(sn.as_str()))
            .map(|e| e.value.as_str())
            .collect();
        assert_eq!(seen, owned, "{sn}");
        total += owned.len();
    }
    // Two sessions over two slave hops each.
    assert_eq!(total, 4);
}

#[test]
fn observer_and_directory_learn_nothing() {
    let t = canonical();
    for who in [principal::OBSERVER, principal::DIRECTORY] {
        assert!(knowledge(&t, who).unwrap().refs.is_empty(), "{who}");
    }
}

#[test]
fn unknown_principal_is_an_error() {
    let t = canonical();
    assert!(matches!(
        knowledge(&t, "eve"),
        Err(AnalysisError::UnknownPrincipal(_))
    ));
}

#[test]
fn manager_store_holds_billing_metadata_only() {
    let t = canonical();
    let kinds: BTreeSet<SecretKind> = store_scan(&t, principal::MANAGER)
        .iter()
        .map(|r| r.kind)
        .collect();
    assert_eq!(
        kinds,
        BTreeSet::from([
            SecretKind::TokenId,
            SecretKind::Amount,
            SecretKind::PaymentRef
        ])
    );
}

#[test]
fn unit_graph_covers_every_envelope() {
    let t = canonical();
    let g = UnitGraph::build(&t);
    assert_eq!(g.envelope_count(), t.envelopes.len());
    assert!(g.all_refs().iter().all(|r| t.secrets.contains(r)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn knowledge_grows_monotonically_over_prefixes(seed in 0u64..10_000, cut in 0.0f64..1.0) {
        let t = run(&common::random_config(seed, 2)).unwrap().transcript;
        let n = (t.envelopes.len() as f64 * cut) as usize;
        let prefix = t.prefix(n);
        let principals: Vec<String> = t.principals().map(str::to_owned).collect();
        for who in principals.iter().map(String::as_str).chain([principal::OBSERVER]) {
            let part = knowledge(&prefix, who).unwrap();
            let full = knowledge(&t, who).unwrap();
            prop_assert!(part.refs.is_subset(&full.refs), "{} at {}", who, n);
        }
    }
}
