mod common;

use anoncloud_core::customer::CustomerState;
use anoncloud_core::manager::{AgentState, PaymentMode, TokenState};
use anoncloud_core::scenario::{run, ScenarioConfig, SessionSummary, World, INVARIANTS};
use anoncloud_core::simnet::{Address, Body, Control, Event, Network};
use common::{billing_oracle, job_oracle, random_config};

fn assert_settled(config: &ScenarioConfig, s: &SessionSummary) {
    assert_eq!(s.customer_state, Some(CustomerState::Done), "{s:?}");
    assert_eq!(s.token_state, Some(TokenState::Redeemed));
    assert_eq!(s.agent_state, Some(AgentState::Killed));
    assert_eq!(s.billing_records, 1);
    assert_eq!(
        s.billed_amount,
        Some(billing_oracle(config, s.service_number))
    );
    assert!(s.receipt.is_some());
    assert_eq!(s.result.as_ref(), Some(&job_oracle(&s.job)));
}

#[test]
fn canonical_postpaid_settles_every_session() {
    let config = ScenarioConfig::canonical(11, 3);
    let out = run(&config).unwrap();
    assert!(out.report.passed(), "{}", out.report.render());
    assert_eq!(out.sessions.len(), 2);
    for s in &out.sessions {
        assert_settled(&config, s);
    }
    assert_eq!(out.report.billing.total_amount, 12 + 5);
}

#[test]
fn canonical_prepaid_settles_every_session() {
    let mut config = ScenarioConfig::canonical(11, 3);
    config.payment_mode = PaymentMode::Prepaid;
    let out = run(&config).unwrap();
    assert!(out.report.passed(), "{}", out.report.render());
    for s in &out.sessions {
        assert_settled(&config, s);
    }
}

#[test]
fn prepaid_pays_before_dispatch_and_postpaid_after() {
    for (mode, pay_first) in [(PaymentMode::Prepaid, true), (PaymentMode::Postpaid, false)] {
        let mut config = ScenarioConfig::canonical(3, 3);
        config.payment_mode = mode;
        let t = run(&config).unwrap().transcript;
        let first = |pred: &dyn Fn(&anoncloud_core::simnet::Envelope) -> bool| {
            t.envelopes.iter().position(pred).expect("envelope present")
        };
        let to_bank = first(&|e| e.to == Address::Bank);
        let first_cell = first(&|e| matches!(e.body, Body::Cell { .. }));
        assert_eq!(to_bank < first_cell, pay_first, "{mode}");
    }
}

#[test]
fn randomized_scenarios_match_the_oracles() {
    for seed in 0..8 {
        let config = random_config(seed, 4);
        let out = run(&config).unwrap();
        assert!(out.report.passed(), "seed {seed}\n{}", out.report.render());
        for s in &out.sessions {
            assert_settled(&config, s);
        }
    }
}

#[test]
fn report_lists_each_invariant_once() {
    let out = run(&ScenarioConfig::canonical(5, 4)).unwrap();
    let names: Vec<&str> = out
        .report
        .invariants
        .iter()
        .map(|v| v.name.as_str())
        .collect();
    assert_eq!(names, INVARIANTS);
}

#[test]
fn scenario_without_events_has_an_empty_transcript() {
    let mut config = ScenarioConfig::canonical(1, 3);
    config.events.clear();
    let out = run(&config).unwrap();
    assert!(out.transcript.envelopes.is_empty());
    assert!(out.sessions.is_empty());
    assert!(out.report.passed());
}

#[test]
fn same_seed_gives_identical_transcripts_and_other_seeds_differ() {
    let bytes = |seed| {
        let t = run(&ScenarioConfig::canonical(seed, 5)).unwrap().transcript;
        serde_json::to_vec(&t.envelopes).unwrap()
    };
    assert_eq!(bytes(42), bytes(42));
    assert_ne!(bytes(42), bytes(43));
}

#[test]
fn world_exposes_final_actor_state() {
    let config = ScenarioConfig::canonical(8, 3);
    let mut world = World::new(&config).unwrap();
    world.run().unwrap();
    assert_eq!(world.manager().billing_records().len(), 2);
    assert_eq!(world.master().open_sessions(), 0);
    assert_eq!(world.directory().registry().epoch().epoch_number, 1);
    let alice = world.customer("alice").unwrap();
    assert_eq!(alice.sessions().len(), 1);
    assert!(world.customer("mallory").is_none());
}

#[test]
fn envelope_to_an_unbound_address_is_a_dead_letter() {
    let mut net = Network::new(100);
    let a = net.register("a", Address::Customer(0));
    net.invoke(a, None, |ctx| {
        ctx.send(
            Address::Bank,
            Body::Control {
                control: Control::EpochAdvanced { epoch: 1 },
            },
        )
    });
    net.run_until_quiescent(&mut |_, _, _| panic!("nothing is bound"))
        .unwrap();
    let t = net.transcript();
    assert!(t.envelopes.is_empty());
    assert!(matches!(
        &t.events[..],
        [rec] if matches!(&rec.event, Event::DeadLetter { to: Address::Bank, .. })
    ));
}
