//! Run-level invariants. Each one is computed from the transcript and session
//! summaries alone, so a saved trace gives the same verdicts as the live run.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ScenarioConfig, SessionSummary};
use crate::compute::{Job, MnState};
use crate::customer::CustomerState;
use crate::ids::{SessionId, TokenId};
use crate::manager::{AgentState, BillingRecord, TokenState};
use crate::simnet::{
    knowledge_in, principal, store_scan, Address, Event, KeyScope, Opened, SecretKind, SessionTag,
    Tick, Transcript, UnitGraph,
};
use crate::wire::Message;

pub const INVARIANTS: [&str; 13] = [
    "session_completion",
    "token_single_use",
    "metadata_only_retention",
    "agent_finality",
    "teardown_finality",
    "billing_correctness",
    "circuit_validity",
    "true_id_confinement",
    "epoch_monotonicity",
    "sn_compartmentalization",
    "pseudonym_use",
    "mn_state_discipline",
    "observer_blindness",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantVerdict {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

type Check = Result<(), String>;

struct Inputs<'a> {
    config: &'a ScenarioConfig,
    t: &'a Transcript,
    sessions: &'a [SessionSummary],
    graph: &'a UnitGraph,
}

pub fn check_invariants(
    config: &ScenarioConfig,
    t: &Transcript,
    sessions: &[SessionSummary],
    graph: &UnitGraph,
) -> Vec<InvariantVerdict> {
    let inputs = Inputs {
        config,
        t,
        sessions,
        graph,
    };
    INVARIANTS
        .iter()
        .map(|&name| {
            let outcome = match name {
                "session_completion" => session_completion(&inputs),
                "token_single_use" => token_single_use(&inputs),
                "metadata_only_retention" => metadata_only_retention(&inputs),
                "agent_finality" => agent_finality(&inputs),
                "teardown_finality" => teardown_finality(&inputs),
                "billing_correctness" => billing_correctness(&inputs),
                "circuit_validity" => circuit_validity(&inputs),
                "true_id_confinement" => true_id_confinement(&inputs),
                "epoch_monotonicity" => epoch_monotonicity(&inputs),
                "sn_compartmentalization" => sn_compartmentalization(&inputs),
                "pseudonym_use" => pseudonym_use(&inputs),
                "mn_state_discipline" => mn_state_discipline(&inputs),
                "observer_blindness" => observer_blindness(&inputs),
                _ => unreachable!("every listed invariant has a check"),
            };
            InvariantVerdict {
                name: name.to_owned(),
                passed: outcome.is_ok(),
                detail: outcome.err(),
            }
        })
        .collect()
}

fn session_completion(i: &Inputs) -> Check {
    for s in i.sessions {
        let expected = s
            .job
            .parse::<Job>()
            .and_then(|j| j.evaluate())
            .map_err(|e| format!("{}: job does not evaluate: {e}", s.tag))?;
        let problem = if s.customer_state != Some(CustomerState::Done) {
            Some(format!("customer ended in {:?}", s.customer_state))
        } else if s.result.as_ref() != Some(&expected) {
            Some(format!("result {:?}, expected {expected}", s.result))
        } else if s.token_state != Some(TokenState::Redeemed) {
            Some(format!("token is {:?}", s.token_state))
        } else if s.agent_state != Some(AgentState::Killed) {
            Some(format!("agent is {:?}", s.agent_state))
        } else if s.billing_records != 1 {
            Some(format!("{} billing records", s.billing_records))
        } else {
            None
        };
        if let Some(p) = problem {
            return Err(format!("{} ({}): {p}", s.tag, s.customer));
        }
    }
    Ok(())
}

/// How many times each token reached the master node inside a request.
pub(crate) fn token_presentations(graph: &UnitGraph) -> BTreeMap<TokenId, usize> {
    let mut counts = BTreeMap::new();
    for e in 0..graph.envelope_count() {
        for &root in graph.roots(e) {
            let Some(Message::MnForward { .. }) = graph.message(root) else {
                continue;
            };
            for &child in &graph.unit(root).children {
                if let Some(Message::MnRequest(req)) = graph.message(child) {
                    *counts.entry(req.token.token_id.clone()).or_default() += 1;
                }
            }
        }
    }
    counts
}

fn token_single_use(i: &Inputs) -> Check {
    match token_presentations(i.graph)
        .into_iter()
        .find(|(_, n)| *n > 1)
    {
        Some((token, n)) => Err(format!("token {token} was presented {n} times")),
        None => Ok(()),
    }
}

fn metadata_only_retention(i: &Inputs) -> Check {
    let allowed = [
        SecretKind::TokenId,
        SecretKind::Amount,
        SecretKind::PaymentRef,
    ];
    let store =
        i.t.store(principal::MANAGER)
            .ok_or("no manager store snapshot")?;
    for r in store_scan(i.t, principal::MANAGER) {
        if !allowed.contains(&r.kind) {
            return Err(format!("manager store retains {r}"));
        }
    }
    for record in &store.records {
        if let Some(live) = record.get("live_agents").and_then(|v| v.as_u64()) {
            if live > 0 {
                return Err(format!("{live} agents still live"));
            }
        }
    }
    Ok(())
}

fn agent_events(
    t: &Transcript,
) -> BTreeMap<crate::ids::ProcessId, Vec<(Tick, Option<SessionTag>, AgentState)>> {
    let mut out: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for e in &t.events {
        if let Event::AgentState { process_id, state } = &e.event {
            out.entry(*process_id)
                .or_default()
                .push((e.tick, e.session, *state));
        }
    }
    out
}

fn agent_finality(i: &Inputs) -> Check {
    for (pid, states) in agent_events(i.t) {
        let killed = states.iter().position(|s| s.2 == AgentState::Killed);
        match killed {
            None => return Err(format!("agent {pid} was never killed")),
            Some(k) if k + 1 != states.len() => {
                return Err(format!("agent {pid} changed state after being killed"))
            }
            Some(k) => {
                let (tick, session, _) = states[k];
                let leaked = i.t.keys.iter().find(|key| {
                    key.principal == principal::MANAGER
                        && key.scope == KeyScope::Session
                        && key.session == session
                        && key.destroyed_at.is_none_or(|d| d > tick)
                });
                if let Some(key) = leaked {
                    return Err(format!("agent {pid} key {} outlived the agent", key.key_id));
                }
            }
        }
    }
    Ok(())
}

fn teardown_finality(i: &Inputs) -> Check {
    let mut killed_at: BTreeMap<SessionTag, Tick> = BTreeMap::new();
    for states in agent_events(i.t).values() {
        for (tick, session, state) in states {
            if let (AgentState::Killed, Some(s)) = (state, session) {
                killed_at.insert(*s, *tick);
            }
        }
    }
    for env in &i.t.envelopes {
        let Some(s) = env.session else { continue };
        if let Some(&kill) = killed_at.get(&s) {
            if env.sent_at > kill {
                return Err(format!(
                    "{s}: {} -> {} sent at tick {} after teardown at {kill}",
                    env.from, env.to, env.sent_at
                ));
            }
        }
    }
    Ok(())
}

fn billing_correctness(i: &Inputs) -> Check {
    let store =
        i.t.store(principal::MANAGER)
            .ok_or("no manager store snapshot")?;
    let records: Vec<BillingRecord> = store
        .records
        .iter()
        .filter_map(|r| serde_json::from_value(r.clone()).ok())
        .collect();
    let price: BTreeMap<_, _> = i
        .config
        .catalog
        .iter()
        .map(|c| (c.service_number, c.unit_price))
        .collect();
    let by_token: BTreeMap<&TokenId, &SessionSummary> = i
        .sessions
        .iter()
        .filter_map(|s| Some((s.token_id.as_ref()?, s)))
        .collect();
    let mut tokens = BTreeSet::new();
    let mut refs = BTreeSet::new();
    for r in &records {
        if !tokens.insert(&r.token_id) {
            return Err(format!("token {} billed twice", r.token_id));
        }
        if !refs.insert(&r.payment_reference) {
            return Err(format!("payment reference {} reused", r.payment_reference));
        }
        let s = by_token
            .get(&r.token_id)
            .ok_or_else(|| format!("record for unknown token {}", r.token_id))?;
        let due = price[&s.service_number];
        if r.amount != due {
            return Err(format!("{} billed {} instead of {due}", s.tag, r.amount));
        }
        if s.receipt.as_ref() != Some(&r.payment_reference) {
            return Err(format!(
                "{} receipt does not match the billing record",
                s.tag
            ));
        }
    }
    let settled = i.sessions.iter().filter(|s| s.receipt.is_some()).count();
    if settled != records.len() {
        return Err(format!(
            "{settled} settled sessions but {} records",
            records.len()
        ));
    }
    Ok(())
}

fn circuit_validity(i: &Inputs) -> Check {
    let holder: BTreeMap<_, &str> =
        i.t.keys
            .iter()
            .filter(|k| k.scope == KeyScope::LongTerm)
            .map(|k| (k.key_id, k.principal.as_str()))
            .collect();
    let epoch_ticks: Vec<Tick> =
        i.t.events
            .iter()
            .filter(|e| matches!(e.event, Event::EpochAdvanced { .. }))
            .map(|e| e.tick)
            .collect();
    let min = i.config.circuit_length as usize;
    for (u, unit) in i.graph.units().iter().enumerate() {
        let Some(Message::CircuitIssued { circuit, .. }) = i.graph.message(u) else {
            continue;
        };
        let sent = i.t.envelopes[unit.first_envelope].sent_at;
        if circuit.len() < min {
            return Err(format!("circuit of length {} issued", circuit.len()));
        }
        let pseudonyms: BTreeSet<_> = circuit.hops.iter().map(|h| &h.pseudonym).collect();
        if pseudonyms.len() != circuit.len() {
            return Err("circuit repeats a hop".into());
        }
        for (n, hop) in circuit.hops.iter().enumerate() {
            let who = holder.get(&hop.key.key_id()).copied().unwrap_or("?");
            let last = n + 1 == circuit.len();
            if last != (who == principal::MASTER) || (!last && !who.starts_with("sn-")) {
                return Err(format!("hop {n} belongs to {who}"));
            }
        }
        let lo = epoch_ticks.iter().filter(|&&t| t < sent).count() as u64;
        let hi = epoch_ticks.iter().filter(|&&t| t <= sent).count() as u64;
        if circuit.epoch < lo || circuit.epoch > hi {
            return Err(format!(
                "circuit stamped epoch {} when {lo} was current",
                circuit.epoch
            ));
        }
    }
    Ok(())
}

fn true_id_confinement(i: &Inputs) -> Check {
    if let Some(r) = i
        .graph
        .all_refs()
        .into_iter()
        .find(|r| r.kind == SecretKind::TrueId)
    {
        return Err(format!("{r} appears in traffic"));
    }
    let true_ids: BTreeSet<&str> =
        i.t.secret_entries()
            .iter()
            .filter(|e| e.kind == SecretKind::TrueId)
            .map(|e| e.value.as_str())
            .collect();
    for env in &i.t.envelopes {
        for addr in [&env.from, &env.to] {
            if true_ids.contains(addr.to_string().as_str()) {
                return Err(format!("true id used as address {addr}"));
            }
        }
    }
    for store in &i.t.stores {
        if let Some(r) = store_scan(i.t, &store.principal)
            .into_iter()
            .find(|r| r.kind == SecretKind::TrueId)
        {
            return Err(format!("{} stores {r}", store.principal));
        }
    }
    Ok(())
}

fn epoch_monotonicity(i: &Inputs) -> Check {
    let mut expected = 1;
    for e in &i.t.events {
        if let Event::EpochAdvanced { epoch } = e.event {
            if epoch != expected {
                return Err(format!("epoch {epoch} followed epoch {}", expected - 1));
            }
            expected += 1;
        }
    }
    Ok(())
}

fn sn_compartmentalization(i: &Inputs) -> Check {
    let slaves: BTreeSet<&str> = i.t.principals().filter(|p| p.starts_with("sn-")).collect();
    for sn in slaves {
        let k = knowledge_in(i.graph, i.t, sn).map_err(|e| e.to_string())?;
        for r in &k.refs {
            let ok = match r.kind {
                SecretKind::HopPseudonym => true,
                SecretKind::SubPayload => {
                    i.t.secrets
                        .lookup(r)
                        .any(|e| e.owner.as_deref() == Some(sn))
                }
                _ => false,
            };
            if !ok {
                return Err(format!("{sn} can read {r}"));
            }
        }
    }
    Ok(())
}

fn pseudonym_use(i: &Inputs) -> Check {
    for e in &i.t.events {
        if let Event::DeadLetter {
            to: to @ Address::Node(_),
            ..
        } = &e.event
        {
            return Err(format!("traffic for {to} found no node"));
        }
    }
    for unit in i.graph.units() {
        if let Some(Opened::Relay { next_hop }) = &unit.opened {
            if !next_hop.as_str().starts_with("ps-") {
                return Err(format!("relay names {next_hop}, not a pseudonym"));
            }
        }
    }
    Ok(())
}

fn mn_state_discipline(i: &Inputs) -> Check {
    const ORDER: [MnState; 4] = [
        MnState::Authenticating,
        MnState::Dispatching,
        MnState::Aggregating,
        MnState::Done,
    ];
    let mut seen: BTreeMap<&SessionId, Vec<MnState>> = BTreeMap::new();
    for e in &i.t.events {
        if let Event::MnState { session_id, state } = &e.event {
            seen.entry(session_id).or_default().push(*state);
        }
    }
    for (session, states) in seen {
        if states.len() > ORDER.len() || states[..] != ORDER[..states.len()] {
            return Err(format!("{session} went through {states:?}"));
        }
    }
    Ok(())
}

fn observer_blindness(i: &Inputs) -> Check {
    let k = knowledge_in(i.graph, i.t, principal::OBSERVER).map_err(|e| e.to_string())?;
    match k.refs.first() {
        Some(r) => Err(format!("observer reads {r}")),
        None => Ok(()),
    }
}
