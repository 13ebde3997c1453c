//! Customer linkage verdicts for the built-in adversary models.
//!
//! Readable units are grouped into components: a unit joins its readable
//! children, and any two units carrying the same session-unique identifier
//! join each other. Records the adversary stores are units too. A customer is
//! linked to something when one component holds both.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::knowledge::{record_refs, UnitGraph};
use super::{principal, Event, SecretKind, SecretRef, SessionTag, Transcript};
use crate::crypto::KeyId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Adversary {
    /// Sees every envelope, holds no keys.
    GlobalObserver,
    /// The manager's surviving keys and store, taken after sessions close.
    PostSessionManager,
    /// Every manager and master node key ever held, plus both stores.
    ManagerMnCollusion,
}

impl Adversary {
    pub const ALL: [Adversary; 3] = [
        Adversary::GlobalObserver,
        Adversary::PostSessionManager,
        Adversary::ManagerMnCollusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Adversary::GlobalObserver => "observer",
            Adversary::PostSessionManager => "post-session-manager",
            Adversary::ManagerMnCollusion => "manager-mn-collusion",
        }
    }

    pub fn keys(self, t: &Transcript) -> BTreeSet<KeyId> {
        let held = |p: &str, live_only: bool| {
            t.keys
                .iter()
                .filter(move |k| k.principal == p && (!live_only || k.destroyed_at.is_none()))
                .map(|k| k.key_id)
                .collect::<Vec<_>>()
        };
        match self {
            Adversary::GlobalObserver => BTreeSet::new(),
            Adversary::PostSessionManager => held(principal::MANAGER, true).into_iter().collect(),
            Adversary::ManagerMnCollusion => held(principal::MANAGER, false)
                .into_iter()
                .chain(held(principal::MASTER, false))
                .collect(),
        }
    }

    pub fn stores(self) -> &'static [&'static str] {
        match self {
            Adversary::GlobalObserver => &[],
            Adversary::PostSessionManager => &[principal::MANAGER],
            Adversary::ManagerMnCollusion => &[principal::MANAGER, principal::MASTER],
        }
    }

    pub fn expectation(self) -> &'static str {
        match self {
            Adversary::GlobalObserver => "no linkage of any kind",
            Adversary::PostSessionManager => "payment metadata linkage only",
            Adversary::ManagerMnCollusion => "customers linked to content or nodes",
        }
    }
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown adversary model {0:?} (expected observer, post-session-manager or manager-mn-collusion)")]
pub struct UnknownAdversary(pub String);

impl FromStr for Adversary {
    type Err = UnknownAdversary;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Adversary::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownAdversary(s.to_owned()))
    }
}

impl Serialize for Adversary {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Adversary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomerLinkage {
    pub customer: String,
    /// Identity joined to the job, a sub-job or the result.
    pub content: bool,
    /// Identity joined to a node that carried the session.
    pub sn_set: bool,
    /// Payment reference joined to the session's token and amount.
    pub payment: bool,
    /// Identity joined to the token or payment reference.
    pub identity_payment: bool,
    /// Whether the session was settled at the bank at all.
    pub billed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkageReport {
    pub adversary: Adversary,
    pub expected: String,
    pub met: bool,
    pub known_kinds: BTreeSet<SecretKind>,
    pub customers: Vec<CustomerLinkage>,
}

impl LinkageReport {
    pub fn any_linkage(&self) -> bool {
        self.customers
            .iter()
            .any(|c| c.content || c.sn_set || c.identity_payment)
    }
}

fn meets(adversary: Adversary, customers: &[CustomerLinkage]) -> bool {
    match adversary {
        Adversary::GlobalObserver => customers
            .iter()
            .all(|c| !c.content && !c.sn_set && !c.payment && !c.identity_payment),
        Adversary::PostSessionManager => customers
            .iter()
            .all(|c| !c.content && !c.sn_set && !c.identity_payment && c.payment == c.billed),
        // Vacuous for a run without sessions: there is nobody to link.
        Adversary::ManagerMnCollusion => customers.iter().all(|c| c.content || c.sn_set),
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Sessions started per customer, from the run's own bookkeeping.
pub fn customer_sessions(t: &Transcript) -> BTreeMap<String, BTreeSet<SessionTag>> {
    let mut out: BTreeMap<String, BTreeSet<SessionTag>> = BTreeMap::new();
    for e in &t.events {
        if let (Event::SessionStarted { customer }, Some(s)) = (&e.event, e.session) {
            out.entry(customer.clone()).or_default().insert(s);
        }
    }
    out
}

pub fn linkage_report(t: &Transcript, adversary: Adversary) -> LinkageReport {
    linkage_report_in(&UnitGraph::build(t), t, adversary)
}

/// [`linkage_report`] over a graph that has already been built for `t`.
pub fn linkage_report_in(graph: &UnitGraph, t: &Transcript, adversary: Adversary) -> LinkageReport {
    let readable = graph.readable(&adversary.keys(t));
    let n_units = graph.len();
    let n_env = graph.envelope_count();

    // Node ids: units, then one header node per envelope, then store records.
    let mut node_refs: Vec<&BTreeSet<SecretRef>> = Vec::new();
    let empty = BTreeSet::new();
    for (u, unit) in graph.units().iter().enumerate() {
        node_refs.push(if readable[u] { &unit.refs } else { &empty });
    }
    for i in 0..n_env {
        node_refs.push(graph.clear(i));
    }
    let stored: Vec<BTreeSet<SecretRef>> = adversary
        .stores()
        .iter()
        .filter_map(|p| t.store(p))
        .flat_map(|s| &s.records)
        .map(|r| record_refs(&t.secrets, r))
        .collect();
    node_refs.extend(stored.iter());

    let mut uf = UnionFind((0..node_refs.len()).collect());
    for (u, unit) in graph.units().iter().enumerate() {
        if readable[u] {
            for &c in &unit.children {
                if readable[c] {
                    uf.union(u, c);
                }
            }
        }
    }
    for i in 0..n_env {
        for &r in graph.roots(i) {
            if readable[r] {
                uf.union(n_units + i, r);
            }
        }
    }
    let mut first_holder: BTreeMap<&SecretRef, usize> = BTreeMap::new();
    for (node, refs) in node_refs.iter().enumerate() {
        for r in refs.iter().filter(|r| r.kind.is_bridging()) {
            match first_holder.get(r) {
                Some(&other) => uf.union(node, other),
                None => {
                    first_holder.insert(r, node);
                }
            }
        }
    }
    let mut components: BTreeMap<usize, BTreeSet<&SecretRef>> = BTreeMap::new();
    for (node, refs) in node_refs.iter().enumerate() {
        if !refs.is_empty() {
            let root = uf.find(node);
            components.entry(root).or_default().extend(refs.iter());
        }
    }
    let known_kinds = components.values().flatten().map(|r| r.kind).collect();

    let customers: Vec<CustomerLinkage> = customer_sessions(t)
        .into_iter()
        .map(|(customer, sessions)| {
            let own = |kinds: &[SecretKind]| -> BTreeSet<SecretRef> {
                t.secret_entries()
                    .iter()
                    .filter(|e| {
                        kinds.contains(&e.kind) && e.session.is_some_and(|s| sessions.contains(&s))
                    })
                    .map(|e| e.as_ref())
                    .collect()
            };
            let ids = own(&[SecretKind::CustomerId]);
            let content = own(&[
                SecretKind::JobContent,
                SecretKind::SubPayload,
                SecretKind::ServiceResult,
            ]);
            let hops = own(&[SecretKind::HopPseudonym]);
            let tokens = own(&[SecretKind::TokenId]);
            let amounts = own(&[SecretKind::Amount]);
            let payrefs = own(&[SecretKind::PaymentRef]);
            let hits = |c: &BTreeSet<&SecretRef>, set: &BTreeSet<SecretRef>| {
                set.iter().any(|r| c.contains(r))
            };
            let linked = |a: &BTreeSet<SecretRef>, b: &BTreeSet<SecretRef>| {
                components.values().any(|c| hits(c, a) && hits(c, b))
            };
            let mut tok_or_ref = tokens.clone();
            tok_or_ref.extend(payrefs.iter().cloned());
            CustomerLinkage {
                content: linked(&ids, &content),
                sn_set: linked(&ids, &hops),
                payment: components
                    .values()
                    .any(|c| hits(c, &payrefs) && hits(c, &tokens) && hits(c, &amounts)),
                identity_payment: linked(&ids, &tok_or_ref),
                billed: !payrefs.is_empty(),
                customer,
            }
        })
        .collect();

    LinkageReport {
        adversary,
        expected: adversary.expectation().to_owned(),
        met: meets(adversary, &customers),
        known_kinds,
        customers,
    }
}
