use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{ScenarioConfig, ScenarioError, ScenarioEvent};
use crate::compute::{Job, MasterNode, SlaveNode, Value};
use crate::crypto::{generate_keypair, KeyPair};
use crate::customer::{Customer, CustomerState};
use crate::directory::{DirectoryServer, NodeRecord, NodeRole, Registry, TrustAnchors};
use crate::ids::{CustomerId, PaymentRef, ProcessId, ServiceNumber, TokenId, TrueId};
use crate::manager::{AgentState, Anchors, Bank, Manager, ServiceCatalog, TokenKey, TokenState};
use crate::rng::{derive_seed, stream};
use crate::simnet::{
    principal, Actor, ActorId, Address, Ctx, Envelope, Event, KeyScope, Network, SecretEntry,
    SecretKind, SessionTag, StoreSnapshot, Transcript,
};

/// End-of-run view of one scripted session, gathered from every actor that
/// took part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub tag: SessionTag,
    pub customer: String,
    pub service_number: ServiceNumber,
    pub job: String,
    pub customer_state: Option<CustomerState>,
    pub result: Option<Value>,
    pub token_id: Option<TokenId>,
    pub token_state: Option<TokenState>,
    pub process_id: Option<ProcessId>,
    pub agent_state: Option<AgentState>,
    pub billing_records: usize,
    pub billed_amount: Option<u64>,
    pub receipt: Option<PaymentRef>,
}

enum Role {
    Customer(Customer),
    Manager(Manager),
    Bank(Bank),
    Directory(DirectoryServer),
    Master(MasterNode),
    Slave(SlaveNode),
}

impl Role {
    fn actor(&mut self) -> &mut dyn Actor {
        match self {
            Role::Customer(a) => a,
            Role::Manager(a) => a,
            Role::Bank(a) => a,
            Role::Directory(a) => a,
            Role::Master(a) => a,
            Role::Slave(a) => a,
        }
    }
}

/// A bootstrapped simulation of one scenario.
pub struct World {
    config: ScenarioConfig,
    net: Network,
    roles: Vec<Role>,
    manager: ActorId,
    directory: ActorId,
    master: ActorId,
    customers: BTreeMap<String, ActorId>,
    sessions: Vec<(SessionTag, String, ServiceNumber, String)>,
}

pub fn slave_label(i: u32) -> String {
    format!("sn-{i:04}")
}

impl World {
    pub fn new(config: &ScenarioConfig) -> Result<Self, ScenarioError> {
        config.validate()?;
        let seed = config.seed;
        let key = |label: &str| generate_keypair(derive_seed(seed, &format!("key/{label}")));
        let mut net = Network::new(config.step_budget);
        let mut roles = Vec::new();
        let mut long_term: Vec<(ActorId, KeyPair)> = Vec::new();

        let ds_key = key(principal::DIRECTORY);
        let manager_key = key(principal::MANAGER);
        let bank_key = key(principal::BANK);
        let mn_key = key(principal::MASTER);
        let anchors = Anchors {
            manager: manager_key.public().clone(),
            master: mn_key.public().clone(),
            directory: ds_key.public().clone(),
            bank: bank_key.public().clone(),
        };
        let mut token_bytes = [0u8; 32];
        stream(seed, "token-key").fill_bytes(&mut token_bytes);
        let token_key = TokenKey::new(token_bytes);

        let mut registry = Registry::new(config.circuit_length as usize)
            .with_trust_anchors(TrustAnchors(config.trust_anchors.clone()));
        let mut names = stream(seed, "pseudonyms");
        let mut nodes: Vec<(String, TrueId, KeyPair, NodeRole)> = (0..config.nodes.slaves)
            .map(|i| {
                let label = slave_label(i);
                let kp = key(&label);
                (
                    label,
                    TrueId::new(format!("node-{i:04}")),
                    kp,
                    NodeRole::Slave,
                )
            })
            .collect();
        nodes.push((
            principal::MASTER.to_owned(),
            TrueId::new("node-master"),
            mn_key.clone(),
            NodeRole::Master,
        ));
        let mut master = None;
        for (label, true_id, kp, role) in nodes {
            let pseudonym = registry.fresh_pseudonym(&mut names);
            registry.register_node(NodeRecord {
                true_id: true_id.clone(),
                pseudonym: pseudonym.clone(),
                public_key: kp.public().clone(),
                role,
            })?;
            let id = net.register(label.clone(), Address::Node(pseudonym));
            net.record_secret(SecretEntry {
                kind: SecretKind::TrueId,
                value: true_id.to_string(),
                session: None,
                owner: Some(label.clone()),
            });
            let rng = stream(seed, &format!("node/{label}"));
            roles.push(match role {
                NodeRole::Slave => Role::Slave(SlaveNode::new(kp.clone(), rng)),
                NodeRole::Master => {
                    master = Some(id);
                    Role::Master(
                        MasterNode::new(kp.clone(), token_key.clone(), rng)
                            .with_min_circuit_length(config.circuit_length as usize),
                    )
                }
            });
            long_term.push((id, kp));
        }

        let directory = net.register(principal::DIRECTORY, Address::Directory);
        roles.push(Role::Directory(DirectoryServer::new(
            ds_key.clone(),
            registry,
            stream(seed, "ds"),
        )));
        long_term.push((directory, ds_key));

        let catalog = ServiceCatalog::new(config.catalog.iter().cloned())?;
        let manager = net.register(principal::MANAGER, Address::Manager);
        roles.push(Role::Manager(
            Manager::new(
                manager_key.clone(),
                catalog,
                token_key,
                anchors.clone(),
                stream(seed, "manager"),
            )
            .with_mode(config.payment_mode)
            .with_circuit_length(config.circuit_length),
        ));
        long_term.push((manager, manager_key));

        let bank = net.register(principal::BANK, Address::Bank);
        roles.push(Role::Bank(Bank::new(
            bank_key.clone(),
            stream(seed, "bank"),
        )));
        long_term.push((bank, bank_key));

        let mut customers = BTreeMap::new();
        for event in &config.events {
            if let ScenarioEvent::Session { customer, .. } = event {
                if customers.contains_key(customer) {
                    continue;
                }
                let index = customers.len() as u32;
                let id = net.register(customer.clone(), Address::Customer(index));
                roles.push(Role::Customer(Customer::new(
                    CustomerId::new(format!("cust-{customer}")),
                    anchors.clone(),
                    stream(seed, &format!("customer/{customer}")),
                )));
                customers.insert(customer.clone(), id);
            }
        }

        for (id, kp) in long_term {
            net.invoke(id, None, |ctx| ctx.key_created(&kp, KeyScope::LongTerm));
        }

        Ok(World {
            config: config.clone(),
            net,
            roles,
            manager,
            directory,
            master: master.expect("one master node is always registered"),
            customers,
            sessions: Vec::new(),
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn transcript(&self) -> &Transcript {
        self.net.transcript()
    }

    pub fn manager(&self) -> &Manager {
        match &self.roles[self.manager] {
            Role::Manager(m) => m,
            _ => unreachable!("manager slot holds the manager"),
        }
    }

    pub fn master(&self) -> &MasterNode {
        match &self.roles[self.master] {
            Role::Master(m) => m,
            _ => unreachable!("master slot holds the master node"),
        }
    }

    pub fn directory(&self) -> &DirectoryServer {
        match &self.roles[self.directory] {
            Role::Directory(d) => d,
            _ => unreachable!("directory slot holds the directory"),
        }
    }

    pub fn customer(&self, name: &str) -> Option<&Customer> {
        match &self.roles[*self.customers.get(name)?] {
            Role::Customer(c) => Some(c),
            _ => None,
        }
    }

    fn deliver(&mut self, until: Option<u64>) -> Result<(), ScenarioError> {
        let roles = &mut self.roles;
        let mut handler =
            |id: ActorId, env: &Envelope, ctx: &mut Ctx<'_>| roles[id].actor().handle(env, ctx);
        match until {
            Some(tick) => self.net.run_until_tick(tick, &mut handler)?,
            None => self.net.run_until_quiescent(&mut handler)?,
        }
        Ok(())
    }

    fn fire(&mut self, event: &ScenarioEvent) -> Result<(), ScenarioError> {
        match event {
            ScenarioEvent::Session {
                customer,
                service,
                job,
                ..
            } => {
                let tag = SessionTag(self.sessions.len() as u32);
                let id = self.customers[customer];
                let parsed: Job = job
                    .parse()
                    .map_err(|e| ScenarioError::Job(format!("{e}")))?;
                self.net.record_event(
                    customer,
                    Some(tag),
                    Event::SessionStarted {
                        customer: customer.clone(),
                    },
                );
                let Role::Customer(c) = &mut self.roles[id] else {
                    unreachable!("customer slot holds a customer");
                };
                let service = *service;
                self.net
                    .invoke(id, Some(tag), |ctx| c.request(service, parsed, ctx));
                self.sessions
                    .push((tag, customer.clone(), service, job.clone()));
            }
            ScenarioEvent::Rotate { .. } => {
                let Role::Directory(ds) = &mut self.roles[self.directory] else {
                    unreachable!("directory slot holds the directory");
                };
                self.net.invoke(self.directory, None, |ctx| {
                    ds.rotate(ctx);
                });
            }
            ScenarioEvent::Replay { session, mode, .. } => {
                self.net.inject_replay(SessionTag(*session), *mode);
            }
        }
        Ok(())
    }

    /// Play every scripted event, drain the network and snapshot what the
    /// manager and master node still hold.
    pub fn run(&mut self) -> Result<(), ScenarioError> {
        let events = self.config.events.clone();
        for event in &events {
            self.deliver(event.at())?;
            self.fire(event)?;
        }
        self.deliver(None)?;
        self.snapshot_stores();
        Ok(())
    }

    fn snapshot_stores(&mut self) {
        let now = self.net.now();
        let snapshot = self.manager().snapshot();
        let mut records: Vec<serde_json::Value> = snapshot
            .billing_records
            .iter()
            .map(|r| serde_json::to_value(r).expect("records serialize"))
            .collect();
        records.push(serde_json::json!({
            "processes_spawned": snapshot.processes_spawned,
            "live_agents": snapshot.live_agents,
        }));
        let ledger = self
            .master()
            .ledger()
            .entries()
            .map(|(id, state)| serde_json::json!({ "token_id": id, "state": state }))
            .collect();
        self.net.record_store(StoreSnapshot {
            principal: principal::MANAGER.to_owned(),
            taken_at: now,
            records,
        });
        self.net.record_store(StoreSnapshot {
            principal: principal::MASTER.to_owned(),
            taken_at: now,
            records: ledger,
        });
    }

    pub fn sessions(&self) -> Vec<SessionSummary> {
        let manager = self.manager();
        let ledger = self.master().ledger();
        let mut seen_per_customer: BTreeMap<&str, usize> = BTreeMap::new();
        self.sessions
            .iter()
            .map(|(tag, customer, service, job)| {
                let nth = seen_per_customer.entry(customer.as_str()).or_default();
                let cs = self
                    .customer(customer)
                    .and_then(|c| c.sessions().get(*nth))
                    .filter(|s| s.tag == *tag);
                *nth += 1;
                let token_id = cs.and_then(|s| s.token.clone());
                let process_id = cs.and_then(|s| s.process_id);
                let records: Vec<_> = manager
                    .billing_records()
                    .iter()
                    .filter(|r| Some(&r.token_id) == token_id.as_ref())
                    .collect();
                SessionSummary {
                    tag: *tag,
                    customer: customer.clone(),
                    service_number: *service,
                    job: job.clone(),
                    customer_state: cs.map(|s| s.state),
                    result: cs.and_then(|s| s.result.clone()),
                    token_state: token_id.as_ref().map(|t| ledger.state(t)),
                    agent_state: process_id.and_then(|p| manager.agent_state(p)),
                    billing_records: records.len(),
                    billed_amount: records.first().map(|r| r.amount),
                    receipt: cs.and_then(|s| s.receipt.clone()),
                    token_id,
                    process_id,
                }
            })
            .collect()
    }

    pub fn into_transcript(self) -> Transcript {
        self.net.into_transcript()
    }
}
