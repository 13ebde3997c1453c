use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Address, Body, Envelope, Event, EventRecord, KeyRecord, KeyScope, SecretEntry, SecretKind,
    SessionTag, Tick, Transcript,
};
use crate::crypto::{KeyId, KeyPair};

pub type ActorId = usize;

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("livelock suspected: step budget of {budget} deliveries exhausted")]
    LivelockSuspected { budget: u64 },
}

enum Effect {
    Send {
        to: Address,
        body: Body,
        session: Option<SessionTag>,
    },
    Event(Event),
    Secret {
        kind: SecretKind,
        value: String,
        owner: Option<Address>,
    },
    KeyCreated {
        record: KeyRecord,
    },
    KeyDestroyed(KeyId),
    Rebind(Vec<(Address, Address)>),
}

/// Handle given to an actor for the duration of one delivery. Everything the
/// actor does to the outside world goes through here and takes effect after
/// the handler returns.
pub struct Ctx<'a> {
    now: Tick,
    me: Address,
    session: Option<SessionTag>,
    principal: &'a str,
    bindings: &'a BTreeMap<Address, ActorId>,
    effects: Vec<Effect>,
}

impl Ctx<'_> {
    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn me(&self) -> &Address {
        &self.me
    }

    pub fn session(&self) -> Option<SessionTag> {
        self.session
    }

    pub fn is_bound(&self, addr: &Address) -> bool {
        self.bindings.contains_key(addr)
    }

    pub fn send(&mut self, to: Address, body: Body) {
        let session = self.session;
        self.effects.push(Effect::Send { to, body, session });
    }

    pub fn emit(&mut self, event: Event) {
        self.effects.push(Effect::Event(event));
    }

    pub fn fault(&mut self, error: impl fmt::Display) {
        self.emit(Event::Fault {
            error: error.to_string(),
        });
    }

    pub fn secret(&mut self, kind: SecretKind, value: impl ToString) {
        self.effects.push(Effect::Secret {
            kind,
            value: value.to_string(),
            owner: None,
        });
    }

    /// Register a secret that belongs to whichever node `owner` currently
    /// resolves to.
    pub fn secret_of(&mut self, kind: SecretKind, value: impl ToString, owner: Address) {
        self.effects.push(Effect::Secret {
            kind,
            value: value.to_string(),
            owner: Some(owner),
        });
    }

    pub fn key_created(&mut self, kp: &KeyPair, scope: KeyScope) {
        let record = KeyRecord {
            principal: self.principal.to_owned(),
            key_id: kp.key_id(),
            secret: hex::encode(kp.secret_bytes()),
            scope,
            session: self.session,
            created_at: self.now,
            destroyed_at: None,
        };
        self.effects.push(Effect::KeyCreated { record });
    }

    pub fn key_destroyed(&mut self, id: KeyId) {
        self.effects.push(Effect::KeyDestroyed(id));
    }

    /// Move node bindings from old to new addresses in one step.
    pub fn rebind(&mut self, moves: Vec<(Address, Address)>) {
        self.effects.push(Effect::Rebind(moves));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    Once,
    Loop,
}

/// Duplicates the manager's first onion cell of a session when it is
/// delivered. In loop mode every delivered copy is duplicated again.
#[derive(Debug, Clone)]
struct ReplayInjector {
    session: SessionTag,
    mode: ReplayMode,
    fired: bool,
}

/// Single-threaded FIFO network. Delivery is run-to-completion: a handler
/// sees one envelope and its effects are applied before the next delivery.
pub struct Network {
    bindings: BTreeMap<Address, ActorId>,
    addresses: Vec<Address>,
    labels: Vec<String>,
    queue: VecDeque<Envelope>,
    tick: Tick,
    delivered: u64,
    budget: u64,
    injectors: Vec<ReplayInjector>,
    transcript: Transcript,
}

impl Network {
    pub fn new(budget: u64) -> Self {
        Network {
            bindings: BTreeMap::new(),
            addresses: Vec::new(),
            labels: Vec::new(),
            queue: VecDeque::new(),
            tick: 0,
            delivered: 0,
            budget,
            injectors: Vec::new(),
            transcript: Transcript::default(),
        }
    }

    /// Add an actor under a principal label and bind it to `addr`.
    pub fn register(&mut self, label: impl Into<String>, addr: Address) -> ActorId {
        let id = self.labels.len();
        self.labels.push(label.into());
        self.bindings.insert(addr.clone(), id);
        self.addresses.push(addr);
        id
    }

    pub fn label(&self, id: ActorId) -> &str {
        &self.labels[id]
    }

    pub fn address(&self, id: ActorId) -> &Address {
        &self.addresses[id]
    }

    pub fn resolve(&self, addr: &Address) -> Option<ActorId> {
        self.bindings.get(addr).copied()
    }

    pub fn now(&self) -> Tick {
        self.tick
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn inject_replay(&mut self, session: SessionTag, mode: ReplayMode) {
        self.injectors.push(ReplayInjector {
            session,
            mode,
            fired: false,
        });
    }

    /// Record a dictionary entry that is not tied to any delivery.
    pub fn record_secret(&mut self, entry: SecretEntry) {
        self.transcript.secrets.insert(entry);
    }

    pub fn record_store(&mut self, store: super::StoreSnapshot) {
        self.transcript.stores.push(store);
    }

    pub fn record_event(&mut self, actor: &str, session: Option<SessionTag>, event: Event) {
        self.transcript.events.push(EventRecord {
            tick: self.tick,
            actor: actor.to_owned(),
            session,
            event,
        });
    }

    /// Run `f` as actor `id` outside any delivery, e.g. for a scenario event.
    pub fn invoke<F>(&mut self, id: ActorId, session: Option<SessionTag>, f: F)
    where
        F: FnOnce(&mut Ctx<'_>),
    {
        let mut ctx = Ctx {
            now: self.tick,
            me: self.addresses[id].clone(),
            session,
            principal: &self.labels[id],
            bindings: &self.bindings,
            effects: Vec::new(),
        };
        f(&mut ctx);
        let effects = ctx.effects;
        self.apply(id, session, effects);
    }

    /// Deliver the next queued envelope. Returns `Ok(false)` when the queue
    /// is empty.
    pub fn step<H>(&mut self, handler: &mut H) -> Result<bool, SimError>
    where
        H: FnMut(ActorId, &Envelope, &mut Ctx<'_>),
    {
        let Some(mut env) = self.queue.pop_front() else {
            return Ok(false);
        };
        let Some(id) = self.resolve(&env.to) else {
            self.record_event(
                "network",
                env.session,
                Event::DeadLetter {
                    from: env.from.clone(),
                    to: env.to.clone(),
                    kind: env.body.kind().to_owned(),
                },
            );
            return Ok(true);
        };
        if self.delivered >= self.budget {
            return Err(SimError::LivelockSuspected {
                budget: self.budget,
            });
        }
        self.delivered += 1;
        self.tick += 1;
        env.tick = self.tick;
        self.transcript.envelopes.push(env.clone());
        self.maybe_replay(&env);

        let mut ctx = Ctx {
            now: self.tick,
            me: self.addresses[id].clone(),
            session: env.session,
            principal: &self.labels[id],
            bindings: &self.bindings,
            effects: Vec::new(),
        };
        handler(id, &env, &mut ctx);
        let effects = ctx.effects;
        self.apply(id, env.session, effects);
        Ok(true)
    }

    pub fn run_until_quiescent<H>(&mut self, handler: &mut H) -> Result<(), SimError>
    where
        H: FnMut(ActorId, &Envelope, &mut Ctx<'_>),
    {
        while self.step(handler)? {}
        Ok(())
    }

    /// Deliver until the clock reaches `tick` or the network goes quiet.
    pub fn run_until_tick<H>(&mut self, tick: Tick, handler: &mut H) -> Result<(), SimError>
    where
        H: FnMut(ActorId, &Envelope, &mut Ctx<'_>),
    {
        while self.tick < tick && self.step(handler)? {}
        Ok(())
    }

    fn maybe_replay(&mut self, env: &Envelope) {
        if env.from != Address::Manager || !matches!(env.body, Body::Cell { .. }) {
            return;
        }
        let Some(session) = env.session else { return };
        let mut copies = 0;
        for inj in &mut self.injectors {
            if inj.session == session && (inj.mode == ReplayMode::Loop || !inj.fired) {
                inj.fired = true;
                copies += 1;
            }
        }
        for _ in 0..copies {
            let mut copy = env.clone();
            copy.tick = 0;
            copy.sent_at = self.tick;
            copy.injected = true;
            self.queue.push_back(copy);
            self.record_event(
                "injector",
                Some(session),
                Event::ReplayInjected { of_tick: self.tick },
            );
        }
    }

    fn apply(&mut self, id: ActorId, session: Option<SessionTag>, effects: Vec<Effect>) {
        for effect in effects {
            match effect {
                Effect::Send { to, body, session } => {
                    self.queue.push_back(Envelope {
                        tick: 0,
                        sent_at: self.tick,
                        from: self.addresses[id].clone(),
                        to,
                        session,
                        injected: false,
                        body,
                    });
                }
                Effect::Event(event) => {
                    let actor = self.labels[id].clone();
                    self.record_event(&actor, session, event);
                }
                Effect::Secret { kind, value, owner } => {
                    let owner = owner.map(|a| match self.resolve(&a) {
                        Some(owner) => self.labels[owner].clone(),
                        None => a.to_string(),
                    });
                    self.transcript.secrets.insert(SecretEntry {
                        kind,
                        value,
                        session,
                        owner,
                    });
                }
                Effect::KeyCreated { record } => self.transcript.keys.push(record),
                Effect::KeyDestroyed(key_id) => {
                    let now = self.tick;
                    for k in &mut self.transcript.keys {
                        if k.key_id == key_id && k.destroyed_at.is_none() {
                            k.destroyed_at = Some(now);
                        }
                    }
                }
                Effect::Rebind(moves) => {
                    let moved: Vec<(ActorId, Address)> = moves
                        .into_iter()
                        .filter_map(|(old, new)| self.bindings.remove(&old).map(|id| (id, new)))
                        .collect();
                    for (actor, new) in moved {
                        self.bindings.insert(new.clone(), actor);
                        self.addresses[actor] = new;
                    }
                }
            }
        }
    }
}
