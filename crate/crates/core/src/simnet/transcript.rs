use serde::{Deserialize, Serialize};

use super::{Address, Envelope, SecretDictionary, SecretEntry, SessionTag, Tick};
use crate::compute::MnState;
use crate::crypto::{KeyId, KeyPair};
use crate::ids::{ProcessId, SessionId};
use crate::manager::AgentState;

/// Something an actor reports about itself, outside the message flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    SessionStarted {
        customer: String,
    },
    AgentState {
        process_id: ProcessId,
        state: AgentState,
    },
    MnState {
        session_id: SessionId,
        state: MnState,
    },
    EpochAdvanced {
        epoch: u64,
    },
    Fault {
        error: String,
    },
    DeadLetter {
        from: Address,
        to: Address,
        kind: String,
    },
    ReplayInjected {
        of_tick: Tick,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: Tick,
    pub actor: String,
    pub session: Option<SessionTag>,
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyScope {
    LongTerm,
    Session,
}

/// Inventory entry for one key pair. The secret half is kept so the analysis
/// can decide what each principal was able to open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRecord {
    pub principal: String,
    pub key_id: KeyId,
    pub secret: String,
    pub scope: KeyScope,
    pub session: Option<SessionTag>,
    pub created_at: Tick,
    pub destroyed_at: Option<Tick>,
}

impl KeyRecord {
    pub fn keypair(&self) -> Option<KeyPair> {
        let bytes: [u8; 32] = hex::decode(&self.secret).ok()?.try_into().ok()?;
        Some(KeyPair::from_secret_bytes(bytes))
    }
}

/// Persistent state a principal still holds at the end of a run, one JSON
/// value per stored record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub principal: String,
    pub taken_at: Tick,
    pub records: Vec<serde_json::Value>,
}

/// Append-only record of a run.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    pub envelopes: Vec<Envelope>,
    pub events: Vec<EventRecord>,
    pub keys: Vec<KeyRecord>,
    pub secrets: SecretDictionary,
    pub stores: Vec<StoreSnapshot>,
}

impl Transcript {
    pub fn principals(&self) -> impl Iterator<Item = &str> {
        let mut seen = std::collections::BTreeSet::new();
        self.keys
            .iter()
            .map(|k| k.principal.as_str())
            .filter(move |p| seen.insert(*p))
    }

    pub fn has_principal(&self, p: &str) -> bool {
        self.keys.iter().any(|k| k.principal == p)
    }

    pub fn secret_entries(&self) -> &[SecretEntry] {
        self.secrets.entries()
    }

    pub fn store(&self, principal: &str) -> Option<&StoreSnapshot> {
        self.stores.iter().find(|s| s.principal == principal)
    }

    pub fn faults(&self) -> impl Iterator<Item = &EventRecord> {
        self.events
            .iter()
            .filter(|e| matches!(e.event, Event::Fault { .. }))
    }

    /// Copy of the first `n` envelopes with all inventory and dictionary
    /// data, for prefix analysis.
    pub fn prefix(&self, n: usize) -> Transcript {
        Transcript {
            envelopes: self.envelopes[..n.min(self.envelopes.len())].to_vec(),
            events: self.events.clone(),
            keys: self.keys.clone(),
            secrets: self.secrets.clone(),
            stores: self.stores.clone(),
        }
    }
}
