use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::compute::Job;
use crate::directory::{Requester, TrustAnchors, DEFAULT_MIN_CIRCUIT_LENGTH};
use crate::ids::ServiceNumber;
use crate::manager::{CatalogEntry, PaymentMode};
use crate::simnet::{Adversary, ReplayMode, Tick, DEFAULT_STEP_BUDGET};

pub const SCHEMA_VERSION: u32 = 1;

fn one() -> u32 {
    1
}

fn default_budget() -> u64 {
    DEFAULT_STEP_BUDGET
}

fn default_length() -> u32 {
    DEFAULT_MIN_CIRCUIT_LENGTH as u32
}

fn default_anchors() -> BTreeSet<Requester> {
    TrustAnchors::default().0
}

fn all_adversaries() -> Vec<Adversary> {
    Adversary::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeCounts {
    pub slaves: u32,
    #[serde(default = "one")]
    pub masters: u32,
    #[serde(default = "one")]
    pub directories: u32,
    #[serde(default = "one")]
    pub managers: u32,
    #[serde(default = "one")]
    pub banks: u32,
}

impl NodeCounts {
    pub fn slaves(slaves: u32) -> Self {
        NodeCounts {
            slaves,
            masters: 1,
            directories: 1,
            managers: 1,
            banks: 1,
        }
    }
}

/// One scripted step. Without `at` an event fires once the network has gone
/// quiet; with `at` it fires when the clock reaches that tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioEvent {
    Session {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<Tick>,
        customer: String,
        service: ServiceNumber,
        job: String,
    },
    Rotate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<Tick>,
    },
    /// Duplicate the manager's onion cell of session number `session`
    /// (counting session events from zero).
    Replay {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<Tick>,
        session: u32,
        #[serde(default = "replay_once")]
        mode: ReplayMode,
    },
}

fn replay_once() -> ReplayMode {
    ReplayMode::Once
}

impl ScenarioEvent {
    pub fn at(&self) -> Option<Tick> {
        match self {
            ScenarioEvent::Session { at, .. }
            | ScenarioEvent::Rotate { at }
            | ScenarioEvent::Replay { at, .. } => *at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub payment_mode: PaymentMode,
    #[serde(default = "default_budget")]
    pub step_budget: u64,
    #[serde(default = "default_length")]
    pub circuit_length: u32,
    #[serde(default = "default_anchors")]
    pub trust_anchors: BTreeSet<Requester>,
    #[serde(default = "all_adversaries")]
    pub adversaries: Vec<Adversary>,
    pub nodes: NodeCounts,
    pub catalog: Vec<CatalogEntry>,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    /// Two customers separated by a pseudonym rotation.
    pub fn canonical(seed: u64, slaves: u32) -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            seed,
            payment_mode: PaymentMode::Postpaid,
            step_budget: DEFAULT_STEP_BUDGET,
            circuit_length: default_length(),
            trust_anchors: default_anchors(),
            adversaries: all_adversaries(),
            nodes: NodeCounts::slaves(slaves),
            catalog: vec![
                CatalogEntry {
                    service_number: ServiceNumber(1),
                    service_type: "web-compute".into(),
                    unit_price: 12,
                },
                CatalogEntry {
                    service_number: ServiceNumber(2),
                    service_type: "text-render".into(),
                    unit_price: 5,
                },
            ],
            events: vec![
                ScenarioEvent::Session {
                    at: None,
                    customer: "alice".into(),
                    service: ServiceNumber(1),
                    job: "sum[1,2,3,4]".into(),
                },
                ScenarioEvent::Rotate { at: None },
                ScenarioEvent::Session {
                    at: None,
                    customer: "bob".into(),
                    service: ServiceNumber(2),
                    job: r#"concat["anon","ymous"," cloud"]"#.into(),
                },
            ],
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError::Parse {
                line,
                message: e.message().to_owned(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn session_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, ScenarioEvent::Session { .. }))
            .count()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if (self.circuit_length as usize) < DEFAULT_MIN_CIRCUIT_LENGTH {
            return Err(invalid(
                "circuit_length",
                format!(
                    "must be at least {DEFAULT_MIN_CIRCUIT_LENGTH} (three onion layers), got {}",
                    self.circuit_length
                ),
            ));
        }
        if self.nodes.slaves < self.circuit_length - 1 {
            return Err(invalid(
                "nodes.slaves",
                format!(
                    "capacity: a circuit of length {} needs {} slave nodes, got {}",
                    self.circuit_length,
                    self.circuit_length - 1,
                    self.nodes.slaves
                ),
            ));
        }
        for (field, n) in [
            ("nodes.masters", self.nodes.masters),
            ("nodes.directories", self.nodes.directories),
            ("nodes.managers", self.nodes.managers),
            ("nodes.banks", self.nodes.banks),
        ] {
            if n != 1 {
                return Err(invalid(field, format!("exactly one is required, got {n}")));
            }
        }
        if self.step_budget == 0 {
            return Err(invalid("step_budget", "must be positive"));
        }
        if self.catalog.is_empty() {
            return Err(invalid("catalog", "at least one service is required"));
        }
        let mut services = BTreeSet::new();
        for (i, entry) in self.catalog.iter().enumerate() {
            if !services.insert(entry.service_number) {
                return Err(invalid(
                    format!("catalog[{i}].service_number"),
                    format!("{} is listed twice", entry.service_number),
                ));
            }
            if entry.unit_price == 0 {
                return Err(invalid(
                    format!("catalog[{i}].unit_price"),
                    "must be positive",
                ));
            }
        }
        let mut sessions = 0u32;
        let mut last_at = 0;
        for (i, event) in self.events.iter().enumerate() {
            if let Some(at) = event.at() {
                if at < last_at {
                    return Err(invalid(
                        format!("events[{i}].at"),
                        format!("tick {at} is earlier than a previous event at {last_at}"),
                    ));
                }
                last_at = at;
            }
            match event {
                ScenarioEvent::Session {
                    customer,
                    service,
                    job,
                    ..
                } => {
                    if customer.is_empty()
                        || !customer
                            .bytes()
                            .all(|b| b.is_ascii_alphanumeric() || b == b'_')
                    {
                        return Err(invalid(
                            format!("events[{i}].customer"),
                            "must be a non-empty name of letters, digits and underscores",
                        ));
                    }
                    if !services.contains(service) {
                        return Err(invalid(
                            format!("events[{i}].service"),
                            format!("{service} is not in the catalog"),
                        ));
                    }
                    if let Err(e) = job.parse::<Job>() {
                        return Err(invalid(format!("events[{i}].job"), e.to_string()));
                    }
                    sessions += 1;
                }
                ScenarioEvent::Rotate { .. } => {}
                ScenarioEvent::Replay { session, .. } => {
                    if *session < sessions {
                        return Err(invalid(
                            format!("events[{i}].session"),
                            format!("replay must be armed before session {session} starts"),
                        ));
                    }
                }
            }
        }
        for (i, event) in self.events.iter().enumerate() {
            if let ScenarioEvent::Replay { session, .. } = event {
                if *session >= sessions {
                    return Err(invalid(
                        format!("events[{i}].session"),
                        format!("there is no session {session}"),
                    ));
                }
            }
        }
        Ok(())
    }
}
