//! Line-delimited JSON trace: a header with the config, then one record per
//! envelope, event, key, secret, store snapshot and session, then a trailer
//! with the counts so that a cut-off file is detected.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{analyze, RunReport, ScenarioConfig, SessionSummary, SCHEMA_VERSION};
use crate::simnet::{
    Address, Adversary, Body, Envelope, EventRecord, KeyRecord, SecretDictionary, SecretEntry,
    SessionTag, StoreSnapshot, Tick, Transcript,
};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    Schema { found: u32 },
    #[error("trace does not start with a header")]
    MissingHeader,
    #[error("trace is truncated: {0}")]
    Truncated(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header {
        schema_version: u32,
        seed: u64,
        config: ScenarioConfig,
    },
    Envelope {
        tick: Tick,
        sent_at: Tick,
        from: Address,
        to: Address,
        kind: String,
        size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<SessionTag>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        injected: bool,
        body: Body,
    },
    Event(EventRecord),
    Key(KeyRecord),
    Secret(SecretEntry),
    Store(StoreSnapshot),
    Session(SessionSummary),
    End {
        envelopes: usize,
        events: usize,
        keys: usize,
        secrets: usize,
        stores: usize,
        sessions: usize,
    },
}

/// Everything needed to recompute a run's verdicts without re-simulating.
#[derive(Debug, Clone)]
pub struct Trace {
    pub config: ScenarioConfig,
    pub transcript: Transcript,
    pub sessions: Vec<SessionSummary>,
}

fn line<W: Write>(w: &mut W, record: &Record) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, record).map_err(std::io::Error::other)?;
    w.write_all(b"\n")
}

pub fn write_trace<W: Write>(
    mut w: W,
    config: &ScenarioConfig,
    t: &Transcript,
    sessions: &[SessionSummary],
) -> std::io::Result<()> {
    line(
        &mut w,
        &Record::Header {
            schema_version: SCHEMA_VERSION,
            seed: config.seed,
            config: config.clone(),
        },
    )?;
    for env in &t.envelopes {
        line(
            &mut w,
            &Record::Envelope {
                tick: env.tick,
                sent_at: env.sent_at,
                from: env.from.clone(),
                to: env.to.clone(),
                kind: env.body.kind().to_owned(),
                size: env.body.size(),
                session: env.session,
                injected: env.injected,
                body: env.body.clone(),
            },
        )?;
    }
    for e in &t.events {
        line(&mut w, &Record::Event(e.clone()))?;
    }
    for k in &t.keys {
        line(&mut w, &Record::Key(k.clone()))?;
    }
    for s in t.secret_entries() {
        line(&mut w, &Record::Secret(s.clone()))?;
    }
    for s in &t.stores {
        line(&mut w, &Record::Store(s.clone()))?;
    }
    for s in sessions {
        line(&mut w, &Record::Session(s.clone()))?;
    }
    line(
        &mut w,
        &Record::End {
            envelopes: t.envelopes.len(),
            events: t.events.len(),
            keys: t.keys.len(),
            secrets: t.secrets.len(),
            stores: t.stores.len(),
            sessions: sessions.len(),
        },
    )?;
    w.flush()
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Trace, TraceError> {
    let mut config = None;
    let mut t = Transcript::default();
    let mut secrets = Vec::new();
    let mut sessions = Vec::new();
    let mut ended = None;
    for (n, text) in r.lines().enumerate() {
        let text = text?;
        let lineno = n + 1;
        if text.trim().is_empty() {
            continue;
        }
        if ended.is_some() {
            return Err(TraceError::Parse {
                line: lineno,
                message: "data after the end record".into(),
            });
        }
        let record: Record = serde_json::from_str(&text).map_err(|e| {
            // A header with another schema may not parse at all; report the
            // version rather than the field mismatch.
            match serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .and_then(|v| v.get("schema_version")?.as_u64())
            {
                Some(v) if n == 0 && v != u64::from(SCHEMA_VERSION) => {
                    TraceError::Schema { found: v as u32 }
                }
                _ => TraceError::Parse {
                    line: lineno,
                    message: e.to_string(),
                },
            }
        })?;
        match record {
            Record::Header {
                schema_version,
                config: c,
                ..
            } => {
                if n != 0 {
                    return Err(TraceError::Parse {
                        line: lineno,
                        message: "header is not the first record".into(),
                    });
                }
                if schema_version != SCHEMA_VERSION {
                    return Err(TraceError::Schema {
                        found: schema_version,
                    });
                }
                config = Some(c);
            }
            _ if config.is_none() => return Err(TraceError::MissingHeader),
            Record::Envelope {
                tick,
                sent_at,
                from,
                to,
                session,
                injected,
                body,
                ..
            } => t.envelopes.push(Envelope {
                tick,
                sent_at,
                from,
                to,
                session,
                injected,
                body,
            }),
            Record::Event(e) => t.events.push(e),
            Record::Key(k) => t.keys.push(k),
            Record::Secret(s) => secrets.push(s),
            Record::Store(s) => t.stores.push(s),
            Record::Session(s) => sessions.push(s),
            Record::End {
                envelopes,
                events,
                keys,
                secrets: n_secrets,
                stores,
                sessions: n_sessions,
            } => ended = Some([envelopes, events, keys, n_secrets, stores, n_sessions]),
        }
    }
    let config = config.ok_or(TraceError::MissingHeader)?;
    let expected = ended.ok_or_else(|| TraceError::Truncated("no end record".into()))?;
    let found = [
        t.envelopes.len(),
        t.events.len(),
        t.keys.len(),
        secrets.len(),
        t.stores.len(),
        sessions.len(),
    ];
    if expected != found {
        return Err(TraceError::Truncated(format!(
            "end record counts {expected:?}, found {found:?}"
        )));
    }
    t.secrets = SecretDictionary::from_entries(secrets);
    Ok(Trace {
        config,
        transcript: t,
        sessions,
    })
}

/// Recompute a run's report from its trace, adding any extra adversary
/// models after the recorded ones.
pub fn replay(trace: &Trace, extra: &[Adversary]) -> RunReport {
    let mut config = trace.config.clone();
    for a in extra {
        if !config.adversaries.contains(a) {
            config.adversaries.push(*a);
        }
    }
    analyze(&config, &trace.transcript, &trace.sessions)
}
