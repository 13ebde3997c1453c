//! The known-secrets dictionary: every value the analysis treats as
//! sensitive, registered by the actor that created it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SessionTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecretKind {
    CustomerId,
    JobContent,
    SubPayload,
    ServiceResult,
    TokenId,
    SessionId,
    ProcessId,
    CustomerKey,
    PaymentHandle,
    PaymentRef,
    Amount,
    HopPseudonym,
    TrueId,
}

impl SecretKind {
    pub const ALL: [SecretKind; 13] = [
        SecretKind::CustomerId,
        SecretKind::JobContent,
        SecretKind::SubPayload,
        SecretKind::ServiceResult,
        SecretKind::TokenId,
        SecretKind::SessionId,
        SecretKind::ProcessId,
        SecretKind::CustomerKey,
        SecretKind::PaymentHandle,
        SecretKind::PaymentRef,
        SecretKind::Amount,
        SecretKind::HopPseudonym,
        SecretKind::TrueId,
    ];

    /// Identifiers unique to one session, which tie together any two
    /// plaintexts that both carry them.
    pub fn is_bridging(self) -> bool {
        matches!(
            self,
            SecretKind::CustomerId
                | SecretKind::TokenId
                | SecretKind::SessionId
                | SecretKind::ProcessId
                | SecretKind::CustomerKey
                | SecretKind::PaymentHandle
                | SecretKind::PaymentRef
        )
    }

    /// Values distinctive enough to be found by scanning raw bytes.
    pub fn is_scannable(self) -> bool {
        !matches!(
            self,
            SecretKind::JobContent
                | SecretKind::SubPayload
                | SecretKind::ServiceResult
                | SecretKind::Amount
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            SecretKind::CustomerId => "customer_id",
            SecretKind::JobContent => "job_content",
            SecretKind::SubPayload => "sub_payload",
            SecretKind::ServiceResult => "service_result",
            SecretKind::TokenId => "token_id",
            SecretKind::SessionId => "session_id",
            SecretKind::ProcessId => "process_id",
            SecretKind::CustomerKey => "customer_key",
            SecretKind::PaymentHandle => "payment_handle",
            SecretKind::PaymentRef => "payment_reference",
            SecretKind::Amount => "amount",
            SecretKind::HopPseudonym => "hop_pseudonym",
            SecretKind::TrueId => "true_id",
        }
    }
}

impl fmt::Display for SecretKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SecretRef {
    pub kind: SecretKind,
    pub value: String,
}

impl SecretRef {
    pub fn new(kind: SecretKind, value: impl ToString) -> Self {
        SecretRef {
            kind,
            value: value.to_string(),
        }
    }
}

impl fmt::Display for SecretRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.kind, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretEntry {
    pub kind: SecretKind,
    pub value: String,
    pub session: Option<SessionTag>,
    /// Principal label of the node a value belongs to, for per-node secrets.
    pub owner: Option<String>,
}

impl SecretEntry {
    pub fn as_ref(&self) -> SecretRef {
        SecretRef::new(self.kind, &self.value)
    }
}

fn is_token_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b':' | b'.' | b'@')
}

/// Maximal runs of identifier characters in `bytes`.
pub fn tokens(bytes: &[u8]) -> impl Iterator<Item = &str> {
    bytes
        .split(|b| !is_token_byte(*b))
        .filter(|t| !t.is_empty())
        .map(|t| std::str::from_utf8(t).expect("token bytes are ascii"))
}

#[derive(Debug, Clone, Default)]
pub struct SecretDictionary {
    entries: Vec<SecretEntry>,
    by_ref: BTreeMap<SecretRef, Vec<usize>>,
    scannable: BTreeMap<String, BTreeSet<SecretKind>>,
}

impl SecretDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = SecretEntry>) -> Self {
        let mut d = Self::new();
        for e in entries {
            d.insert(e);
        }
        d
    }

    pub fn insert(&mut self, entry: SecretEntry) {
        let idx = self.entries.len();
        if entry.kind.is_scannable() {
            self.scannable
                .entry(entry.value.clone())
                .or_default()
                .insert(entry.kind);
        }
        self.by_ref.entry(entry.as_ref()).or_default().push(idx);
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[SecretEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, r: &SecretRef) -> bool {
        self.by_ref.contains_key(r)
    }

    pub fn lookup(&self, r: &SecretRef) -> impl Iterator<Item = &SecretEntry> {
        self.by_ref
            .get(r)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    /// Dictionary values of scannable kinds that occur as whole tokens in
    /// `bytes`.
    pub fn scan(&self, bytes: &[u8]) -> BTreeSet<SecretRef> {
        let mut found = BTreeSet::new();
        for tok in tokens(bytes) {
            if let Some(kinds) = self.scannable.get(tok) {
                for kind in kinds {
                    found.insert(SecretRef::new(*kind, tok));
                }
            }
        }
        found
    }

    /// Keep only refs that are registered secrets.
    pub fn known(&self, refs: impl IntoIterator<Item = SecretRef>) -> BTreeSet<SecretRef> {
        refs.into_iter().filter(|r| self.contains(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(kind: SecretKind, value: &str) -> SecretEntry {
        SecretEntry {
            kind,
            value: value.into(),
            session: None,
            owner: None,
        }
    }

    #[test]
    fn scan_matches_whole_tokens_only() {
        let d = SecretDictionary::from_entries([
            entry(SecretKind::TokenId, "tok-00ff"),
            entry(SecretKind::CustomerId, "cust:alice"),
            entry(SecretKind::Amount, "12"),
        ]);
        let hits = d.scan(br#"{"a":"tok-00ff","b":"xtok-00ffx","c":12,"d":"cust:alice"}"#);
        assert_eq!(
            hits,
            [
                SecretRef::new(SecretKind::CustomerId, "cust:alice"),
                SecretRef::new(SecretKind::TokenId, "tok-00ff"),
            ]
            .into()
        );
    }

    #[test]
    fn bridging_kinds_are_scannable() {
        for kind in SecretKind::ALL {
            if kind.is_bridging() {
                assert!(kind.is_scannable(), "{kind}");
            }
        }
    }
}
