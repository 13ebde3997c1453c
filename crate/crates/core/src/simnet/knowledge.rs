//! What a set of keys can read out of a transcript.
//!
//! Every sealed box in the transcript becomes a unit, deduplicated by its
//! bytes. Units are opened once with the full key inventory; an adversary
//! then reads a unit if it holds the unit's key and can reach the unit from
//! an envelope through units it can also read.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{principal, Body, SecretDictionary, SecretKind, SecretRef, Transcript};
use crate::crypto::{
    decode_layer, open, open_reply_layer, KeyId, KeyPair, LayerContent, ReplyLayer, SealedBox,
};
use crate::ids::Pseudonym;
use crate::wire::Message;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("principal {0:?} holds no keys in this transcript")]
    UnknownPrincipal(String),
}

/// How the plaintext of a box is framed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Message,
    Onion,
    Reply,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Opened {
    /// An onion relay layer naming the next hop.
    Relay {
        next_hop: Pseudonym,
    },
    /// A reply layer wrapping another reply layer.
    Wrapped,
    /// An application message, either sealed directly or found at the
    /// bottom of an onion or reply.
    Message(Message),
    Undecodable,
}

#[derive(Debug, Clone)]
pub struct Unit {
    pub format: Format,
    pub key: KeyId,
    pub first_envelope: usize,
    /// `None` if no key in the inventory opens it.
    pub opened: Option<Opened>,
    /// Registered secrets in this unit's own plaintext.
    pub refs: BTreeSet<SecretRef>,
    pub children: Vec<usize>,
}

/// Every box of a transcript opened with ground-truth keys.
#[derive(Debug, Clone)]
pub struct UnitGraph {
    units: Vec<Unit>,
    roots: Vec<Vec<usize>>,
    clear: Vec<BTreeSet<SecretRef>>,
}

struct Builder<'a> {
    keys: BTreeMap<KeyId, KeyPair>,
    dict: &'a SecretDictionary,
    units: Vec<Unit>,
    index: HashMap<[u8; 32], usize>,
}

impl Builder<'_> {
    fn message_refs(&self, msg: &Message, plain: &[u8]) -> BTreeSet<SecretRef> {
        let mut refs = self.dict.known(msg.secret_refs());
        refs.extend(self.dict.scan(plain));
        refs
    }

    fn add(&mut self, sealed: &SealedBox, format: Format, envelope: usize) -> usize {
        let digest: [u8; 32] = Sha256::digest(sealed.to_bytes()).into();
        if let Some(&id) = self.index.get(&digest) {
            return id;
        }
        let id = self.units.len();
        self.index.insert(digest, id);
        self.units.push(Unit {
            format,
            key: sealed.recipient,
            first_envelope: envelope,
            opened: None,
            refs: BTreeSet::new(),
            children: Vec::new(),
        });
        let Some(kp) = self.keys.get(&sealed.recipient).cloned() else {
            return id;
        };
        let (opened, refs, children) = self.open(sealed, format, &kp, envelope);
        let unit = &mut self.units[id];
        unit.opened = Some(opened);
        unit.refs = refs;
        unit.children = children;
        id
    }

    fn open(
        &mut self,
        sealed: &SealedBox,
        format: Format,
        kp: &KeyPair,
        envelope: usize,
    ) -> (Opened, BTreeSet<SecretRef>, Vec<usize>) {
        let undecodable = || (Opened::Undecodable, BTreeSet::new(), Vec::new());
        match format {
            Format::Message => match open(sealed, kp) {
                Ok(plain) => self.message(&plain, envelope),
                Err(_) => undecodable(),
            },
            Format::Onion => match open(sealed, kp).map(|p| decode_layer(&p)) {
                Ok(Ok(LayerContent::Relay { next_hop, inner })) => {
                    let refs = self
                        .dict
                        .known([SecretRef::new(SecretKind::HopPseudonym, &next_hop)]);
                    let child = self.add(&inner, Format::Onion, envelope);
                    (Opened::Relay { next_hop }, refs, vec![child])
                }
                Ok(Ok(LayerContent::Terminal { payload })) => self.message(&payload, envelope),
                _ => undecodable(),
            },
            Format::Reply => match open_reply_layer(sealed, kp) {
                Ok(ReplyLayer::Wrapped(inner)) => {
                    let child = self.add(&inner, Format::Reply, envelope);
                    (Opened::Wrapped, BTreeSet::new(), vec![child])
                }
                Ok(ReplyLayer::Content(plain)) => self.message(&plain, envelope),
                Err(_) => undecodable(),
            },
        }
    }

    fn message(
        &mut self,
        plain: &[u8],
        envelope: usize,
    ) -> (Opened, BTreeSet<SecretRef>, Vec<usize>) {
        let Ok(msg) = Message::decode(plain) else {
            return (Opened::Undecodable, self.dict.scan(plain), Vec::new());
        };
        let refs = self.message_refs(&msg, plain);
        let children = msg
            .nested_boxes()
            .into_iter()
            .map(|b| self.add(b, Format::Message, envelope))
            .collect();
        (Opened::Message(msg), refs, children)
    }
}

impl UnitGraph {
    pub fn build(t: &Transcript) -> Self {
        let keys = t
            .keys
            .iter()
            .filter_map(|k| Some((k.key_id, k.keypair()?)))
            .collect();
        let mut b = Builder {
            keys,
            dict: &t.secrets,
            units: Vec::new(),
            index: HashMap::new(),
        };
        let mut roots = Vec::with_capacity(t.envelopes.len());
        let mut clear = Vec::with_capacity(t.envelopes.len());
        for (i, env) in t.envelopes.iter().enumerate() {
            let (header, root) = match &env.body {
                Body::Sealed { sealed } => (String::new(), vec![b.add(sealed, Format::Message, i)]),
                Body::Gateway { peer, sealed } => {
                    (peer.to_string(), vec![b.add(sealed, Format::Message, i)])
                }
                Body::Cell { packet, .. } => {
                    (String::new(), vec![b.add(&packet.outer, Format::Onion, i)])
                }
                Body::Reply { origin, sealed, .. } => {
                    (origin.to_hex(), vec![b.add(sealed, Format::Reply, i)])
                }
                Body::Control { control } => (
                    serde_json::to_string(control).expect("control serializes"),
                    Vec::new(),
                ),
            };
            clear.push(b.dict.scan(header.as_bytes()));
            roots.push(root);
        }
        UnitGraph {
            units: b.units,
            roots,
            clear,
        }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit(&self, id: usize) -> &Unit {
        &self.units[id]
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    /// Outermost units of envelope `i`.
    pub fn roots(&self, i: usize) -> &[usize] {
        &self.roots[i]
    }

    /// Secrets visible in the clear headers of envelope `i`.
    pub fn clear(&self, i: usize) -> &BTreeSet<SecretRef> {
        &self.clear[i]
    }

    pub fn envelope_count(&self) -> usize {
        self.roots.len()
    }

    /// The decoded message of a unit, if it has one.
    pub fn message(&self, id: usize) -> Option<&Message> {
        match &self.units[id].opened {
            Some(Opened::Message(m)) => Some(m),
            _ => None,
        }
    }

    /// Which units `keys` can read.
    pub fn readable(&self, keys: &BTreeSet<KeyId>) -> Vec<bool> {
        let mut seen = vec![false; self.units.len()];
        let mut readable = vec![false; self.units.len()];
        let mut queue: VecDeque<usize> = self.roots.iter().flatten().copied().collect();
        while let Some(u) = queue.pop_front() {
            if std::mem::replace(&mut seen[u], true) {
                continue;
            }
            let unit = &self.units[u];
            if unit.opened.is_some() && keys.contains(&unit.key) {
                readable[u] = true;
                queue.extend(unit.children.iter().copied());
            }
        }
        readable
    }

    /// Every registered secret readable with `keys`, headers included.
    pub fn refs_for(&self, keys: &BTreeSet<KeyId>) -> BTreeSet<SecretRef> {
        let mut refs: BTreeSet<SecretRef> = self.clear.iter().flatten().cloned().collect();
        for (unit, ok) in self.units.iter().zip(self.readable(keys)) {
            if ok {
                refs.extend(unit.refs.iter().cloned());
            }
        }
        refs
    }

    /// Every registered secret in any plaintext at all.
    pub fn all_refs(&self) -> BTreeSet<SecretRef> {
        let mut refs: BTreeSet<SecretRef> = self.clear.iter().flatten().cloned().collect();
        for unit in &self.units {
            refs.extend(unit.refs.iter().cloned());
        }
        refs
    }
}

/// Secret references a principal can read from a transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeSet {
    pub principal: String,
    pub refs: BTreeSet<SecretRef>,
}

impl KnowledgeSet {
    pub fn kinds(&self) -> BTreeSet<SecretKind> {
        self.refs.iter().map(|r| r.kind).collect()
    }

    pub fn contains(&self, r: &SecretRef) -> bool {
        self.refs.contains(r)
    }

    pub fn of_kind(&self, kind: SecretKind) -> impl Iterator<Item = &SecretRef> {
        self.refs.iter().filter(move |r| r.kind == kind)
    }
}

/// Every key a principal ever held. The observer holds none.
pub fn principal_keys(t: &Transcript, who: &str) -> Result<BTreeSet<KeyId>, AnalysisError> {
    if who == principal::OBSERVER {
        return Ok(BTreeSet::new());
    }
    if !t.has_principal(who) {
        return Err(AnalysisError::UnknownPrincipal(who.to_owned()));
    }
    Ok(t.keys
        .iter()
        .filter(|k| k.principal == who)
        .map(|k| k.key_id)
        .collect())
}

pub fn knowledge(t: &Transcript, who: &str) -> Result<KnowledgeSet, AnalysisError> {
    knowledge_in(&UnitGraph::build(t), t, who)
}

/// [`knowledge`] over a graph that has already been built for `t`.
pub fn knowledge_in(
    graph: &UnitGraph,
    t: &Transcript,
    who: &str,
) -> Result<KnowledgeSet, AnalysisError> {
    let keys = principal_keys(t, who)?;
    Ok(KnowledgeSet {
        principal: who.to_owned(),
        refs: graph.refs_for(&keys),
    })
}

/// Registered secrets found anywhere in one stored record. Strings are
/// scanned for identifier tokens and also matched whole against every kind;
/// bare numbers can only be amounts.
pub fn record_refs(dict: &SecretDictionary, record: &serde_json::Value) -> BTreeSet<SecretRef> {
    use serde_json::Value as J;
    let mut refs = BTreeSet::new();
    let mut stack = vec![record];
    while let Some(v) = stack.pop() {
        let scalar = match v {
            J::String(s) => {
                refs.extend(dict.scan(s.as_bytes()));
                s.clone()
            }
            J::Number(n) => {
                let r = SecretRef::new(SecretKind::Amount, n);
                if dict.contains(&r) {
                    refs.insert(r);
                }
                continue;
            }
            J::Bool(_) | J::Null => continue,
            J::Array(items) => {
                stack.extend(items);
                continue;
            }
            J::Object(fields) => {
                stack.extend(fields.values());
                continue;
            }
        };
        for kind in SecretKind::ALL {
            let r = SecretRef::new(kind, &scalar);
            if dict.contains(&r) {
                refs.insert(r);
            }
        }
    }
    refs
}

/// Registered secrets in everything `who` still stores.
pub fn store_scan(t: &Transcript, who: &str) -> BTreeSet<SecretRef> {
    t.store(who)
        .into_iter()
        .flat_map(|s| &s.records)
        .flat_map(|r| record_refs(&t.secrets, r))
        .collect()
}
