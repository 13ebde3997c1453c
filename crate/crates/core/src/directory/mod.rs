//! Directory server: node registry, pseudonym rotation and circuit building.

mod actor;
mod registry;

pub use actor::DirectoryServer;
pub use registry::{
    Registry, RegistryAck, RotationEpoch, RotationMapping, ServiceDescriptor,
    DEFAULT_MIN_CIRCUIT_LENGTH,
};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Hop, KeyId, PublicKey};
use crate::ids::{Pseudonym, TrueId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Slave,
    Master,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub true_id: TrueId,
    pub pseudonym: Pseudonym,
    pub public_key: PublicKey,
    pub role: NodeRole,
}

/// The part of a [`NodeRecord`] that may leave the directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeView {
    pub pseudonym: Pseudonym,
    pub public_key: PublicKey,
    pub role: NodeRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    pub hops: Vec<Hop>,
    pub epoch: u64,
}

impl Circuit {
    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    /// Slave hops, i.e. every hop but the terminal master.
    pub fn slaves(&self) -> &[Hop] {
        &self.hops[..self.hops.len().saturating_sub(1)]
    }

    pub fn validate(&self, min_length: usize, master: KeyId) -> Result<(), DirectoryError> {
        if self.hops.len() < min_length {
            return Err(DirectoryError::CircuitTooShort {
                length: self.hops.len(),
                min: min_length,
            });
        }
        let mut seen = BTreeSet::new();
        for hop in &self.hops {
            if !seen.insert(&hop.pseudonym) {
                return Err(DirectoryError::InvalidCircuit("repeated hop"));
            }
        }
        match self.hops.last() {
            Some(last) if last.key.key_id() == master => Ok(()),
            _ => Err(DirectoryError::InvalidCircuit(
                "last hop is not the master node",
            )),
        }
    }

    /// Route for a packet that starts after hop `index` and walks the circle
    /// until it arrives back at it, so every dispatch uses all hops.
    pub fn lap_to(&self, index: usize) -> Vec<Hop> {
        let n = self.hops.len();
        (1..=n)
            .map(|k| self.hops[(index + k) % n].clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requester {
    Manager,
    MasterNode,
    Customer,
}

impl fmt::Display for Requester {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Requester::Manager => "manager",
            Requester::MasterNode => "master",
            Requester::Customer => "customer",
        })
    }
}

/// Principals allowed to read the node list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustAnchors(pub BTreeSet<Requester>);

impl Default for TrustAnchors {
    fn default() -> Self {
        TrustAnchors([Requester::Manager, Requester::MasterNode].into())
    }
}

impl TrustAnchors {
    pub fn permits(&self, who: Requester) -> bool {
        self.0.contains(&who)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DirectoryError {
    #[error("true id {0} is already registered")]
    DuplicateTrueId(String),
    #[error("pseudonym {0} is already registered")]
    DuplicatePseudonym(String),
    #[error("circuit needs {needed} slave nodes but only {available} are registered")]
    Capacity { needed: usize, available: usize },
    #[error("circuit length {length} is below the minimum of {min}")]
    CircuitTooShort { length: usize, min: usize },
    #[error("invalid circuit: {0}")]
    InvalidCircuit(&'static str),
    #[error("no master node registered under that id")]
    UnknownMaster,
    #[error("{0} may not read the directory")]
    AccessDenied(Requester),
}
