//! Identifier newtypes shared by every actor.
//!
//! Random identifiers carry a short kind prefix (`tok-`, `ses-`, ...) so that a
//! leaked value is recognisable in any byte dump.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

string_id!(
    /// Current public alias of a node. Changes only through rotation.
    Pseudonym
);
string_id!(
    /// Stable internal node identifier. Never leaves the directory server.
    TrueId
);
string_id!(
    /// Access token identifier (the `T` a customer asks for).
    TokenId
);
string_id!(SessionId);
string_id!(
    /// Bank-side payment session handle.
    PaymentHandle
);
string_id!(
    /// Bank-issued reference for a settled payment.
    PaymentRef
);
string_id!(
    /// Customer identity as presented when authenticating to the manager.
    CustomerId
);

impl Pseudonym {
    pub fn random(rng: &mut impl RngCore) -> Self {
        Self(format!("ps-{:012x}", rng.next_u64() & 0xffff_ffff_ffff))
    }
}

impl TokenId {
    pub fn random(rng: &mut impl RngCore) -> Self {
        Self(format!("tok-{:016x}", rng.next_u64()))
    }
}

impl SessionId {
    pub fn random(rng: &mut impl RngCore) -> Self {
        Self(format!("ses-{:016x}", rng.next_u64()))
    }
}

impl PaymentHandle {
    pub fn random(rng: &mut impl RngCore) -> Self {
        Self(format!("ph-{:016x}", rng.next_u64()))
    }
}

impl PaymentRef {
    pub fn random(rng: &mut impl RngCore) -> Self {
        Self(format!("pay-{:016x}", rng.next_u64()))
    }
}

/// Manager-side agent process identifier, allocated sequentially like a PID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pid-{:08}", self.0)
    }
}

/// Catalog key (the `S` of a service request).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceNumber(pub u32);

impl fmt::Display for ServiceNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

/// Per-link circuit tag used to route replies back along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkTag(pub u64);
