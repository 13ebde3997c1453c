use std::fmt;

use serde::{Deserialize, Serialize};

use super::Address;
use crate::crypto::{OnionPacket, PublicKey, SealedBox};
use crate::ids::LinkTag;

pub type Tick = u64;

/// Ground-truth session index assigned by the simulator. Actors never see it;
/// it exists so the analysis can attribute traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionTag(pub u32);

impl fmt::Display for SessionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Control {
    EpochAdvanced { epoch: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    /// A single sealed message.
    Sealed {
        sealed: SealedBox,
    },
    /// A sealed message crossing the manager boundary; `peer` is the far end.
    Gateway {
        peer: Address,
        sealed: SealedBox,
    },
    /// Forward onion traffic.
    Cell {
        tag: LinkTag,
        packet: OnionPacket,
    },
    /// Return traffic, wrapped once more by every relay towards `origin`.
    Reply {
        tag: LinkTag,
        origin: PublicKey,
        sealed: SealedBox,
    },
    Control {
        control: Control,
    },
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Sealed { .. } => "sealed",
            Body::Gateway { .. } => "gateway",
            Body::Cell { .. } => "cell",
            Body::Reply { .. } => "reply",
            Body::Control { .. } => "control",
        }
    }

    /// Bytes on the wire, counting clear headers.
    pub fn size(&self) -> usize {
        match self {
            Body::Sealed { sealed } => sealed.wire_len(),
            Body::Gateway { peer, sealed } => peer.to_string().len() + sealed.wire_len(),
            Body::Cell { packet, .. } => 8 + 4 + packet.outer.wire_len(),
            Body::Reply { sealed, .. } => 8 + 32 + sealed.wire_len(),
            Body::Control { .. } => 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    /// Delivery tick; zero while the envelope is still queued.
    pub tick: Tick,
    pub sent_at: Tick,
    pub from: Address,
    pub to: Address,
    pub session: Option<SessionTag>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub injected: bool,
    pub body: Body,
}
