//! Layered onion wrapping over sealed boxes.
//!
//! Each layer's plaintext has a fixed field order:
//!
//! ```text
//! marker: u8            0x01 relay, 0x00 terminal
//! next_hop_len: u16 BE  0 for terminal layers
//! next_hop: [u8]        UTF-8 pseudonym of the next hop
//! inner_len: u32 BE
//! inner: [u8]           serialized inner SealedBox, or the payload at the terminal layer
//! ```

use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::{open, seal, CryptoError, KeyPair, PublicKey, SealedBox};
use crate::ids::Pseudonym;

const MARKER_TERMINAL: u8 = 0x00;
const MARKER_RELAY: u8 = 0x01;

/// One hop of a route: public alias plus sealing key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub pseudonym: Pseudonym,
    pub key: PublicKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnionPacket {
    pub outer: SealedBox,
    pub layer_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Peeled {
    Relay {
        next_hop: Pseudonym,
        inner: OnionPacket,
    },
    Terminal {
        payload: Vec<u8>,
    },
}

/// Decoded plaintext of a single layer, before the inner box is re-framed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerContent {
    Relay {
        next_hop: Pseudonym,
        inner: SealedBox,
    },
    Terminal {
        payload: Vec<u8>,
    },
}

fn encode_layer(next_hop: Option<&Pseudonym>, inner: &[u8]) -> Vec<u8> {
    let name = next_hop.map(|p| p.as_str().as_bytes()).unwrap_or_default();
    let mut out = Vec::with_capacity(7 + name.len() + inner.len());
    out.push(if next_hop.is_some() {
        MARKER_RELAY
    } else {
        MARKER_TERMINAL
    });
    out.extend_from_slice(&(name.len() as u16).to_be_bytes());
    out.extend_from_slice(name);
    out.extend_from_slice(&(inner.len() as u32).to_be_bytes());
    out.extend_from_slice(inner);
    out
}

/// Parse a layer plaintext as produced by [`open_layer`].
pub fn decode_layer(plain: &[u8]) -> Result<LayerContent, CryptoError> {
    let corrupt = CryptoError::Corrupt;
    let (&marker, rest) = plain.split_first().ok_or(corrupt("empty layer"))?;
    if rest.len() < 2 {
        return Err(corrupt("layer header truncated"));
    }
    let name_len = u16::from_be_bytes([rest[0], rest[1]]) as usize;
    let rest = &rest[2..];
    if rest.len() < name_len + 4 {
        return Err(corrupt("layer header truncated"));
    }
    let (name, rest) = rest.split_at(name_len);
    let inner_len = u32::from_be_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
    let inner = &rest[4..];
    if inner.len() != inner_len {
        return Err(corrupt("layer body length mismatch"));
    }
    match marker {
        MARKER_RELAY => {
            let name = std::str::from_utf8(name).map_err(|_| corrupt("next hop not utf-8"))?;
            if name.is_empty() {
                return Err(corrupt("relay layer without next hop"));
            }
            Ok(LayerContent::Relay {
                next_hop: Pseudonym::new(name),
                inner: SealedBox::from_bytes(inner)?,
            })
        }
        MARKER_TERMINAL if name_len == 0 => Ok(LayerContent::Terminal {
            payload: inner.to_vec(),
        }),
        MARKER_TERMINAL => Err(corrupt("terminal layer names a next hop")),
        _ => Err(corrupt("unknown layer marker")),
    }
}

/// Wrap `payload` for `route`, innermost layer first. The outermost layer is
/// sealed to `route[0]` and the terminal layer to the last hop.
pub fn wrap_onion<R: RngCore + CryptoRng>(
    payload: &[u8],
    route: &[Hop],
    rng: &mut R,
) -> Result<OnionPacket, CryptoError> {
    let last = route.last().ok_or(CryptoError::EmptyRoute)?;
    let mut seen = BTreeSet::new();
    for hop in route {
        if !seen.insert(hop.key.key_id()) {
            return Err(CryptoError::DuplicateHop(hop.pseudonym.to_string()));
        }
    }
    if payload.is_empty() {
        return Err(CryptoError::EmptyPayload);
    }

    let mut current = seal(&encode_layer(None, payload), &last.key, rng)?;
    for pair in route.windows(2).rev() {
        let (hop, next) = (&pair[0], &pair[1]);
        let plain = encode_layer(Some(&next.pseudonym), &current.to_bytes());
        current = seal(&plain, &hop.key, rng)?;
    }
    Ok(OnionPacket {
        outer: current,
        layer_count: route.len() as u32,
    })
}

/// Open the outermost layer and return its raw plaintext.
pub fn open_layer(packet: &OnionPacket, kp: &KeyPair) -> Result<Vec<u8>, CryptoError> {
    open(&packet.outer, kp)
}

pub fn peel(packet: &OnionPacket, kp: &KeyPair) -> Result<Peeled, CryptoError> {
    let plain = open_layer(packet, kp)?;
    match decode_layer(&plain)? {
        LayerContent::Relay { next_hop, inner } => {
            if packet.layer_count < 2 {
                return Err(CryptoError::Corrupt("relay layer in a single-layer packet"));
            }
            Ok(Peeled::Relay {
                next_hop,
                inner: OnionPacket {
                    outer: inner,
                    layer_count: packet.layer_count - 1,
                },
            })
        }
        LayerContent::Terminal { payload } => {
            if packet.layer_count != 1 {
                return Err(CryptoError::Corrupt("terminal layer before the last hop"));
            }
            Ok(Peeled::Terminal { payload })
        }
    }
}
