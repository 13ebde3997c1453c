//! Sealed-box envelopes and onion layering.
//!
//! All confidentiality comes from sealing directly to a recipient's public
//! key; there is no key agreement and no session key anywhere. Every function
//! here is pure given its RNG, so packets are byte-reproducible under a seed.

mod keys;
mod onion;
mod reply;
mod sealed;

pub use keys::{generate_keypair, KeyId, KeyPair, PublicKey};
pub use onion::{
    decode_layer, open_layer, peel, wrap_onion, Hop, LayerContent, OnionPacket, Peeled,
};
pub use reply::{open_reply_layer, rewrap_reply, seal_reply, unwrap_reply, ReplyLayer};
pub use sealed::{open, seal, SealedBox};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("payload must not be empty")]
    EmptyPayload,
    #[error("box is sealed to {expected}, not {actual}")]
    WrongRecipient { expected: KeyId, actual: KeyId },
    #[error("corrupt envelope: {0}")]
    Corrupt(&'static str),
    #[error("route must contain at least one hop")]
    EmptyRoute,
    #[error("route repeats the key of hop {0}")]
    DuplicateHop(String),
}
