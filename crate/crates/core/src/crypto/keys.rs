use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Short fingerprint of a public key; the routing tag carried by every
/// [`SealedBox`](super::SealedBox).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeyId(pub [u8; 8]);

impl KeyId {
    fn of(public: &[u8; 32]) -> Self {
        let digest = Sha256::digest(public);
        let mut id = [0u8; 8];
        id.copy_from_slice(&digest[..8]);
        KeyId(id)
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyId({self})")
    }
}

impl Serialize for KeyId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for KeyId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 8] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("key id must be 8 bytes"))?;
        Ok(KeyId(arr))
    }
}

/// Sealing half of a key pair. Safe to publish.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PublicKey {
    key_id: KeyId,
    bytes: [u8; 32],
}

impl PublicKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        PublicKey {
            key_id: KeyId::of(&bytes),
            bytes,
        }
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.bytes)
    }

    pub(crate) fn to_box_key(&self) -> crypto_box::PublicKey {
        crypto_box::PublicKey::from(self.bytes)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.key_id)
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("public key must be 32 bytes"))?;
        Ok(PublicKey::from_bytes(arr))
    }
}

/// A node's sealing key and the secret needed to open boxes sealed to it.
#[derive(Clone)]
pub struct KeyPair {
    public: PublicKey,
    secret: crypto_box::SecretKey,
}

impl KeyPair {
    pub fn from_secret_bytes(secret: [u8; 32]) -> Self {
        let secret = crypto_box::SecretKey::from(secret);
        let public = PublicKey::from_bytes(*secret.public_key().as_bytes());
        KeyPair { public, secret }
    }

    pub fn key_id(&self) -> KeyId {
        self.public.key_id
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    /// Raw secret scalar. Only the transcript key inventory uses this.
    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes()
    }

    pub(crate) fn box_secret(&self) -> &crypto_box::SecretKey {
        &self.secret
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("key_id", &self.public.key_id)
            .finish_non_exhaustive()
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public
    }
}

impl Eq for KeyPair {}

/// Derive a key pair deterministically from `seed`.
pub fn generate_keypair(seed: u64) -> KeyPair {
    let mut h = Sha256::new();
    h.update(b"anoncloud/keypair/v1");
    h.update(seed.to_le_bytes());
    let secret: [u8; 32] = h.finalize().into();
    KeyPair::from_secret_bytes(secret)
}
