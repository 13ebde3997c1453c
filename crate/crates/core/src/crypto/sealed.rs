use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CryptoError, KeyId, KeyPair, PublicKey};

/// Anonymous public-key envelope: only the holder of the recipient's secret
/// can open it, and the sender leaves no long-term identity behind.
///
/// Wire form: 8-byte recipient key id, big-endian u32 body length, body.
/// The body is an X25519/XSalsa20-Poly1305 sealed box, so any truncation or
/// bit flip is caught on open.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SealedBox {
    pub recipient: KeyId,
    pub body: Vec<u8>,
}

impl SealedBox {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.body.len());
        out.extend_from_slice(&self.recipient.0);
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < 12 {
            return Err(CryptoError::Corrupt("sealed box header truncated"));
        }
        let mut id = [0u8; 8];
        id.copy_from_slice(&bytes[..8]);
        let len = u32::from_be_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = &bytes[12..];
        if body.len() != len {
            return Err(CryptoError::Corrupt("sealed box length mismatch"));
        }
        Ok(SealedBox {
            recipient: KeyId(id),
            body: body.to_vec(),
        })
    }

    pub fn wire_len(&self) -> usize {
        12 + self.body.len()
    }
}

impl Serialize for SealedBox {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for SealedBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        SealedBox::from_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}

/// Seal `payload` so that only `recipient`'s key pair can open it.
///
/// The ephemeral sender key is drawn from `rng`; a seeded generator makes the
/// output reproducible.
pub fn seal<R: RngCore + CryptoRng>(
    payload: &[u8],
    recipient: &PublicKey,
    rng: &mut R,
) -> Result<SealedBox, CryptoError> {
    if payload.is_empty() {
        return Err(CryptoError::EmptyPayload);
    }
    let body = recipient
        .to_box_key()
        .seal(rng, payload)
        .map_err(|_| CryptoError::Corrupt("seal failed"))?;
    Ok(SealedBox {
        recipient: recipient.key_id(),
        body,
    })
}

pub fn open(sealed: &SealedBox, kp: &KeyPair) -> Result<Vec<u8>, CryptoError> {
    if sealed.recipient != kp.key_id() {
        return Err(CryptoError::WrongRecipient {
            expected: sealed.recipient,
            actual: kp.key_id(),
        });
    }
    kp.box_secret()
        .unseal(&sealed.body)
        .map_err(|_| CryptoError::Corrupt("authentication failed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::generate_keypair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(99)
    }

    #[test]
    fn round_trip() {
        let manager = generate_keypair(1);
        let sealed = seal(b"T-request", manager.public(), &mut rng()).unwrap();
        assert_eq!(sealed.recipient, manager.key_id());
        assert_eq!(open(&sealed, &manager).unwrap(), b"T-request");
    }

    #[test]
    fn wrong_recipient() {
        let manager = generate_keypair(1);
        let mn = generate_keypair(2);
        let sealed = seal(b"x", manager.public(), &mut rng()).unwrap();
        assert!(matches!(
            open(&sealed, &mn),
            Err(CryptoError::WrongRecipient { .. })
        ));
    }

    #[test]
    fn empty_payload_rejected() {
        let manager = generate_keypair(1);
        assert_eq!(
            seal(b"", manager.public(), &mut rng()),
            Err(CryptoError::EmptyPayload)
        );
    }

    #[test]
    fn truncated_body_is_corrupt() {
        let kp = generate_keypair(5);
        let mut sealed = seal(b"payload", kp.public(), &mut rng()).unwrap();
        sealed.body.truncate(sealed.body.len() - 3);
        assert!(matches!(open(&sealed, &kp), Err(CryptoError::Corrupt(_))));
    }

    #[test]
    fn retagged_box_is_corrupt_not_readable() {
        let a = generate_keypair(5);
        let b = generate_keypair(6);
        let mut sealed = seal(b"payload", a.public(), &mut rng()).unwrap();
        sealed.recipient = b.key_id();
        assert!(matches!(open(&sealed, &b), Err(CryptoError::Corrupt(_))));
    }

    #[test]
    fn wire_form_round_trips() {
        let kp = generate_keypair(5);
        let sealed = seal(b"abc", kp.public(), &mut rng()).unwrap();
        let bytes = sealed.to_bytes();
        assert_eq!(bytes.len(), sealed.wire_len());
        assert_eq!(SealedBox::from_bytes(&bytes).unwrap(), sealed);
        assert!(SealedBox::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn seeded_rng_gives_identical_bytes() {
        let kp = generate_keypair(5);
        let a = seal(b"abc", kp.public(), &mut rng()).unwrap();
        let b = seal(b"abc", kp.public(), &mut rng()).unwrap();
        assert_eq!(a, b);
    }
}
