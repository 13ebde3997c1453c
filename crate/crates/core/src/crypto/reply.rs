//! Return-path wrapping. The responder seals its reply to the path origin and
//! every relay on the way back adds one more layer sealed to the same key, so
//! the bytes on each link differ while only the origin can read the content.

use rand::{CryptoRng, RngCore};

use super::{open, seal, CryptoError, KeyPair, PublicKey, SealedBox};

const CONTENT: u8 = 0x00;
const WRAPPED: u8 = 0x01;

pub fn seal_reply<R: RngCore + CryptoRng>(
    message: &[u8],
    origin: &PublicKey,
    rng: &mut R,
) -> Result<SealedBox, CryptoError> {
    let mut plain = Vec::with_capacity(message.len() + 1);
    plain.push(CONTENT);
    plain.extend_from_slice(message);
    seal(&plain, origin, rng)
}

pub fn rewrap_reply<R: RngCore + CryptoRng>(
    inner: &SealedBox,
    origin: &PublicKey,
    rng: &mut R,
) -> Result<SealedBox, CryptoError> {
    let mut plain = vec![WRAPPED];
    plain.extend_from_slice(&inner.to_bytes());
    seal(&plain, origin, rng)
}

/// One step of unwrapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplyLayer {
    Wrapped(SealedBox),
    Content(Vec<u8>),
}

pub fn open_reply_layer(sealed: &SealedBox, kp: &KeyPair) -> Result<ReplyLayer, CryptoError> {
    let plain = open(sealed, kp)?;
    match plain.split_first() {
        Some((&CONTENT, rest)) => Ok(ReplyLayer::Content(rest.to_vec())),
        Some((&WRAPPED, rest)) => Ok(ReplyLayer::Wrapped(SealedBox::from_bytes(rest)?)),
        _ => Err(CryptoError::Corrupt("unknown reply marker")),
    }
}

/// Strip every layer; returns the content and how many layers were removed.
pub fn unwrap_reply(sealed: &SealedBox, kp: &KeyPair) -> Result<(Vec<u8>, usize), CryptoError> {
    let mut current = sealed.clone();
    let mut layers = 1;
    loop {
        match open_reply_layer(&current, kp)? {
            ReplyLayer::Content(bytes) => return Ok((bytes, layers)),
            ReplyLayer::Wrapped(inner) => {
                current = inner;
                layers += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::generate_keypair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn origin_strips_all_relay_layers() {
        let origin = generate_keypair(1);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut sealed = seal_reply(b"result", origin.public(), &mut rng).unwrap();
        for _ in 0..3 {
            let next = rewrap_reply(&sealed, origin.public(), &mut rng).unwrap();
            assert_ne!(next.body, sealed.body);
            sealed = next;
        }
        assert_eq!(
            unwrap_reply(&sealed, &origin).unwrap(),
            (b"result".to_vec(), 4)
        );
    }

    #[test]
    fn relay_cannot_read_reply() {
        let origin = generate_keypair(1);
        let relay = generate_keypair(2);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let sealed = seal_reply(b"result", origin.public(), &mut rng).unwrap();
        assert!(matches!(
            unwrap_reply(&sealed, &relay),
            Err(CryptoError::WrongRecipient { .. })
        ));
    }
}
