use std::collections::BTreeMap;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::ids::{ServiceNumber, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenState {
    Issued,
    Redeemed,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub token_id: TokenId,
    pub service_number: ServiceNumber,
    pub state: TokenState,
}

/// What travels on the wire: the token plus a tag the master node can check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCredential {
    pub token_id: TokenId,
    pub service_number: ServiceNumber,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("token {0} was already redeemed")]
    TokenReplay(TokenId),
    #[error("token {0} has expired")]
    Expired(TokenId),
    #[error("token {0} carries an invalid tag")]
    Forged(TokenId),
}

/// Credential key pre-shared between the manager and the master node.
#[derive(Clone)]
pub struct TokenKey([u8; 32]);

impl TokenKey {
    pub fn new(bytes: [u8; 32]) -> Self {
        TokenKey(bytes)
    }

    fn mac(&self, token_id: &TokenId, s: ServiceNumber) -> Hmac<Sha256> {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.0).expect("any key length works");
        mac.update(token_id.as_str().as_bytes());
        mac.update(&s.0.to_be_bytes());
        mac
    }

    pub fn credential(&self, token: &Token) -> TokenCredential {
        let tag = self
            .mac(&token.token_id, token.service_number)
            .finalize()
            .into_bytes();
        TokenCredential {
            token_id: token.token_id.clone(),
            service_number: token.service_number,
            tag: hex::encode(tag),
        }
    }

    pub fn verify(&self, cred: &TokenCredential) -> bool {
        let Ok(tag) = hex::decode(&cred.tag) else {
            return false;
        };
        self.mac(&cred.token_id, cred.service_number)
            .verify_slice(&tag)
            .is_ok()
    }
}

/// Redemption ledger. A token absent from the ledger but carrying a valid
/// tag is in the issued state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    states: BTreeMap<TokenId, TokenState>,
}

impl TokenLedger {
    pub fn state(&self, id: &TokenId) -> TokenState {
        self.states.get(id).copied().unwrap_or(TokenState::Issued)
    }

    pub fn check(&self, key: &TokenKey, cred: &TokenCredential) -> Result<(), TokenError> {
        if !key.verify(cred) {
            return Err(TokenError::Forged(cred.token_id.clone()));
        }
        match self.state(&cred.token_id) {
            TokenState::Issued => Ok(()),
            TokenState::Redeemed => Err(TokenError::TokenReplay(cred.token_id.clone())),
            TokenState::Expired => Err(TokenError::Expired(cred.token_id.clone())),
        }
    }

    pub fn redeem(&mut self, key: &TokenKey, cred: &TokenCredential) -> Result<(), TokenError> {
        self.check(key, cred)?;
        self.states
            .insert(cred.token_id.clone(), TokenState::Redeemed);
        Ok(())
    }

    pub fn expire(&mut self, id: &TokenId) {
        self.states.entry(id.clone()).or_insert(TokenState::Expired);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&TokenId, TokenState)> {
        self.states.iter().map(|(k, v)| (k, *v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn token(id: &str) -> Token {
        Token {
            token_id: TokenId::new(id),
            service_number: ServiceNumber(1),
            state: TokenState::Issued,
        }
    }

    #[test]
    fn redeem_once() {
        let key = TokenKey::new([7; 32]);
        let cred = key.credential(&token("tok-1"));
        let mut ledger = TokenLedger::default();
        assert_eq!(ledger.state(&cred.token_id), TokenState::Issued);
        ledger.redeem(&key, &cred).unwrap();
        assert_eq!(ledger.state(&cred.token_id), TokenState::Redeemed);
        assert_eq!(
            ledger.redeem(&key, &cred),
            Err(TokenError::TokenReplay(cred.token_id.clone()))
        );
    }

    #[test]
    fn forged_and_expired_tokens_rejected() {
        let key = TokenKey::new([7; 32]);
        let mut cred = key.credential(&token("tok-1"));
        cred.service_number = ServiceNumber(2);
        let mut ledger = TokenLedger::default();
        assert!(matches!(
            ledger.redeem(&key, &cred),
            Err(TokenError::Forged(_))
        ));
        let other = TokenKey::new([8; 32]).credential(&token("tok-2"));
        assert!(matches!(
            ledger.redeem(&key, &other),
            Err(TokenError::Forged(_))
        ));

        let cred = key.credential(&token("tok-3"));
        ledger.expire(&cred.token_id);
        assert!(matches!(
            ledger.redeem(&key, &cred),
            Err(TokenError::Expired(_))
        ));
    }
}
