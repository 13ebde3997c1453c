use std::collections::BTreeMap;

use super::ManagerError;
use crate::crypto::{open, seal, KeyPair, PublicKey, SealedBox};
use crate::ids::{PaymentHandle, PaymentRef, TokenId};
use crate::rng::SimRng;
use crate::simnet::{Actor, Address, Body, Ctx, Envelope, SecretKind};
use crate::wire::Message;

#[derive(Debug, Clone)]
struct OpenSession {
    token_id: TokenId,
    amount: u64,
    notify_key: PublicKey,
}

/// Payment gateway outside the manager boundary. Customers reach it only
/// through the manager's gateway relay.
pub struct Bank {
    keypair: KeyPair,
    rng: SimRng,
    open: BTreeMap<PaymentHandle, OpenSession>,
    settled: u64,
}

impl Bank {
    pub fn new(keypair: KeyPair, rng: SimRng) -> Self {
        Bank {
            keypair,
            rng,
            open: BTreeMap::new(),
            settled: 0,
        }
    }

    pub fn open_sessions(&self) -> usize {
        self.open.len()
    }

    pub fn settled(&self) -> u64 {
        self.settled
    }

    fn on_payment(
        &mut self,
        customer: &Address,
        sealed: &SealedBox,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ManagerError> {
        let Message::Payment {
            handle,
            amount,
            receipt_key,
            ..
        } = Message::decode(&open(sealed, &self.keypair)?)?
        else {
            return Err(ManagerError::Unexpected("gateway payload"));
        };
        let session = self
            .open
            .get(&handle)
            .ok_or_else(|| ManagerError::UnknownPayment(handle.clone()))?;
        if session.amount != amount {
            return Err(ManagerError::AmountMismatch {
                due: session.amount,
                paid: amount,
            });
        }
        let session = self.open.remove(&handle).expect("present");
        let payment_reference = PaymentRef::random(&mut self.rng);
        ctx.secret(SecretKind::PaymentRef, &payment_reference);
        self.settled += 1;

        let receipt = Message::Receipt {
            handle: handle.clone(),
            payment_reference: payment_reference.clone(),
        };
        let receipt = seal(&receipt.encode(), &receipt_key, &mut self.rng)?;
        ctx.send(
            Address::Manager,
            Body::Gateway {
                peer: customer.clone(),
                sealed: receipt,
            },
        );

        let notice = Message::PaymentNotice {
            handle,
            token_id: session.token_id,
            amount,
            payment_reference,
        };
        let notice = seal(&notice.encode(), &session.notify_key, &mut self.rng)?;
        ctx.send(Address::Manager, Body::Sealed { sealed: notice });
        Ok(())
    }
}

impl Actor for Bank {
    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        let outcome = match &env.body {
            Body::Sealed { sealed } if env.from == Address::Manager => open(sealed, &self.keypair)
                .map_err(ManagerError::from)
                .and_then(|p| Ok(Message::decode(&p)?))
                .and_then(|m| match m {
                    Message::OpenPayment {
                        handle,
                        token_id,
                        amount,
                        notify_key,
                    } => {
                        self.open.insert(
                            handle,
                            OpenSession {
                                token_id,
                                amount,
                                notify_key,
                            },
                        );
                        Ok(())
                    }
                    other => Err(ManagerError::Unexpected(other.kind())),
                }),
            Body::Gateway { peer, sealed } => self.on_payment(peer, sealed, ctx),
            other => Err(ManagerError::Unexpected(other.kind())),
        };
        if let Err(e) = outcome {
            ctx.fault(e);
        }
    }
}
