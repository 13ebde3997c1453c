//! Customer actor: requests a service, receives the token, pays the bill and
//! collects the result.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compute::{Job, Value};
use crate::crypto::{generate_keypair, open, seal, CryptoError, KeyPair, SealedBox};
use crate::ids::{CustomerId, PaymentRef, ProcessId, ServiceNumber, TokenId};
use crate::manager::{Anchors, Bill};
use crate::rng::SimRng;
use crate::simnet::{Actor, Address, Body, Ctx, Envelope, KeyScope, SecretKind, SessionTag};
use crate::wire::{JobSpec, Message, ServiceRequest, WireError};

#[derive(Debug, Error)]
enum CustomerFault {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("no session holds key {0}")]
    UnknownKey(crate::crypto::KeyId),
    #[error("unexpected {0} message")]
    Unexpected(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustomerState {
    Requested,
    Granted,
    Invoiced,
    Paid,
    Done,
}

#[derive(Debug, Clone)]
pub struct CustomerSession {
    pub tag: SessionTag,
    pub service_number: ServiceNumber,
    pub job: Job,
    pub keypair: KeyPair,
    pub state: CustomerState,
    pub token: Option<TokenId>,
    pub process_id: Option<ProcessId>,
    pub bill: Option<Bill>,
    pub result: Option<Value>,
    pub receipt: Option<PaymentRef>,
}

pub struct Customer {
    id: CustomerId,
    anchors: Anchors,
    rng: SimRng,
    sessions: Vec<CustomerSession>,
}

impl Customer {
    pub fn new(id: CustomerId, anchors: Anchors, rng: SimRng) -> Self {
        Customer {
            id,
            anchors,
            rng,
            sessions: Vec::new(),
        }
    }

    pub fn id(&self) -> &CustomerId {
        &self.id
    }

    pub fn sessions(&self) -> &[CustomerSession] {
        &self.sessions
    }

    /// Seal the job to the master node and the request to the manager.
    pub fn request(&mut self, service_number: ServiceNumber, job: Job, ctx: &mut Ctx<'_>) {
        let tag = ctx.session().expect("sessions are started with a tag");
        let keypair = generate_keypair(self.rng.next_u64());
        ctx.key_created(&keypair, KeyScope::Session);
        ctx.secret(SecretKind::CustomerId, &self.id);
        ctx.secret(SecretKind::JobContent, &job);
        ctx.secret(SecretKind::CustomerKey, keypair.public().to_hex());

        let spec = Message::JobSpec(JobSpec {
            job: job.to_string(),
            reply_key: keypair.public().clone(),
        });
        let sent = seal(&spec.encode(), &self.anchors.master, &mut self.rng).and_then(|job_box| {
            let req = Message::ServiceRequest(ServiceRequest {
                customer_id: self.id.clone(),
                service_number,
                reply_key: keypair.public().clone(),
                job: job_box,
            });
            seal(&req.encode(), &self.anchors.manager, &mut self.rng)
        });
        match sent {
            Ok(sealed) => ctx.send(Address::Manager, Body::Sealed { sealed }),
            Err(e) => ctx.fault(e),
        }
        self.sessions.push(CustomerSession {
            tag,
            service_number,
            job,
            keypair,
            state: CustomerState::Requested,
            token: None,
            process_id: None,
            bill: None,
            result: None,
            receipt: None,
        });
    }

    fn session_for(&mut self, sealed: &SealedBox) -> Result<usize, CustomerFault> {
        self.sessions
            .iter()
            .position(|s| s.keypair.key_id() == sealed.recipient)
            .ok_or(CustomerFault::UnknownKey(sealed.recipient))
    }

    fn open_result(&self, i: usize, sealed: &SealedBox) -> Result<Value, CustomerFault> {
        match Message::decode(&open(sealed, &self.sessions[i].keypair)?)? {
            Message::ResultPayload { value } => Ok(value),
            other => Err(CustomerFault::Unexpected(other.kind())),
        }
    }

    fn finish_if_complete(&mut self, i: usize) {
        let s = &mut self.sessions[i];
        if s.result.is_some() && s.receipt.is_some() {
            s.state = CustomerState::Done;
        }
    }

    fn on_sealed(&mut self, sealed: &SealedBox, ctx: &mut Ctx<'_>) -> Result<(), CustomerFault> {
        let i = self.session_for(sealed)?;
        let msg = Message::decode(&open(sealed, &self.sessions[i].keypair)?)?;
        match msg {
            Message::TokenGrant { token, process_id } => {
                let s = &mut self.sessions[i];
                s.token = Some(token.token_id);
                s.process_id = Some(process_id);
                s.state = CustomerState::Granted;
            }
            Message::Invoice {
                bill,
                payment_handle,
                result,
            } => {
                if let Some(result) = result {
                    let value = self.open_result(i, &result)?;
                    self.sessions[i].result = Some(value);
                }
                let s = &mut self.sessions[i];
                let payment = Message::Payment {
                    handle: payment_handle,
                    amount: bill.total,
                    payer: self.id.clone(),
                    receipt_key: s.keypair.public().clone(),
                };
                s.bill = Some(bill);
                s.state = CustomerState::Invoiced;
                let sealed = seal(&payment.encode(), &self.anchors.bank, &mut self.rng)?;
                ctx.send(
                    Address::Manager,
                    Body::Gateway {
                        peer: Address::Bank,
                        sealed,
                    },
                );
            }
            Message::ResultDelivery { result, .. } => {
                let value = self.open_result(i, &result)?;
                self.sessions[i].result = Some(value);
                self.finish_if_complete(i);
            }
            other => return Err(CustomerFault::Unexpected(other.kind())),
        }
        Ok(())
    }

    fn on_receipt(&mut self, sealed: &SealedBox) -> Result<(), CustomerFault> {
        let i = self.session_for(sealed)?;
        match Message::decode(&open(sealed, &self.sessions[i].keypair)?)? {
            Message::Receipt {
                payment_reference, ..
            } => {
                let s = &mut self.sessions[i];
                s.receipt = Some(payment_reference);
                s.state = CustomerState::Paid;
                self.finish_if_complete(i);
                Ok(())
            }
            other => Err(CustomerFault::Unexpected(other.kind())),
        }
    }
}

impl Actor for Customer {
    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        let outcome = match &env.body {
            Body::Sealed { sealed } => self.on_sealed(sealed, ctx),
            Body::Gateway {
                peer: Address::Bank,
                sealed,
            } => self.on_receipt(sealed),
            other => Err(CustomerFault::Unexpected(other.kind())),
        };
        if let Err(e) = outcome {
            ctx.fault(e);
        }
    }
}
