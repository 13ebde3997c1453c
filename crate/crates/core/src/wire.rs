//! Application messages. Every message travels inside a sealed box or an
//! onion, serialized as JSON.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compute::Value;
use crate::crypto::{PublicKey, SealedBox};
use crate::directory::Circuit;
use crate::ids::{
    CustomerId, PaymentHandle, PaymentRef, ProcessId, ServiceNumber, SessionId, TokenId,
};
use crate::manager::{Bill, TokenCredential};
use crate::simnet::{SecretKind, SecretRef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("undecodable message: {0}")]
pub struct WireError(String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub customer_id: CustomerId,
    pub service_number: ServiceNumber,
    pub reply_key: PublicKey,
    /// [`JobSpec`] sealed to the master node.
    pub job: SealedBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub job: String,
    pub reply_key: PublicKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MnRequest {
    pub token: TokenCredential,
    pub service_number: ServiceNumber,
    pub session_id: SessionId,
    pub circuit: Circuit,
    pub reply_key: PublicKey,
    pub job: SealedBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    ServiceRequest(ServiceRequest),
    JobSpec(JobSpec),
    TokenGrant {
        token: TokenCredential,
        process_id: ProcessId,
    },
    CircuitRequest {
        request_id: u64,
        service_number: ServiceNumber,
        length: u32,
        reply_key: PublicKey,
    },
    CircuitIssued {
        request_id: u64,
        circuit: Circuit,
    },
    CircuitDenied {
        request_id: u64,
        reason: String,
    },
    /// Terminal payload of a request onion: an [`MnRequest`] sealed to the
    /// master node.
    MnForward {
        request: SealedBox,
    },
    MnRequest(MnRequest),
    SubJob {
        index: u32,
        sub_payload: String,
        reply_key: PublicKey,
    },
    SubResult {
        index: u32,
        outcome: Result<Value, String>,
    },
    Completion {
        session_id: SessionId,
        completed: Vec<(ServiceNumber, u64)>,
        /// [`Message::ResultPayload`] sealed to the customer.
        result: SealedBox,
    },
    ResultPayload {
        value: Value,
    },
    OpenPayment {
        handle: PaymentHandle,
        token_id: TokenId,
        amount: u64,
        notify_key: PublicKey,
    },
    Invoice {
        bill: Bill,
        payment_handle: PaymentHandle,
        result: Option<SealedBox>,
    },
    ResultDelivery {
        session_id: SessionId,
        result: SealedBox,
    },
    Payment {
        handle: PaymentHandle,
        amount: u64,
        payer: CustomerId,
        receipt_key: PublicKey,
    },
    Receipt {
        handle: PaymentHandle,
        payment_reference: PaymentRef,
    },
    PaymentNotice {
        handle: PaymentHandle,
        token_id: TokenId,
        amount: u64,
        payment_reference: PaymentRef,
    },
    EpochUpdate {
        epoch: u64,
    },
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("messages always serialize")
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
        serde_json::from_slice(bytes).map_err(|e| WireError(e.to_string()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::ServiceRequest(_) => "service_request",
            Message::JobSpec(_) => "job_spec",
            Message::TokenGrant { .. } => "token_grant",
            Message::CircuitRequest { .. } => "circuit_request",
            Message::CircuitIssued { .. } => "circuit_issued",
            Message::CircuitDenied { .. } => "circuit_denied",
            Message::MnForward { .. } => "mn_forward",
            Message::MnRequest(_) => "mn_request",
            Message::SubJob { .. } => "sub_job",
            Message::SubResult { .. } => "sub_result",
            Message::Completion { .. } => "completion",
            Message::ResultPayload { .. } => "result_payload",
            Message::OpenPayment { .. } => "open_payment",
            Message::Invoice { .. } => "invoice",
            Message::ResultDelivery { .. } => "result_delivery",
            Message::Payment { .. } => "payment",
            Message::Receipt { .. } => "receipt",
            Message::PaymentNotice { .. } => "payment_notice",
            Message::EpochUpdate { .. } => "epoch_update",
        }
    }

    /// Sensitive values carried in this message's own clear fields. Nested
    /// boxes are not looked into.
    pub fn secret_refs(&self) -> Vec<SecretRef> {
        use SecretKind as K;
        fn r(kind: SecretKind, value: impl ToString) -> SecretRef {
            SecretRef::new(kind, value)
        }
        match self {
            Message::ServiceRequest(req) => vec![
                r(K::CustomerId, &req.customer_id),
                r(K::CustomerKey, req.reply_key.to_hex()),
            ],
            Message::JobSpec(spec) => vec![
                r(K::JobContent, &spec.job),
                r(K::CustomerKey, spec.reply_key.to_hex()),
            ],
            Message::TokenGrant { token, process_id } => {
                vec![r(K::TokenId, &token.token_id), r(K::ProcessId, process_id)]
            }
            Message::CircuitIssued { circuit, .. } => circuit
                .hops
                .iter()
                .map(|h| r(K::HopPseudonym, &h.pseudonym))
                .collect(),
            Message::MnRequest(req) => {
                let mut refs = vec![
                    r(K::TokenId, &req.token.token_id),
                    r(K::SessionId, &req.session_id),
                ];
                refs.extend(
                    req.circuit
                        .hops
                        .iter()
                        .map(|h| r(K::HopPseudonym, &h.pseudonym)),
                );
                refs
            }
            Message::SubJob { sub_payload, .. } => vec![r(K::SubPayload, sub_payload)],
            Message::Completion { session_id, .. } | Message::ResultDelivery { session_id, .. } => {
                vec![r(K::SessionId, session_id)]
            }
            Message::ResultPayload { value } => vec![r(K::ServiceResult, value)],
            Message::OpenPayment {
                handle,
                token_id,
                amount,
                ..
            } => vec![
                r(K::PaymentHandle, handle),
                r(K::TokenId, token_id),
                r(K::Amount, amount),
            ],
            Message::Invoice {
                bill,
                payment_handle,
                ..
            } => vec![
                r(K::SessionId, &bill.session_id),
                r(K::Amount, bill.total),
                r(K::PaymentHandle, payment_handle),
            ],
            Message::Payment {
                handle,
                amount,
                payer,
                receipt_key,
            } => vec![
                r(K::PaymentHandle, handle),
                r(K::Amount, amount),
                r(K::CustomerId, payer),
                r(K::CustomerKey, receipt_key.to_hex()),
            ],
            Message::Receipt {
                handle,
                payment_reference,
            } => vec![
                r(K::PaymentHandle, handle),
                r(K::PaymentRef, payment_reference),
            ],
            Message::PaymentNotice {
                handle,
                token_id,
                amount,
                payment_reference,
            } => vec![
                r(K::PaymentHandle, handle),
                r(K::TokenId, token_id),
                r(K::Amount, amount),
                r(K::PaymentRef, payment_reference),
            ],
            Message::CircuitRequest { .. }
            | Message::CircuitDenied { .. }
            | Message::MnForward { .. }
            | Message::SubResult { .. }
            | Message::EpochUpdate { .. } => Vec::new(),
        }
    }

    pub fn nested_boxes(&self) -> Vec<&SealedBox> {
        match self {
            Message::ServiceRequest(req) => vec![&req.job],
            Message::MnForward { request } => vec![request],
            Message::MnRequest(req) => vec![&req.job],
            Message::Completion { result, .. } | Message::ResultDelivery { result, .. } => {
                vec![result]
            }
            Message::Invoice {
                result: Some(result),
                ..
            } => vec![result],
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::generate_keypair;

    #[test]
    fn encoding_round_trips() {
        let m = Message::Receipt {
            handle: PaymentHandle::new("ph-1"),
            payment_reference: PaymentRef::new("pay-2"),
        };
        let bytes = m.encode();
        assert_eq!(Message::decode(&bytes).unwrap(), m);
        assert!(Message::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn sub_job_reveals_only_its_payload() {
        let m = Message::SubJob {
            index: 0,
            sub_payload: "sum[1,2]".into(),
            reply_key: generate_keypair(1).public().clone(),
        };
        assert_eq!(
            m.secret_refs(),
            vec![SecretRef::new(SecretKind::SubPayload, "sum[1,2]")]
        );
    }
}
