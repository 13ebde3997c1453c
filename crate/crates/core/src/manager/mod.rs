//! Manager, its per-session agents, and the bank gateway.

mod actor;
mod agent;
mod bank;
mod billing;
mod catalog;
mod token;

pub use actor::{Anchors, Manager, ManagerSnapshot, PaymentMode};
pub use agent::{AgentProcess, AgentState, WorkingState};
pub use bank::Bank;
pub use billing::{compute_bill, Bill, BillingRecord, LineItem};
pub use catalog::{CatalogEntry, ServiceCatalog};
pub use token::{Token, TokenCredential, TokenError, TokenKey, TokenLedger, TokenState};

use thiserror::Error;

use crate::crypto::CryptoError;
use crate::ids::{PaymentHandle, ProcessId, ServiceNumber};
use crate::wire::WireError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManagerError {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error("unknown service number {0}")]
    UnknownService(ServiceNumber),
    #[error("service number {0} is listed twice")]
    DuplicateService(ServiceNumber),
    #[error("agent {0} has been killed")]
    DeadAgent(ProcessId),
    #[error("agent {pid} cannot {op} while {state:?}")]
    InvalidState {
        pid: ProcessId,
        state: AgentState,
        op: &'static str,
    },
    #[error("no open payment session {0}")]
    UnknownPayment(PaymentHandle),
    #[error("payment of {paid} does not match the open amount {due}")]
    AmountMismatch { due: u64, paid: u64 },
    #[error("bill total overflows")]
    BillOverflow,
    #[error("unexpected {0} message")]
    Unexpected(&'static str),
}
