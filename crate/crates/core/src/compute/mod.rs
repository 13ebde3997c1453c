//! Master node and slave nodes: authentication, job splitting, onion-routed
//! dispatch and result aggregation.

mod job;
mod master;
mod relay;
mod slave;

pub use job::{combine, Item, Job, JobError, JobOp, Value};
pub use master::{decompose, MasterNode, MnSession, MnState, SubService};
pub use relay::Relay;
pub use slave::{sn_execute, sn_relay, Forward, SlaveNode};

use thiserror::Error;

use crate::crypto::CryptoError;
use crate::directory::DirectoryError;
use crate::ids::{LinkTag, Pseudonym};
use crate::manager::TokenError;
use crate::wire::WireError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComputeError {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error("circuit from epoch {circuit} is stale (current epoch {current})")]
    StaleCircuit { circuit: u64, current: u64 },
    #[error(transparent)]
    InvalidCircuit(#[from] DirectoryError),
    #[error("cannot split into {requested} parts over {available} slave nodes")]
    Capacity { requested: usize, available: usize },
    #[error("no route to next hop {0}")]
    Routing(Pseudonym),
    #[error(transparent)]
    Eval(#[from] JobError),
    #[error("sub-job {index} failed: {error}")]
    SubJob { index: u32, error: String },
    #[error("session is {0:?}, not done")]
    NotReady(MnState),
    #[error("no return path for tag {0:?}")]
    UnknownTag(LinkTag),
    #[error("unexpected {0} message")]
    Unexpected(&'static str),
}
