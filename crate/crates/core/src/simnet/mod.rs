//! Deterministic in-process network, transcript recording and adversary
//! knowledge analysis.

mod address;
mod envelope;
mod knowledge;
mod linkage;
mod secrets;
mod transcript;
mod world;

pub use address::{Address, BadAddress};
pub use envelope::{Body, Control, Envelope, SessionTag, Tick};
pub use knowledge::{
    knowledge, knowledge_in, principal_keys, record_refs, store_scan, AnalysisError, Format,
    KnowledgeSet, Opened, Unit, UnitGraph,
};
pub use linkage::{
    customer_sessions, linkage_report, linkage_report_in, Adversary, CustomerLinkage,
    LinkageReport, UnknownAdversary,
};
pub use secrets::{tokens, SecretDictionary, SecretEntry, SecretKind, SecretRef};
pub use transcript::{Event, EventRecord, KeyRecord, KeyScope, StoreSnapshot, Transcript};
pub use world::{ActorId, Ctx, Network, ReplayMode, SimError, DEFAULT_STEP_BUDGET};

/// A participant driven by envelope deliveries.
pub trait Actor {
    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>);
}

/// Principal labels the analysis gives special meaning to.
pub mod principal {
    pub const MANAGER: &str = "manager";
    pub const MASTER: &str = "mn";
    pub const DIRECTORY: &str = "ds";
    pub const BANK: &str = "bank";
    /// The keyless global observer.
    pub const OBSERVER: &str = "observer";
}
