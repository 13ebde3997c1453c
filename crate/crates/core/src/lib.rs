//! Deterministic simulator and protocol library for an agent-based anonymous
//! cloud: customers, a manager with per-session agents, slave and master
//! compute nodes, a directory server and a bank, connected by an instrumented
//! network whose transcripts can be analysed for what each party learns.

pub mod compute;
pub mod crypto;
pub mod customer;
pub mod directory;
pub mod ids;
pub mod manager;
pub mod rng;
pub mod scenario;
pub mod simnet;
pub mod wire;
