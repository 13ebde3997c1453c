use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{combine, ComputeError, Job, Relay, Value};
use crate::crypto::{
    open, seal, seal_reply, unwrap_reply, wrap_onion, KeyPair, PublicKey, SealedBox,
};
use crate::directory::{Circuit, DEFAULT_MIN_CIRCUIT_LENGTH};
use crate::ids::{LinkTag, Pseudonym, ServiceNumber, SessionId, TokenId};
use crate::manager::{TokenKey, TokenLedger};
use crate::rng::SimRng;
use crate::simnet::{Actor, Address, Body, Ctx, Envelope, Event, SecretKind};
use crate::wire::{JobSpec, Message};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MnState {
    Authenticating,
    Dispatching,
    Aggregating,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubService {
    pub session_id: SessionId,
    pub index: u32,
    pub sub_payload: Job,
    pub assigned: Pseudonym,
    /// Position of the assigned node in the circuit.
    pub hop: usize,
}

/// Split `job` into `n_parts` contiguous pieces assigned round-robin to the
/// circuit's slave hops.
pub fn decompose(
    session_id: &SessionId,
    job: &Job,
    circuit: &Circuit,
    n_parts: usize,
) -> Result<Vec<SubService>, ComputeError> {
    let available = circuit.slaves().len();
    if n_parts == 0 || n_parts > available {
        return Err(ComputeError::Capacity {
            requested: n_parts,
            available,
        });
    }
    Ok(job
        .split(n_parts)
        .into_iter()
        .enumerate()
        .map(|(i, sub_payload)| {
            let hop = i % available;
            SubService {
                session_id: session_id.clone(),
                index: i as u32,
                sub_payload,
                assigned: circuit.hops[hop].pseudonym.clone(),
                hop,
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct MnSession {
    pub session_id: SessionId,
    pub token_id: TokenId,
    pub service_number: ServiceNumber,
    pub circuit: Circuit,
    pub job: Job,
    pub customer_key: PublicKey,
    pub agent_key: PublicKey,
    pub reply_to: (Address, LinkTag),
    pub subs: Vec<SubService>,
    pub sub_results: Vec<Option<Value>>,
    pub result: Option<Value>,
    state: MnState,
}

impl MnSession {
    pub fn state(&self) -> MnState {
        self.state
    }

    /// Fill one result slot. Returns true once every slot is filled.
    pub fn record(&mut self, index: u32, value: Value) -> Result<bool, ComputeError> {
        if self.state != MnState::Dispatching {
            return Err(ComputeError::Unexpected("sub-result outside dispatch"));
        }
        let slot = self
            .sub_results
            .get_mut(index as usize)
            .ok_or(ComputeError::Unexpected("sub-result index"))?;
        if slot.is_some() {
            return Err(ComputeError::Unexpected("duplicate sub-result"));
        }
        *slot = Some(value);
        Ok(self.sub_results.iter().all(Option::is_some))
    }

    /// Move to aggregating and fold the slots in index order.
    pub fn aggregate(&mut self) -> Result<&Value, ComputeError> {
        if self.sub_results.iter().any(Option::is_none) {
            return Err(ComputeError::NotReady(self.state));
        }
        self.state = MnState::Aggregating;
        let values = self.sub_results.iter().flatten().cloned().collect();
        let value = combine(self.job.op, values)?;
        self.state = MnState::Done;
        Ok(self.result.insert(value))
    }

    /// Completion notice for the manager's agent. The result itself is sealed
    /// to the customer.
    pub fn notify_manager(&self, rng: &mut SimRng) -> Result<Message, ComputeError> {
        if self.state != MnState::Done {
            return Err(ComputeError::NotReady(self.state));
        }
        let value = self.result.clone().expect("done sessions hold a result");
        let payload = Message::ResultPayload { value }.encode();
        Ok(Message::Completion {
            session_id: self.session_id.clone(),
            completed: vec![(self.service_number, 1)],
            result: seal(&payload, &self.customer_key, rng)?,
        })
    }
}

pub struct MasterNode {
    relay: Relay,
    token_key: TokenKey,
    ledger: TokenLedger,
    epoch: u64,
    min_circuit_length: usize,
    sessions: BTreeMap<SessionId, MnSession>,
    pending: BTreeMap<LinkTag, (SessionId, u32)>,
}

impl MasterNode {
    pub fn new(keypair: KeyPair, token_key: TokenKey, rng: SimRng) -> Self {
        MasterNode {
            relay: Relay::new(keypair, rng),
            token_key,
            ledger: TokenLedger::default(),
            epoch: 0,
            min_circuit_length: DEFAULT_MIN_CIRCUIT_LENGTH,
            sessions: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn with_min_circuit_length(mut self, n: usize) -> Self {
        self.min_circuit_length = n;
        self
    }

    pub fn keypair(&self) -> &KeyPair {
        self.relay.keypair()
    }

    pub fn ledger(&self) -> &TokenLedger {
        &self.ledger
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn set_epoch(&mut self, epoch: u64) {
        self.epoch = self.epoch.max(epoch);
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.len()
    }

    /// Check the request and redeem its token. Nothing is redeemed unless
    /// every check passes.
    pub fn authenticate(
        &mut self,
        sealed: &SealedBox,
        reply_to: (Address, LinkTag),
    ) -> Result<MnSession, ComputeError> {
        let kp = self.relay.keypair();
        let Message::MnRequest(req) = Message::decode(&open(sealed, kp)?)? else {
            return Err(ComputeError::Unexpected("sealed request"));
        };
        self.ledger.check(&self.token_key, &req.token)?;
        if req.circuit.epoch < self.epoch {
            return Err(ComputeError::StaleCircuit {
                circuit: req.circuit.epoch,
                current: self.epoch,
            });
        }
        req.circuit.validate(self.min_circuit_length, kp.key_id())?;
        let Message::JobSpec(JobSpec { job, reply_key }) = Message::decode(&open(&req.job, kp)?)?
        else {
            return Err(ComputeError::Unexpected("job box"));
        };
        let job: Job = job.parse()?;
        self.ledger.redeem(&self.token_key, &req.token)?;

        let n = req.circuit.slaves().len();
        let subs = decompose(&req.session_id, &job, &req.circuit, n)?;
        Ok(MnSession {
            session_id: req.session_id,
            token_id: req.token.token_id,
            service_number: req.service_number,
            sub_results: vec![None; subs.len()],
            subs,
            circuit: req.circuit,
            job,
            customer_key: reply_key,
            agent_key: req.reply_key,
            reply_to,
            result: None,
            state: MnState::Dispatching,
        })
    }

    /// Send every sub-job round the circle to its assigned node.
    fn dispatch(&mut self, session: &MnSession, ctx: &mut Ctx<'_>) -> Result<(), ComputeError> {
        if session.circuit.epoch < self.epoch {
            return Err(ComputeError::StaleCircuit {
                circuit: session.circuit.epoch,
                current: self.epoch,
            });
        }
        let reply_key = self.relay.keypair().public().clone();
        for sub in &session.subs {
            let text = sub.sub_payload.to_string();
            ctx.secret_of(
                SecretKind::SubPayload,
                &text,
                Address::Node(sub.assigned.clone()),
            );
            let route = session.circuit.lap_to(sub.hop);
            let payload = Message::SubJob {
                index: sub.index,
                sub_payload: text,
                reply_key: reply_key.clone(),
            };
            let packet = wrap_onion(&payload.encode(), &route, self.relay.rng())?;
            let tag = self.relay.fresh_tag();
            self.pending
                .insert(tag, (session.session_id.clone(), sub.index));
            ctx.send(
                Address::Node(route[0].pseudonym.clone()),
                Body::Cell { tag, packet },
            );
        }
        Ok(())
    }

    fn on_request(
        &mut self,
        from: &Address,
        tag: LinkTag,
        payload: &[u8],
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ComputeError> {
        let Message::MnForward { request } = Message::decode(payload)? else {
            return Err(ComputeError::Unexpected("terminal payload"));
        };
        let session = self.authenticate(&request, (from.clone(), tag))?;
        for state in [MnState::Authenticating, MnState::Dispatching] {
            ctx.emit(Event::MnState {
                session_id: session.session_id.clone(),
                state,
            });
        }
        self.dispatch(&session, ctx)?;
        self.sessions.insert(session.session_id.clone(), session);
        Ok(())
    }

    fn on_sub_result(
        &mut self,
        tag: LinkTag,
        sealed: &SealedBox,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ComputeError> {
        let (session_id, index) = self
            .pending
            .remove(&tag)
            .ok_or(ComputeError::UnknownTag(tag))?;
        let (plain, _) = unwrap_reply(sealed, self.relay.keypair())?;
        let Message::SubResult {
            index: got,
            outcome,
        } = Message::decode(&plain)?
        else {
            return Err(ComputeError::Unexpected("reply"));
        };
        if got != index {
            return Err(ComputeError::Unexpected("sub-result index"));
        }
        let value = outcome.map_err(|error| ComputeError::SubJob { index, error })?;
        let session = self
            .sessions
            .get_mut(&session_id)
            .ok_or(ComputeError::Unexpected("sub-result for closed session"))?;
        if !session.record(index, value)? {
            return Ok(());
        }
        let value = session.aggregate()?.clone();
        for state in [MnState::Aggregating, MnState::Done] {
            ctx.emit(Event::MnState {
                session_id: session_id.clone(),
                state,
            });
        }
        ctx.secret(SecretKind::ServiceResult, &value);

        let session = self.sessions.remove(&session_id).expect("present");
        let notice = session.notify_manager(self.relay.rng())?;
        let sealed = seal_reply(&notice.encode(), &session.agent_key, self.relay.rng())?;
        let (to, tag) = session.reply_to;
        ctx.send(
            to,
            Body::Reply {
                tag,
                origin: session.agent_key,
                sealed,
            },
        );
        Ok(())
    }
}

impl Actor for MasterNode {
    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        let outcome = match &env.body {
            Body::Cell { tag, packet } => match self.relay.on_cell(&env.from, *tag, packet, ctx) {
                Ok(Some(payload)) => self.on_request(&env.from, *tag, &payload, ctx),
                Ok(None) => Ok(()),
                Err(e) => Err(e),
            },
            Body::Reply {
                tag,
                origin,
                sealed,
            } => match self.relay.on_reply(*tag, origin, sealed, ctx) {
                Ok(true) => Ok(()),
                Ok(false) => self.on_sub_result(*tag, sealed, ctx),
                Err(e) => Err(e),
            },
            Body::Sealed { sealed } if env.from == Address::Directory => {
                open(sealed, self.relay.keypair())
                    .map_err(ComputeError::from)
                    .and_then(|p| Ok(Message::decode(&p)?))
                    .and_then(|m| match m {
                        Message::EpochUpdate { epoch } => {
                            self.set_epoch(epoch);
                            Ok(())
                        }
                        other => Err(ComputeError::Unexpected(other.kind())),
                    })
            }
            other => Err(ComputeError::Unexpected(other.kind())),
        };
        if let Err(e) = outcome {
            ctx.fault(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{generate_keypair, Hop};

    fn circuit(slaves: usize) -> Circuit {
        Circuit {
            hops: (0..=slaves)
                .map(|i| Hop {
                    pseudonym: Pseudonym::new(format!("ps-{i}")),
                    key: generate_keypair(i as u64).public().clone(),
                })
                .collect(),
            epoch: 0,
        }
    }

    #[test]
    fn sum_splits_in_two() {
        let job: Job = "sum[1,2,3,4]".parse().unwrap();
        let subs = decompose(&SessionId::new("ses-1"), &job, &circuit(2), 2).unwrap();
        assert_eq!(subs[0].sub_payload.to_string(), "sum[1,2]");
        assert_eq!(subs[1].sub_payload.to_string(), "sum[3,4]");
        assert_eq!(subs[0].assigned.as_str(), "ps-0");
        assert_eq!(subs[1].assigned.as_str(), "ps-1");
    }

    #[test]
    fn one_part_is_identity() {
        let job: Job = "max[3,9]".parse().unwrap();
        let subs = decompose(&SessionId::new("ses-1"), &job, &circuit(2), 1).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].sub_payload, job);
    }

    #[test]
    fn too_many_parts() {
        let job: Job = "sum[1]".parse().unwrap();
        assert_eq!(
            decompose(&SessionId::new("ses-1"), &job, &circuit(2), 3),
            Err(ComputeError::Capacity {
                requested: 3,
                available: 2
            })
        );
    }

    #[test]
    fn lap_routes_end_at_assigned_hop() {
        let c = circuit(2);
        let r0: Vec<_> = c.lap_to(0).into_iter().map(|h| h.pseudonym).collect();
        let r1: Vec<_> = c.lap_to(1).into_iter().map(|h| h.pseudonym).collect();
        assert_eq!(r0, ["ps-1", "ps-2", "ps-0"].map(Pseudonym::new));
        assert_eq!(r1, ["ps-2", "ps-0", "ps-1"].map(Pseudonym::new));
    }
}
