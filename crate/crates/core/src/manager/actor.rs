use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    compute_bill, AgentProcess, AgentState, BillingRecord, ManagerError, ServiceCatalog, Token,
    TokenKey, TokenState, WorkingState,
};
use crate::crypto::{
    generate_keypair, open, seal, unwrap_reply, wrap_onion, KeyId, KeyPair, PublicKey, SealedBox,
};
use crate::directory::{Circuit, DEFAULT_MIN_CIRCUIT_LENGTH};
use crate::ids::{
    LinkTag, PaymentHandle, PaymentRef, ProcessId, ServiceNumber, SessionId, TokenId,
};
use crate::rng::SimRng;
use crate::simnet::{Actor, Address, Body, Ctx, Envelope, Event, KeyScope, SecretKind};
use crate::wire::Message;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaymentMode {
    /// Pay once the result has been delivered.
    #[default]
    Postpaid,
    /// Pay before the job is dispatched.
    Prepaid,
}

impl fmt::Display for PaymentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PaymentMode::Postpaid => "postpaid",
            PaymentMode::Prepaid => "prepaid",
        })
    }
}

impl FromStr for PaymentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "postpaid" => Ok(PaymentMode::Postpaid),
            "prepaid" => Ok(PaymentMode::Prepaid),
            other => Err(format!("unknown payment mode {other:?}")),
        }
    }
}

/// Public keys every participant is provisioned with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anchors {
    pub manager: PublicKey,
    pub master: PublicKey,
    pub directory: PublicKey,
    pub bank: PublicKey,
}

/// Everything the manager holds that outlives a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagerSnapshot {
    pub billing_records: Vec<BillingRecord>,
    pub processes_spawned: u32,
    pub live_agents: usize,
}

pub struct Manager {
    keypair: KeyPair,
    catalog: ServiceCatalog,
    token_key: TokenKey,
    mode: PaymentMode,
    circuit_length: u32,
    anchors: Anchors,
    rng: SimRng,
    next_pid: u32,
    agents: BTreeMap<ProcessId, AgentProcess>,
    by_key: BTreeMap<KeyId, ProcessId>,
    billing: Vec<BillingRecord>,
}

impl Manager {
    pub fn new(
        keypair: KeyPair,
        catalog: ServiceCatalog,
        token_key: TokenKey,
        anchors: Anchors,
        rng: SimRng,
    ) -> Self {
        Manager {
            keypair,
            catalog,
            token_key,
            mode: PaymentMode::default(),
            circuit_length: DEFAULT_MIN_CIRCUIT_LENGTH as u32,
            anchors,
            rng,
            next_pid: 1,
            agents: BTreeMap::new(),
            by_key: BTreeMap::new(),
            billing: Vec::new(),
        }
    }

    pub fn with_mode(mut self, mode: PaymentMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_circuit_length(mut self, length: u32) -> Self {
        self.circuit_length = length;
        self
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn billing_records(&self) -> &[BillingRecord] {
        &self.billing
    }

    pub fn agent(&self, pid: ProcessId) -> Option<&AgentProcess> {
        self.agents.get(&pid)
    }

    /// Killed agents are removed outright, so any allocated id that is no
    /// longer live is dead.
    pub fn agent_state(&self, pid: ProcessId) -> Option<AgentState> {
        match self.agents.get(&pid) {
            Some(a) => Some(a.state()),
            None if pid.0 >= 1 && pid.0 < self.next_pid => Some(AgentState::Killed),
            None => None,
        }
    }

    pub fn snapshot(&self) -> ManagerSnapshot {
        ManagerSnapshot {
            billing_records: self.billing.clone(),
            processes_spawned: self.next_pid - 1,
            live_agents: self.agents.len(),
        }
    }

    /// Open a service request, issue a token and spawn an agent for it.
    pub fn handle_service_request(
        &mut self,
        sealed: &SealedBox,
        customer: Address,
    ) -> Result<(Token, ProcessId), ManagerError> {
        let req = match Message::decode(&open(sealed, &self.keypair)?)? {
            Message::ServiceRequest(req) => req,
            other => return Err(ManagerError::Unexpected(other.kind())),
        };
        self.catalog.get(req.service_number)?;

        let pid = ProcessId(self.next_pid);
        self.next_pid += 1;
        let session_id = SessionId::random(&mut self.rng);
        let token = Token {
            token_id: TokenId::random(&mut self.rng),
            service_number: req.service_number,
            state: TokenState::Issued,
        };
        let keypair = generate_keypair(self.rng.next_u64());
        let working = WorkingState {
            credential: self.token_key.credential(&token),
            token: token.clone(),
            customer,
            customer_key: req.reply_key,
            job: req.job,
            circuit_request: self.rng.next_u64(),
            circuit: None,
            bill: None,
            payment_handle: None,
            paid: false,
            served: false,
            keypair,
        };
        self.by_key.insert(working.keypair.key_id(), pid);
        self.agents
            .insert(pid, AgentProcess::spawn(pid, session_id, working));
        Ok((token, pid))
    }

    fn live(&mut self, pid: ProcessId) -> Result<&mut AgentProcess, ManagerError> {
        self.agents
            .get_mut(&pid)
            .ok_or(ManagerError::DeadAgent(pid))
    }

    fn transition(
        &mut self,
        pid: ProcessId,
        state: AgentState,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ManagerError> {
        self.live(pid)?.set_state(state)?;
        ctx.emit(Event::AgentState {
            process_id: pid,
            state,
        });
        Ok(())
    }

    fn on_request(
        &mut self,
        from: &Address,
        sealed: &SealedBox,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ManagerError> {
        let (token, pid) = self.handle_service_request(sealed, from.clone())?;
        let agent = &self.agents[&pid];
        let w = agent.working()?;
        ctx.secret(SecretKind::TokenId, &token.token_id);
        ctx.secret(SecretKind::ProcessId, pid);
        ctx.secret(SecretKind::SessionId, &agent.session_id);
        ctx.key_created(&w.keypair, KeyScope::Session);
        ctx.emit(Event::AgentState {
            process_id: pid,
            state: AgentState::Preparing,
        });

        let grant = Message::TokenGrant {
            token: w.credential.clone(),
            process_id: pid,
        };
        let grant = seal(&grant.encode(), &w.customer_key, &mut self.rng)?;
        ctx.send(from.clone(), Body::Sealed { sealed: grant });

        let request = Message::CircuitRequest {
            request_id: w.circuit_request,
            service_number: token.service_number,
            length: self.circuit_length,
            reply_key: w.keypair.public().clone(),
        };
        let request = seal(&request.encode(), &self.anchors.directory, &mut self.rng)?;
        ctx.send(Address::Directory, Body::Sealed { sealed: request });
        Ok(())
    }

    fn on_circuit(
        &mut self,
        pid: ProcessId,
        request_id: u64,
        circuit: Circuit,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ManagerError> {
        let master = self.anchors.master.key_id();
        let min = self.circuit_length as usize;
        let w = self.live(pid)?.working_mut()?;
        if w.circuit_request != request_id || w.circuit.is_some() {
            return Err(ManagerError::Unexpected("circuit_issued"));
        }
        if circuit.validate(min, master).is_err() {
            return Err(ManagerError::Unexpected("invalid circuit"));
        }
        w.circuit = Some(circuit);
        let service = w.token.service_number;
        match self.mode {
            PaymentMode::Postpaid => self.forward(pid, ctx),
            PaymentMode::Prepaid => self
                .redirect_to_bank(pid, &[(service, 1)], None, ctx)
                .map(|_| ()),
        }
    }

    fn forward(&mut self, pid: ProcessId, ctx: &mut Ctx<'_>) -> Result<(), ManagerError> {
        let agent = self
            .agents
            .get_mut(&pid)
            .ok_or(ManagerError::DeadAgent(pid))?;
        let circuit = agent
            .working()?
            .circuit
            .clone()
            .ok_or(ManagerError::Unexpected("forward without circuit"))?;
        let mn_key = &circuit.hops.last().expect("validated circuit").key;
        let request = agent.forward_to_mn(mn_key, &mut self.rng)?;
        let payload = Message::MnForward { request }.encode();
        let packet = wrap_onion(&payload, &circuit.hops, &mut self.rng)?;
        let tag = LinkTag(self.rng.next_u64());
        ctx.emit(Event::AgentState {
            process_id: pid,
            state: AgentState::Serving,
        });
        ctx.send(
            Address::Node(circuit.hops[0].pseudonym.clone()),
            Body::Cell { tag, packet },
        );
        Ok(())
    }

    /// Bill the session and open a payment session at the bank bound to the
    /// token and amount only.
    fn redirect_to_bank(
        &mut self,
        pid: ProcessId,
        completed: &[(ServiceNumber, u64)],
        result: Option<SealedBox>,
        ctx: &mut Ctx<'_>,
    ) -> Result<PaymentHandle, ManagerError> {
        let session_id = self.live(pid)?.session_id.clone();
        let bill = compute_bill(&self.catalog, &session_id, completed)?;
        let handle = PaymentHandle::random(&mut self.rng);
        ctx.secret(SecretKind::Amount, bill.total);
        ctx.secret(SecretKind::PaymentHandle, &handle);

        let agent = self.agents.get_mut(&pid).expect("checked live");
        let w = agent.working_mut()?;
        let open_payment = Message::OpenPayment {
            handle: handle.clone(),
            token_id: w.token.token_id.clone(),
            amount: bill.total,
            notify_key: w.keypair.public().clone(),
        };
        let open_payment = seal(&open_payment.encode(), &self.anchors.bank, &mut self.rng)?;
        ctx.send(
            Address::Bank,
            Body::Sealed {
                sealed: open_payment,
            },
        );

        let invoice = Message::Invoice {
            bill: bill.clone(),
            payment_handle: handle.clone(),
            result,
        };
        let invoice = seal(&invoice.encode(), &w.customer_key, &mut self.rng)?;
        ctx.send(w.customer.clone(), Body::Sealed { sealed: invoice });

        w.bill = Some(bill);
        w.payment_handle = Some(handle.clone());
        self.transition(pid, AgentState::AwaitingPayment, ctx)?;
        Ok(handle)
    }

    fn on_completion(
        &mut self,
        pid: ProcessId,
        sealed: &SealedBox,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ManagerError> {
        let agent = self
            .agents
            .get_mut(&pid)
            .ok_or(ManagerError::DeadAgent(pid))?;
        let (plain, _) = unwrap_reply(sealed, &agent.working()?.keypair)?;
        let Message::Completion {
            session_id,
            completed,
            result,
        } = Message::decode(&plain)?
        else {
            return Err(ManagerError::Unexpected("reply"));
        };
        if session_id != agent.session_id || agent.state() != AgentState::Serving {
            return Err(ManagerError::Unexpected("completion"));
        }
        let w = agent.working_mut()?;
        w.served = true;
        match self.mode {
            PaymentMode::Postpaid => {
                self.redirect_to_bank(pid, &completed, Some(result), ctx)?;
            }
            PaymentMode::Prepaid => {
                let delivery = Message::ResultDelivery { session_id, result };
                let delivery = seal(&delivery.encode(), &w.customer_key, &mut self.rng)?;
                ctx.send(w.customer.clone(), Body::Sealed { sealed: delivery });
                if w.paid {
                    self.kill(pid, ctx);
                }
            }
        }
        Ok(())
    }

    /// Persist the billing record for a settled payment and tear the session
    /// down once nothing is left to deliver.
    pub fn on_payment_notification(
        &mut self,
        pid: ProcessId,
        handle: &PaymentHandle,
        token_id: &TokenId,
        amount: u64,
        payment_reference: PaymentRef,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ManagerError> {
        let w = self.live(pid)?.working_mut()?;
        if w.payment_handle.as_ref() != Some(handle) || w.paid {
            return Err(ManagerError::UnknownPayment(handle.clone()));
        }
        let due = w.bill.as_ref().map_or(0, |b| b.total);
        if due != amount || &w.token.token_id != token_id {
            return Err(ManagerError::AmountMismatch { due, paid: amount });
        }
        w.paid = true;
        let served = w.served;
        self.billing.push(BillingRecord {
            token_id: token_id.clone(),
            amount,
            payment_reference,
            timestamp: ctx.now(),
        });
        if served {
            self.kill(pid, ctx);
            Ok(())
        } else {
            self.transition(pid, AgentState::Serving, ctx)?;
            self.forward(pid, ctx)
        }
    }

    fn kill(&mut self, pid: ProcessId, ctx: &mut Ctx<'_>) {
        if let Some(mut agent) = self.agents.remove(&pid) {
            if let Some(key) = agent.kill() {
                self.by_key.remove(&key);
                ctx.key_destroyed(key);
            }
            ctx.emit(Event::AgentState {
                process_id: pid,
                state: AgentState::Killed,
            });
        }
    }

    fn on_agent_box(
        &mut self,
        pid: ProcessId,
        sealed: &SealedBox,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ManagerError> {
        let plain = open(sealed, &self.live(pid)?.working()?.keypair)?;
        match Message::decode(&plain)? {
            Message::CircuitIssued {
                request_id,
                circuit,
            } => self.on_circuit(pid, request_id, circuit, ctx),
            Message::PaymentNotice {
                handle,
                token_id,
                amount,
                payment_reference,
            } => self.on_payment_notification(
                pid,
                &handle,
                &token_id,
                amount,
                payment_reference,
                ctx,
            ),
            other => Err(ManagerError::Unexpected(other.kind())),
        }
    }

    fn agent_for(&self, key: KeyId) -> Result<ProcessId, ManagerError> {
        self.by_key
            .get(&key)
            .copied()
            .ok_or(ManagerError::Unexpected("box for no live agent"))
    }

    fn gateway(
        &mut self,
        from: &Address,
        peer: &Address,
        sealed: &SealedBox,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ManagerError> {
        match (from, peer) {
            (Address::Customer(_), Address::Bank) | (Address::Bank, Address::Customer(_)) => {
                ctx.send(
                    peer.clone(),
                    Body::Gateway {
                        peer: from.clone(),
                        sealed: sealed.clone(),
                    },
                );
                Ok(())
            }
            _ => Err(ManagerError::Unexpected("gateway")),
        }
    }
}

impl Actor for Manager {
    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        let outcome = match &env.body {
            Body::Sealed { sealed } if sealed.recipient == self.keypair.key_id() => {
                self.on_request(&env.from, sealed, ctx)
            }
            Body::Sealed { sealed } => self
                .agent_for(sealed.recipient)
                .and_then(|pid| self.on_agent_box(pid, sealed, ctx)),
            Body::Reply { origin, sealed, .. } => self
                .agent_for(origin.key_id())
                .and_then(|pid| self.on_completion(pid, sealed, ctx)),
            Body::Gateway { peer, sealed } => self.gateway(&env.from, peer, sealed, ctx),
            other => Err(ManagerError::Unexpected(other.kind())),
        };
        if let Err(e) = outcome {
            ctx.fault(e);
        }
    }
}
