use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Bill, ManagerError, Token, TokenCredential, TokenError, TokenState};
use crate::crypto::{seal, KeyId, KeyPair, PublicKey, SealedBox};
use crate::directory::Circuit;
use crate::ids::{PaymentHandle, ProcessId, ServiceNumber, SessionId};
use crate::simnet::Address;
use crate::wire::{Message, MnRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentState {
    Preparing,
    Serving,
    AwaitingPayment,
    Killed,
}

/// Session scratch data. Dropped as a whole when the agent is killed.
#[derive(Debug, Clone)]
pub struct WorkingState {
    pub keypair: KeyPair,
    pub token: Token,
    pub credential: TokenCredential,
    pub customer: Address,
    pub customer_key: PublicKey,
    pub job: SealedBox,
    pub circuit_request: u64,
    pub circuit: Option<Circuit>,
    pub bill: Option<Bill>,
    pub payment_handle: Option<PaymentHandle>,
    pub paid: bool,
    pub served: bool,
}

#[derive(Debug, Clone)]
pub struct AgentProcess {
    pub process_id: ProcessId,
    pub session_id: SessionId,
    state: AgentState,
    working: Option<WorkingState>,
}

impl AgentProcess {
    pub fn spawn(process_id: ProcessId, session_id: SessionId, working: WorkingState) -> Self {
        AgentProcess {
            process_id,
            session_id,
            state: AgentState::Preparing,
            working: Some(working),
        }
    }

    pub fn state(&self) -> AgentState {
        self.state
    }

    pub fn service_number(&self) -> Result<ServiceNumber, ManagerError> {
        Ok(self.working()?.token.service_number)
    }

    pub fn working(&self) -> Result<&WorkingState, ManagerError> {
        self.working
            .as_ref()
            .ok_or(ManagerError::DeadAgent(self.process_id))
    }

    pub fn working_mut(&mut self) -> Result<&mut WorkingState, ManagerError> {
        self.working
            .as_mut()
            .ok_or(ManagerError::DeadAgent(self.process_id))
    }

    pub fn set_state(&mut self, state: AgentState) -> Result<(), ManagerError> {
        if self.state == AgentState::Killed {
            return Err(ManagerError::DeadAgent(self.process_id));
        }
        self.state = state;
        Ok(())
    }

    /// Seal the token, service number and the customer's job box for the
    /// master node. No customer identity goes into the request.
    pub fn forward_to_mn<R: RngCore + CryptoRng>(
        &mut self,
        mn_key: &PublicKey,
        rng: &mut R,
    ) -> Result<SealedBox, ManagerError> {
        let pid = self.process_id;
        match self.state {
            AgentState::Preparing | AgentState::Serving => {}
            AgentState::Killed => return Err(ManagerError::DeadAgent(pid)),
            state => {
                return Err(ManagerError::InvalidState {
                    pid,
                    state,
                    op: "forward to the master node",
                })
            }
        }
        let state = self.state;
        let session_id = self.session_id.clone();
        let w = self.working_mut()?;
        if w.token.state != TokenState::Issued {
            return Err(TokenError::TokenReplay(w.token.token_id.clone()).into());
        }
        let circuit = w.circuit.clone().ok_or(ManagerError::InvalidState {
            pid,
            state,
            op: "forward without a circuit",
        })?;
        let request = MnRequest {
            token: w.credential.clone(),
            service_number: w.token.service_number,
            session_id,
            circuit,
            reply_key: w.keypair.public().clone(),
            job: w.job.clone(),
        };
        let sealed = seal(&Message::MnRequest(request).encode(), mn_key, rng)?;
        w.token.state = TokenState::Redeemed;
        self.state = AgentState::Serving;
        Ok(sealed)
    }

    /// Erase the working state. Returns the id of the destroyed agent key.
    pub fn kill(&mut self) -> Option<KeyId> {
        self.state = AgentState::Killed;
        self.working.take().map(|w| w.keypair.key_id())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{generate_keypair, open, Hop};
    use crate::ids::{Pseudonym, TokenId};
    use crate::manager::TokenKey;
    use crate::rng::stream;

    fn agent() -> (AgentProcess, KeyPair) {
        let mn = generate_keypair(50);
        let token = Token {
            token_id: TokenId::new("tok-00aa"),
            service_number: ServiceNumber(1),
            state: TokenState::Issued,
        };
        let hops = (0..3)
            .map(|i| Hop {
                pseudonym: Pseudonym::new(format!("ps-{i}")),
                key: if i == 2 {
                    mn.public().clone()
                } else {
                    generate_keypair(60 + i).public().clone()
                },
            })
            .collect();
        let w = WorkingState {
            keypair: generate_keypair(1),
            credential: TokenKey::new([1; 32]).credential(&token),
            token,
            customer: Address::Customer(0),
            customer_key: generate_keypair(2).public().clone(),
            job: seal(b"job", mn.public(), &mut stream(1, "t")).unwrap(),
            circuit_request: 1,
            circuit: Some(Circuit { hops, epoch: 0 }),
            bill: None,
            payment_handle: None,
            paid: false,
            served: false,
        };
        (
            AgentProcess::spawn(ProcessId(1), SessionId::new("ses-1"), w),
            mn,
        )
    }

    #[test]
    fn forward_moves_to_serving_and_hides_customer() {
        let (mut a, mn) = agent();
        let sealed = a.forward_to_mn(mn.public(), &mut stream(2, "t")).unwrap();
        assert_eq!(a.state(), AgentState::Serving);
        let plain = open(&sealed, &mn).unwrap();
        let text = String::from_utf8(plain).unwrap();
        assert!(text.contains("tok-00aa"));
        assert!(!text.contains("cust"));
        assert!(!text.contains(&a.working().unwrap().customer_key.to_hex()));
    }

    #[test]
    fn second_forward_is_a_replay() {
        let (mut a, mn) = agent();
        a.forward_to_mn(mn.public(), &mut stream(2, "t")).unwrap();
        assert!(matches!(
            a.forward_to_mn(mn.public(), &mut stream(3, "t")),
            Err(ManagerError::Token(TokenError::TokenReplay(_)))
        ));
    }

    #[test]
    fn killed_agent_is_dead() {
        let (mut a, mn) = agent();
        assert!(a.kill().is_some());
        assert_eq!(a.state(), AgentState::Killed);
        assert!(matches!(a.working(), Err(ManagerError::DeadAgent(_))));
        assert!(matches!(
            a.forward_to_mn(mn.public(), &mut stream(2, "t")),
            Err(ManagerError::DeadAgent(_))
        ));
    }
}
