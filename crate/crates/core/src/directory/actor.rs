use super::{DirectoryError, Registry, Requester, RotationMapping, ServiceDescriptor};
use crate::crypto::{open, seal, CryptoError, KeyPair};
use crate::rng::SimRng;
use crate::simnet::{Actor, Address, Body, Control, Ctx, Envelope, Event, SecretKind};
use crate::wire::{Message, WireError};

#[derive(Debug, thiserror::Error)]
enum DsFault {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Directory(#[from] DirectoryError),
    #[error("unexpected {0} message")]
    Unexpected(&'static str),
}

pub struct DirectoryServer {
    keypair: KeyPair,
    registry: Registry,
    rng: SimRng,
}

fn requester(addr: &Address) -> Requester {
    match addr {
        Address::Manager => Requester::Manager,
        Address::Node(_) => Requester::MasterNode,
        _ => Requester::Customer,
    }
}

impl DirectoryServer {
    pub fn new(keypair: KeyPair, registry: Registry, rng: SimRng) -> Self {
        DirectoryServer {
            keypair,
            registry,
            rng,
        }
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Rotate every pseudonym, move the network bindings with them and tell
    /// the nodes a new epoch has started.
    pub fn rotate(&mut self, ctx: &mut Ctx<'_>) -> RotationMapping {
        let mapping = self.registry.rotate_pseudonyms(&mut self.rng);
        ctx.rebind(
            mapping
                .iter()
                .map(|(old, new)| (Address::Node(old.clone()), Address::Node(new.clone())))
                .collect(),
        );
        let epoch = self.registry.epoch().epoch_number;
        ctx.emit(Event::EpochAdvanced { epoch });
        for record in self.registry.records() {
            let to = Address::Node(record.pseudonym.clone());
            if record.role == super::NodeRole::Master {
                let update = Message::EpochUpdate { epoch }.encode();
                match seal(&update, &record.public_key, &mut self.rng) {
                    Ok(sealed) => ctx.send(to, Body::Sealed { sealed }),
                    Err(e) => ctx.fault(e),
                }
            } else {
                ctx.send(
                    to,
                    Body::Control {
                        control: Control::EpochAdvanced { epoch },
                    },
                );
            }
        }
        mapping
    }

    fn on_request(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) -> Result<(), DsFault> {
        let Body::Sealed { sealed } = &env.body else {
            return Err(DsFault::Unexpected(env.body.kind()));
        };
        let Message::CircuitRequest {
            request_id,
            service_number,
            length,
            reply_key,
        } = Message::decode(&open(sealed, &self.keypair)?)?
        else {
            return Err(DsFault::Unexpected("sealed"));
        };
        let who = requester(&env.from);
        let reply = match self.issue(who, service_number, length as usize) {
            Ok(circuit) => {
                for hop in &circuit.hops {
                    ctx.secret_of(
                        SecretKind::HopPseudonym,
                        &hop.pseudonym,
                        Address::Node(hop.pseudonym.clone()),
                    );
                }
                Message::CircuitIssued {
                    request_id,
                    circuit,
                }
            }
            Err(DirectoryError::AccessDenied(who)) => {
                return Err(DirectoryError::AccessDenied(who).into())
            }
            Err(e) => {
                ctx.fault(&e);
                Message::CircuitDenied {
                    request_id,
                    reason: e.to_string(),
                }
            }
        };
        let sealed = seal(&reply.encode(), &reply_key, &mut self.rng)?;
        ctx.send(env.from.clone(), Body::Sealed { sealed });
        Ok(())
    }

    fn issue(
        &mut self,
        who: Requester,
        service_number: crate::ids::ServiceNumber,
        length: usize,
    ) -> Result<super::Circuit, DirectoryError> {
        self.registry.current_list(who)?;
        let mn = self
            .registry
            .master()
            .cloned()
            .ok_or(DirectoryError::UnknownMaster)?;
        self.registry.build_circuit(
            &ServiceDescriptor { service_number },
            &mn,
            length,
            &mut self.rng,
        )
    }
}

impl Actor for DirectoryServer {
    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        if let Err(e) = self.on_request(env, ctx) {
            ctx.fault(e);
        }
    }
}
