use super::{ComputeError, Job, Relay, Value};
use crate::crypto::{peel, seal_reply, KeyPair, OnionPacket, Peeled};
use crate::ids::Pseudonym;
use crate::rng::SimRng;
use crate::simnet::{Actor, Body, Control, Ctx, Envelope};
use crate::wire::Message;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Forward {
    Next {
        next_hop: Pseudonym,
        inner: OnionPacket,
    },
    Deliver {
        payload: Vec<u8>,
    },
}

/// Peel one layer and check the next hop is reachable.
pub fn sn_relay(
    packet: &OnionPacket,
    kp: &KeyPair,
    reachable: impl Fn(&Pseudonym) -> bool,
) -> Result<Forward, ComputeError> {
    match peel(packet, kp)? {
        Peeled::Relay { next_hop, inner } => {
            if !reachable(&next_hop) {
                return Err(ComputeError::Routing(next_hop));
            }
            Ok(Forward::Next { next_hop, inner })
        }
        Peeled::Terminal { payload } => Ok(Forward::Deliver { payload }),
    }
}

pub fn sn_execute(sub_payload: &str) -> Result<Value, ComputeError> {
    Ok(sub_payload.parse::<Job>()?.evaluate()?)
}

pub struct SlaveNode {
    relay: Relay,
    epoch: u64,
    executed: u64,
}

impl SlaveNode {
    pub fn new(keypair: KeyPair, rng: SimRng) -> Self {
        SlaveNode {
            relay: Relay::new(keypair, rng),
            epoch: 0,
            executed: 0,
        }
    }

    pub fn keypair(&self) -> &KeyPair {
        self.relay.keypair()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn executed(&self) -> u64 {
        self.executed
    }

    fn on_terminal(
        &mut self,
        env: &Envelope,
        tag: crate::ids::LinkTag,
        payload: &[u8],
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ComputeError> {
        let Message::SubJob {
            index,
            sub_payload,
            reply_key,
        } = Message::decode(payload)?
        else {
            return Err(ComputeError::Unexpected("terminal payload"));
        };
        let outcome = sn_execute(&sub_payload).map_err(|e| e.to_string());
        self.executed += 1;
        let result = Message::SubResult { index, outcome };
        let sealed = seal_reply(&result.encode(), &reply_key, self.relay.rng())?;
        ctx.send(
            env.from.clone(),
            Body::Reply {
                tag,
                origin: reply_key,
                sealed,
            },
        );
        Ok(())
    }
}

impl Actor for SlaveNode {
    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        let outcome = match &env.body {
            Body::Cell { tag, packet } => match self.relay.on_cell(&env.from, *tag, packet, ctx) {
                Ok(Some(payload)) => self.on_terminal(env, *tag, &payload, ctx),
                Ok(None) => Ok(()),
                Err(e) => Err(e),
            },
            Body::Reply {
                tag,
                origin,
                sealed,
            } => match self.relay.on_reply(*tag, origin, sealed, ctx) {
                Ok(true) => Ok(()),
                Ok(false) => Err(ComputeError::UnknownTag(*tag)),
                Err(e) => Err(e),
            },
            Body::Control {
                control: Control::EpochAdvanced { epoch },
            } => {
                self.epoch = self.epoch.max(*epoch);
                Ok(())
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
    use crate::crypto::{generate_keypair, wrap_onion, CryptoError, Hop};
    use crate::rng::stream;

    fn hops(n: u64) -> (Vec<KeyPair>, Vec<Hop>) {
        let kps: Vec<_> = (0..n).map(|i| generate_keypair(10 + i)).collect();
        let hops = kps
            .iter()
            .enumerate()
            .map(|(i, k)| Hop {
                pseudonym: Pseudonym::new(format!("ps-{i}")),
                key: k.public().clone(),
            })
            .collect();
        (kps, hops)
    }

    #[test]
    fn middle_hop_forwards_two_layers() {
        let (kps, hops) = hops(3);
        let packet = wrap_onion(b"JOB", &hops, &mut stream(1, "t")).unwrap();
        let Forward::Next { inner, .. } = sn_relay(&packet, &kps[0], |_| true).unwrap() else {
            panic!("first hop relays");
        };
        match sn_relay(&inner, &kps[1], |_| true).unwrap() {
            Forward::Next { next_hop, inner } => {
                assert_eq!(next_hop, hops[2].pseudonym);
                assert_eq!(inner.layer_count, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn foreign_packet_is_wrong_recipient() {
        let (kps, hops) = hops(3);
        let packet = wrap_onion(b"JOB", &hops, &mut stream(1, "t")).unwrap();
        assert!(matches!(
            sn_relay(&packet, &kps[2], |_| true),
            Err(ComputeError::Crypto(CryptoError::WrongRecipient { .. }))
        ));
    }

    #[test]
    fn stale_next_hop_is_routing_error() {
        let (kps, hops) = hops(3);
        let packet = wrap_onion(b"JOB", &hops, &mut stream(1, "t")).unwrap();
        let stale = hops[1].pseudonym.clone();
        assert_eq!(
            sn_relay(&packet, &kps[0], |p| *p != stale),
            Err(ComputeError::Routing(stale))
        );
    }

    #[test]
    fn execute_sub_jobs() {
        assert_eq!(sn_execute("sum[1,2]"), Ok(Value::Int(3)));
        assert_eq!(sn_execute("sum[]"), Ok(Value::Int(0)));
        assert!(matches!(sn_execute("sum[1"), Err(ComputeError::Eval(_))));
    }
}
