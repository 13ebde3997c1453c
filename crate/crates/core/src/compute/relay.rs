use std::collections::BTreeMap;

use rand::RngCore;

use super::{sn_relay, ComputeError, Forward};
use crate::crypto::{rewrap_reply, KeyPair, OnionPacket, PublicKey, SealedBox};
use crate::ids::LinkTag;
use crate::rng::SimRng;
use crate::simnet::{Address, Body, Ctx};

/// Onion relay state shared by slave and master nodes: the node key, its
/// random stream and the return table mapping outgoing link tags back to the
/// link a cell arrived on.
pub struct Relay {
    keypair: KeyPair,
    rng: SimRng,
    returns: BTreeMap<LinkTag, (Address, LinkTag)>,
}

impl Relay {
    pub fn new(keypair: KeyPair, rng: SimRng) -> Self {
        Relay {
            keypair,
            rng,
            returns: BTreeMap::new(),
        }
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    pub fn fresh_tag(&mut self) -> LinkTag {
        LinkTag(self.rng.next_u64())
    }

    /// Peel one layer. Relay layers are forwarded here; a terminal payload is
    /// handed back to the caller.
    pub fn on_cell(
        &mut self,
        from: &Address,
        tag: LinkTag,
        packet: &OnionPacket,
        ctx: &mut Ctx<'_>,
    ) -> Result<Option<Vec<u8>>, ComputeError> {
        match sn_relay(packet, &self.keypair, |p| {
            ctx.is_bound(&Address::Node(p.clone()))
        })? {
            Forward::Next { next_hop, inner } => {
                let out = self.fresh_tag();
                self.returns.insert(out, (from.clone(), tag));
                ctx.send(
                    Address::Node(next_hop),
                    Body::Cell {
                        tag: out,
                        packet: inner,
                    },
                );
                Ok(None)
            }
            Forward::Deliver { payload } => Ok(Some(payload)),
        }
    }

    /// Pass a reply one hop further back. Returns false if the tag is not
    /// in the return table, i.e. this node originated the path.
    pub fn on_reply(
        &mut self,
        tag: LinkTag,
        origin: &PublicKey,
        sealed: &SealedBox,
        ctx: &mut Ctx<'_>,
    ) -> Result<bool, ComputeError> {
        let Some((prev, prev_tag)) = self.returns.remove(&tag) else {
            return Ok(false);
        };
        let wrapped = rewrap_reply(sealed, origin, &mut self.rng)?;
        ctx.send(
            prev,
            Body::Reply {
                tag: prev_tag,
                origin: origin.clone(),
                sealed: wrapped,
            },
        );
        Ok(true)
    }
}
