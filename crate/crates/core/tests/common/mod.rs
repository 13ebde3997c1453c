#![allow(dead_code)]

use anoncloud_core::compute::Value;
use anoncloud_core::ids::ServiceNumber;
use anoncloud_core::manager::PaymentMode;
use anoncloud_core::scenario::{ScenarioConfig, ScenarioEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Evaluates a job string without going through the crate's parser: the
/// item list of every job is a JSON array.
pub fn job_oracle(job: &str) -> Value {
    let open = job.find('[').expect("job has an item list");
    let op = job[..open].trim();
    let items: Vec<serde_json::Value> = serde_json::from_str(&job[open..]).expect("items are JSON");
    let ints = || items.iter().map(|v| v.as_i64().expect("integer item"));
    match op {
        "sum" => Value::Int(ints().sum()),
        "min" => ints().min().map_or(Value::Nothing, Value::Int),
        "max" => ints().max().map_or(Value::Nothing, Value::Int),
        "concat" => Value::Text(
            items
                .iter()
                .map(|v| v.as_str().expect("string item"))
                .collect(),
        ),
        other => panic!("unknown op {other}"),
    }
}

/// One unit of the ordered service at its catalog price.
pub fn billing_oracle(config: &ScenarioConfig, service: ServiceNumber) -> u64 {
    config
        .catalog
        .iter()
        .find(|e| e.service_number == service)
        .map(|e| e.unit_price)
        .expect("service in catalog")
}

pub const CUSTOMERS: [&str; 4] = ["alice", "bob", "carol", "dave"];

pub fn random_job(rng: &mut impl Rng, service: ServiceNumber) -> String {
    let n = rng.gen_range(0..7);
    if service == ServiceNumber(2) {
        let words: Vec<String> = (0..n.max(1))
            .map(|_| {
                let len = rng.gen_range(1..6);
                let w: String = (0..len)
                    .map(|_| rng.gen_range(b'a'..=b'z') as char)
                    .collect();
                format!("\"{w}\"")
            })
            .collect();
        format!("concat[{}]", words.join(","))
    } else {
        let op = ["sum", "min", "max"][rng.gen_range(0..3)];
        let items: Vec<String> = (0..n)
            .map(|_| rng.gen_range(-500i64..500).to_string())
            .collect();
        format!("{op}[{}]", items.join(","))
    }
}

/// A valid scenario with `sessions` sessions, drawn from `seed`: random
/// customers, services, jobs, payment mode, slave count and circuit length,
/// with rotations sprinkled between sessions.
pub fn random_config(seed: u64, sessions: usize) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slaves = rng.gen_range(3..9);
    let mut config = ScenarioConfig::canonical(seed, slaves);
    config.circuit_length = rng.gen_range(3..=(slaves + 1).min(5));
    config.payment_mode = if rng.gen_bool(0.5) {
        PaymentMode::Prepaid
    } else {
        PaymentMode::Postpaid
    };
    config.events.clear();
    for _ in 0..sessions {
        if rng.gen_bool(0.3) {
            config.events.push(ScenarioEvent::Rotate { at: None });
        }
        let service = ServiceNumber(rng.gen_range(1..=2));
        config.events.push(ScenarioEvent::Session {
            at: None,
            customer: CUSTOMERS[rng.gen_range(0..CUSTOMERS.len())].into(),
            service,
            job: random_job(&mut rng, service),
        });
    }
    config.validate().expect("generated config is valid");
    config
}

pub mod onion {
    use anoncloud_core::crypto::{
        generate_keypair, open_layer, peel, wrap_onion, Hop, KeyPair, OnionPacket, Peeled,
    };
    use anoncloud_core::ids::Pseudonym;
    use anoncloud_core::rng::SimRng;
    use rand::RngCore;

    pub struct Route {
        pub keys: Vec<KeyPair>,
        pub hops: Vec<Hop>,
    }

    pub fn route(len: usize, seed: u64) -> Route {
        let keys: Vec<KeyPair> = (0..len as u64)
            .map(|i| generate_keypair(seed * 64 + i))
            .collect();
        let hops = keys
            .iter()
            .enumerate()
            .map(|(i, kp)| Hop {
                pseudonym: Pseudonym::new(format!("ps-{seed:06x}{i:06x}")),
                key: kp.public().clone(),
            })
            .collect();
        Route { keys, hops }
    }

    fn contains(hay: &[u8], needle: &[u8]) -> bool {
        !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
    }

    /// Wrap `payload` for `route`, then walk the packet hop by hop. Checks
    /// that peeling in order gives the payload back, that no other hop's
    /// key opens a layer (with the clear recipient tag honest or forged),
    /// and that no hop's plaintext names the customer or any hop other than
    /// the next one. `customer` must occur in `payload`.
    pub fn check(
        route: &Route,
        payload: &[u8],
        customer: &str,
        rng: &mut SimRng,
    ) -> Result<(), String> {
        let packet = wrap_onion(payload, &route.hops, rng).map_err(|e| e.to_string())?;
        let n = route.hops.len();
        let mut current: OnionPacket = packet;
        for i in 0..n {
            for (j, other) in route.keys.iter().enumerate() {
                if j == i {
                    continue;
                }
                if open_layer(&current, other).is_ok() {
                    return Err(format!("hop {j} opened layer {i}"));
                }
                let mut forged = current.clone();
                forged.outer.recipient = other.key_id();
                if open_layer(&forged, other).is_ok() {
                    return Err(format!("hop {j} opened layer {i} with a forged tag"));
                }
            }

            let plain =
                open_layer(&current, &route.keys[i]).map_err(|e| format!("layer {i}: {e}"))?;
            for (j, hop) in route.hops.iter().enumerate() {
                if j != i + 1 && contains(&plain, hop.pseudonym.as_str().as_bytes()) {
                    return Err(format!("hop {i} sees pseudonym of hop {j}"));
                }
            }
            if i + 1 < n
                && (contains(&plain, customer.as_bytes())
                    || (payload.len() >= 16 && contains(&plain, payload)))
            {
                return Err(format!("relay hop {i} sees the payload"));
            }

            match peel(&current, &route.keys[i]).map_err(|e| format!("peel {i}: {e}"))? {
                Peeled::Relay { next_hop, inner } if i + 1 < n => {
                    if next_hop != route.hops[i + 1].pseudonym {
                        return Err(format!("hop {i} forwards to {next_hop}"));
                    }
                    current = inner;
                }
                Peeled::Terminal { payload: out } if i + 1 == n => {
                    if out != payload {
                        return Err("terminal payload differs".into());
                    }
                }
                _ => return Err(format!("layer {i} has the wrong kind")),
            }
        }
        Ok(())
    }

    pub fn payload_with_customer(rng: &mut impl RngCore, len: usize) -> (Vec<u8>, String) {
        let customer = format!("cust-{:016x}", rng.next_u64());
        let mut body = vec![0u8; len];
        rng.fill_bytes(&mut body);
        let mut payload = customer.clone().into_bytes();
        payload.extend_from_slice(&body);
        (payload, customer)
    }
}

pub mod directory {
    use anoncloud_core::compute::{ComputeError, MasterNode};
    use anoncloud_core::crypto::{generate_keypair, seal, KeyPair};
    use anoncloud_core::directory::{
        Circuit, NodeRecord, NodeRole, Registry, ServiceDescriptor, DEFAULT_MIN_CIRCUIT_LENGTH,
    };
    use anoncloud_core::ids::{LinkTag, ServiceNumber, SessionId, TokenId, TrueId};
    use anoncloud_core::manager::{Token, TokenKey, TokenState};
    use anoncloud_core::rng::SimRng;
    use anoncloud_core::simnet::Address;
    use anoncloud_core::wire::{JobSpec, Message, MnRequest};
    use rand::SeedableRng;

    pub struct Fixture {
        pub registry: Registry,
        pub master_key: KeyPair,
        pub master: NodeRecord,
    }

    /// `nodes - 1` slave nodes plus one master, keyed and named from `seed`.
    pub fn registry(nodes: usize, seed: u64) -> Fixture {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut registry = Registry::new(DEFAULT_MIN_CIRCUIT_LENGTH);
        let master_key = generate_keypair(seed.wrapping_mul(1000));
        let mut master = None;
        for i in 0..nodes {
            let is_master = i + 1 == nodes;
            let key = if is_master {
                master_key.clone()
            } else {
                generate_keypair(seed.wrapping_mul(1000) + 1 + i as u64)
            };
            let record = NodeRecord {
                true_id: TrueId::new(format!("node-{i:04}")),
                pseudonym: registry.fresh_pseudonym(&mut rng),
                public_key: key.public().clone(),
                role: if is_master {
                    NodeRole::Master
                } else {
                    NodeRole::Slave
                },
            };
            if is_master {
                master = Some(record.clone());
            }
            registry.register_node(record).unwrap();
        }
        Fixture {
            registry,
            master_key,
            master: master.unwrap(),
        }
    }

    pub fn circuit(f: &Fixture, length: usize, rng: &mut SimRng) -> Circuit {
        let desc = ServiceDescriptor {
            service_number: ServiceNumber(1),
        };
        let master = f.registry.master().unwrap().clone();
        f.registry
            .build_circuit(&desc, &master, length, rng)
            .unwrap()
    }

    /// Present `circuit` to a master node that has seen `epoch`. Returns the
    /// outcome and the token's state afterwards.
    pub fn present(
        f: &Fixture,
        circuit: Circuit,
        epoch: u64,
    ) -> (Result<(), ComputeError>, TokenState) {
        let mut rng = SimRng::seed_from_u64(epoch);
        let token_key = TokenKey::new([7; 32]);
        let mut mn = MasterNode::new(
            f.master_key.clone(),
            token_key.clone(),
            SimRng::seed_from_u64(1),
        );
        mn.set_epoch(epoch);
        let token = Token {
            token_id: TokenId::new("tok-0000000000000001"),
            service_number: ServiceNumber(1),
            state: TokenState::Issued,
        };
        let reply = generate_keypair(99);
        let job = Message::JobSpec(JobSpec {
            job: "sum[1,2,3]".into(),
            reply_key: reply.public().clone(),
        });
        let mn_pub = f.master_key.public();
        let req = Message::MnRequest(MnRequest {
            token: token_key.credential(&token),
            service_number: ServiceNumber(1),
            session_id: SessionId::new("ses-0000000000000001"),
            circuit,
            reply_key: reply.public().clone(),
            job: seal(&job.encode(), mn_pub, &mut rng).unwrap(),
        });
        let sealed = seal(&req.encode(), mn_pub, &mut rng).unwrap();
        let outcome = mn
            .authenticate(&sealed, (Address::Manager, LinkTag(1)))
            .map(|_| ());
        let state = mn.ledger().state(&token.token_id);
        (outcome, state)
    }
}
