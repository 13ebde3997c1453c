mod common;

use anoncloud_core::crypto::{
    generate_keypair, open, rewrap_reply, seal, seal_reply, unwrap_reply, wrap_onion, CryptoError,
    SealedBox,
};
use anoncloud_core::rng::SimRng;
use common::onion;
use proptest::prelude::*;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn onion_round_trips_and_isolates_layers(
        len in 1usize..=8,
        seed in any::<u64>(),
        body in proptest::collection::vec(any::<u8>(), 0..400),
    ) {
        let route = onion::route(len, seed >> 8);
        let mut rng = SimRng::seed_from_u64(seed);
        let customer = format!("cust-{seed:016x}");
        let mut payload = customer.clone().into_bytes();
        payload.extend_from_slice(&body);
        prop_assert_eq!(onion::check(&route, &payload, &customer, &mut rng), Ok(()));
    }

    #[test]
    fn sealed_box_opens_only_for_its_recipient(
        a in any::<u64>(),
        b in any::<u64>(),
        payload in proptest::collection::vec(any::<u8>(), 1..256),
    ) {
        prop_assume!(a != b);
        let (alice, bob) = (generate_keypair(a), generate_keypair(b));
        let mut rng = SimRng::seed_from_u64(a ^ b);
        let boxed = seal(&payload, alice.public(), &mut rng).unwrap();
        prop_assert_eq!(open(&boxed, &alice).unwrap(), payload);
        let is_wrong_recipient = matches!(open(&boxed, &bob), Err(CryptoError::WrongRecipient { .. }));
        prop_assert!(is_wrong_recipient);
        let wire = SealedBox::from_bytes(&boxed.to_bytes()).unwrap();
        prop_assert_eq!(wire, boxed);
    }

    #[test]
    fn reply_unwraps_through_any_number_of_relays(
        seed in any::<u64>(),
        relays in 0usize..8,
        message in proptest::collection::vec(any::<u8>(), 0..200),
    ) {
        let origin = generate_keypair(seed);
        let mut rng = SimRng::seed_from_u64(seed);
        let mut sealed = seal_reply(&message, origin.public(), &mut rng).unwrap();
        let mut wires = vec![sealed.to_bytes()];
        for _ in 0..relays {
            sealed = rewrap_reply(&sealed, origin.public(), &mut rng).unwrap();
            wires.push(sealed.to_bytes());
        }
        prop_assert_eq!(unwrap_reply(&sealed, &origin).unwrap(), (message, relays + 1));
        wires.sort();
        wires.dedup();
        prop_assert_eq!(wires.len(), relays + 1);
    }

    #[test]
    fn tampered_layers_fail_to_open(seed in any::<u64>(), flip in any::<prop::sample::Index>()) {
        let route = onion::route(3, seed >> 8);
        let mut rng = SimRng::seed_from_u64(seed);
        let mut packet = wrap_onion(b"payload", &route.hops, &mut rng).unwrap();
        let i = flip.index(packet.outer.body.len());
        packet.outer.body[i] ^= 0x01;
        prop_assert!(open(&packet.outer, &route.keys[0]).is_err());
    }
}

#[test]
fn same_seed_gives_identical_packets() {
    let route = onion::route(4, 5);
    let wrap = || {
        wrap_onion(b"hello", &route.hops, &mut SimRng::seed_from_u64(9))
            .unwrap()
            .outer
            .to_bytes()
    };
    assert_eq!(wrap(), wrap());
}

#[test]
fn wrap_rejects_bad_routes() {
    let route = onion::route(3, 1);
    let mut rng = SimRng::seed_from_u64(0);
    assert_eq!(
        wrap_onion(b"x", &[], &mut rng),
        Err(CryptoError::EmptyRoute)
    );
    assert_eq!(
        wrap_onion(b"", &route.hops, &mut rng),
        Err(CryptoError::EmptyPayload)
    );
    let repeated = vec![
        route.hops[0].clone(),
        route.hops[1].clone(),
        route.hops[0].clone(),
    ];
    assert!(matches!(
        wrap_onion(b"x", &repeated, &mut rng),
        Err(CryptoError::DuplicateHop(_))
    ));
}
