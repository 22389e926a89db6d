use std::sync::OnceLock;

use proptest::prelude::*;
use tinyake::cert::{verify_cert, Certificate, NodeId};
use tinyake::crypto::{CurveId, OpCounter};
use tinyake::engine::SECRET_LEN;
use tinyake::kgc::{generate_network, GeneratedNetwork};
use tinyake::wire::{
    LinkFrame, MessageKind, New1Packet, New2Packet, Nonce, WireError, WireLayout, ATTACHMENT, MAX_FRAME, MAX_PAYLOAD,
};

fn network(compressed: bool) -> &'static GeneratedNetwork {
    static PLAIN: OnceLock<GeneratedNetwork> = OnceLock::new();
    static COMPRESSED: OnceLock<GeneratedNetwork> = OnceLock::new();
    let cell = if compressed { &COMPRESSED } else { &PLAIN };
    cell.get_or_init(|| generate_network(3, CurveId::Secp160r1, 42, compressed).unwrap())
}

fn layout(compressed: bool) -> WireLayout {
    WireLayout::new(CurveId::Secp160r1.params(), compressed, SECRET_LEN)
}

#[test]
fn message_sizes() {
    let plain = layout(false);
    assert_eq!(plain.cert_len(), 82);
    assert_eq!(plain.new1_len(), 4 + 4 + 82);
    assert_eq!(plain.cipher_len(), 70);
    assert_eq!(plain.new2_len(), 70 + 40);
    let small = layout(true);
    assert_eq!(small.cert_len(), 63);
    assert_eq!(small.cipher_len(), 51);
    assert_eq!(small.new2_len(), 91);
    for l in [plain, small] {
        assert!(l.new1_len() <= MAX_PAYLOAD && l.new2_len() <= MAX_PAYLOAD);
    }
    assert_eq!(MAX_PAYLOAD + ATTACHMENT, MAX_FRAME);
}

#[test]
fn oversize_body_is_refused() {
    let frame = LinkFrame {
        src: NodeId(1),
        dst: NodeId(2),
        kind: MessageKind::New2,
        body: vec![0; MAX_PAYLOAD + 1],
    };
    assert_eq!(frame.encode(), Err(WireError::BudgetExceeded(MAX_PAYLOAD + 1)));
}

fn kind() -> impl Strategy<Value = MessageKind> {
    prop_oneof![Just(MessageKind::New1), Just(MessageKind::New2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn frame_round_trip(
        src in any::<u16>(),
        dst in any::<u16>(),
        kind in kind(),
        body in proptest::collection::vec(any::<u8>(), 0..=MAX_PAYLOAD),
    ) {
        let frame = LinkFrame { src: NodeId(src), dst: NodeId(dst), kind, body };
        let bytes = frame.encode().unwrap();
        prop_assert_eq!(bytes.len(), frame.body.len() + ATTACHMENT);
        prop_assert_eq!(LinkFrame::decode(&bytes).unwrap(), frame);
    }

    #[test]
    fn corrupted_frames_are_rejected(
        body in proptest::collection::vec(any::<u8>(), 1..=MAX_PAYLOAD),
        pos in any::<usize>(),
        bit in 0u8..8,
    ) {
        let frame = LinkFrame { src: NodeId(3), dst: NodeId(4), kind: MessageKind::New1, body };
        let mut bytes = frame.encode().unwrap();
        // header, body and FCS are covered; the pad is not
        let covered = bytes.len() - 5;
        bytes[pos % covered] ^= 1 << bit;
        prop_assert!(LinkFrame::decode(&bytes).is_err());
    }

    #[test]
    fn truncated_frames_are_rejected(
        body in proptest::collection::vec(any::<u8>(), 0..=MAX_PAYLOAD),
        cut in any::<usize>(),
    ) {
        let frame = LinkFrame { src: NodeId(3), dst: NodeId::BROADCAST, kind: MessageKind::New2, body };
        let bytes = frame.encode().unwrap();
        let keep = cut % bytes.len();
        prop_assert!(LinkFrame::decode(&bytes[..keep]).is_err());
    }

    #[test]
    fn new1_round_trip(round in any::<u32>(), nonce in any::<[u8; 4]>(), who in 0usize..3, compressed in any::<bool>()) {
        let l = layout(compressed);
        let p = New1Packet { round, nonce: Nonce(nonce), cert: network(compressed).bundles[who].cert.clone() };
        let body = p.encode(&l).unwrap();
        prop_assert_eq!(body.len(), l.new1_len());
        prop_assert_eq!(New1Packet::decode(&body, &l).unwrap(), p);
        prop_assert!(New1Packet::decode(&body[..body.len() - 1], &l).is_err());
    }

    #[test]
    fn new2_round_trip(cipher in proptest::collection::vec(any::<u8>(), 70), r in any::<[u8; 20]>(), s in any::<[u8; 20]>()) {
        let l = layout(false);
        let sig = tinyake::crypto::Signature::from_bytes(l.curve, &[r, s].concat()).unwrap();
        let p = New2Packet { cipher, sig };
        let body = p.encode(&l).unwrap();
        prop_assert_eq!(body.len(), 110);
        prop_assert_eq!(New2Packet::decode(&body, &l).unwrap(), p);
        let mut long = body.clone();
        long.push(0);
        prop_assert!(New2Packet::decode(&long, &l).is_err());
    }

    #[test]
    fn any_certificate_mutation_fails(who in 0usize..3, pos in any::<usize>(), bit in 0u8..8, compressed in any::<bool>()) {
        let net = network(compressed);
        let curve = CurveId::Secp160r1.params();
        let mut bytes = net.bundles[who].cert.to_bytes(curve);
        let i = pos % bytes.len();
        bytes[i] ^= 1 << bit;
        let accepted = match Certificate::from_bytes(curve, &bytes, compressed) {
            Ok(cert) => verify_cert(curve, &cert, &net.kgc.public, &mut OpCounter::new()),
            Err(_) => false,
        };
        prop_assert!(!accepted);
    }
}

#[test]
fn certificates_from_another_kgc_fail() {
    let curve = CurveId::Secp160r1.params();
    let other = generate_network(1, CurveId::Secp160r1, 43, false).unwrap();
    let cert = &network(false).bundles[0].cert;
    assert!(verify_cert(
        curve,
        cert,
        &network(false).kgc.public,
        &mut OpCounter::new()
    ));
    assert!(!verify_cert(curve, cert, &other.kgc.public, &mut OpCounter::new()));
}
