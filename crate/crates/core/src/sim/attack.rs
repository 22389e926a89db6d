//! Scripted active attacks against a pair of honest nodes.
//!
//! The attacker holds its own key pair and a rogue KGC key, hears every
//! transmission, may suppress deliveries and may inject frames under any
//! source address. A victim key counts as compromised when the attacker
//! knows either secret value behind it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use super::{loss::splitmix64, Adversary, Injection, LossModel, SimError, Simulation, Topology, TopologyKind};
use crate::cert::{self, Certificate, NodeId};
use crate::crypto::{self, Ciphertext, CurveId, CurveParams, EcPoint, EncryptOptions, KeyPair, OpCounter};
use crate::engine::{DropCounters, EngineConfig, NeighborState, SecretValue, SECRET_LEN};
use crate::kgc::generate_network;
use crate::wire::{LinkFrame, MessageKind, New1Packet, New2Packet, Nonce, WireLayout};

const A: NodeId = NodeId(1);
const B: NodeId = NodeId(2);
const SYBIL: NodeId = NodeId(99);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackScenario {
    /// Replays A's New1 from the previous stage to B, verbatim and with the
    /// round field rewritten, while hiding A's fresh New1.
    ReplayNew1,
    /// Replays B's previous-stage New2 to A in place of the fresh one.
    ReplayNew2,
    /// Presents certificates minted by a rogue KGC or with transplanted
    /// signatures, then a New2 signed with the attacker's key.
    ForgeCert,
    /// Suppresses B's New2 to A and injects modified copies.
    TamperNew2,
    /// A and B are out of range. The attacker relays their New1s and answers
    /// each with its own New2.
    MitmRelay,
}

impl AttackScenario {
    pub const ALL: [AttackScenario; 5] = [
        AttackScenario::ReplayNew1,
        AttackScenario::ReplayNew2,
        AttackScenario::ForgeCert,
        AttackScenario::TamperNew2,
        AttackScenario::MitmRelay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackScenario::ReplayNew1 => "replay-new1",
            AttackScenario::ReplayNew2 => "replay-new2",
            AttackScenario::ForgeCert => "forge-cert",
            AttackScenario::TamperNew2 => "tamper-new2",
            AttackScenario::MitmRelay => "mitm-relay",
        }
    }

    fn stages(self) -> u32 {
        match self {
            AttackScenario::ReplayNew1 | AttackScenario::ReplayNew2 => 2,
            _ => 1,
        }
    }
}

impl std::str::FromStr for AttackScenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackScenario::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

impl fmt::Display for AttackScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackReport {
    pub scenario: AttackScenario,
    pub curve: CurveId,
    pub seed: u64,
    /// Directed `(holder, partner)` pairs with a current-stage key.
    pub established: Vec<(NodeId, NodeId)>,
    pub compromised_keys: u64,
    pub adversary_registrations: u64,
    pub injected: u64,
    pub drops: BTreeMap<NodeId, DropCounters>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl fmt::Display for AttackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {} on {} (seed {}): {}",
            self.scenario,
            self.curve.name(),
            self.seed,
            if self.passed { "PASS" } else { "FAIL" }
        )?;
        for c in &self.checks {
            writeln!(f, "  [{}] {}", if c.passed { "pass" } else { "FAIL" }, c.name)?;
        }
        for (id, d) in &self.drops {
            writeln!(
                f,
                "  node {id}: cert_fail={} sig_fail={} mac_fail={} stale={}",
                d.cert_fail, d.sig_fail, d.mac_fail, d.stale
            )?;
        }
        write!(
            f,
            "  injected={} compromised_keys={} adversary_registrations={} established={:?}",
            self.injected,
            self.compromised_keys,
            self.adversary_registrations,
            self.established
                .iter()
                .map(|(a, b)| format!("{a}->{b}"))
                .collect::<Vec<_>>()
        )
    }
}

struct Attacker {
    scenario: AttackScenario,
    curve: &'static CurveParams,
    layout: WireLayout,
    keypair: KeyPair,
    rogue_kgc: KeyPair,
    seed: u64,
    draws: u64,
    round: u32,
    nonces: HashMap<NodeId, Nonce>,
    publics: HashMap<NodeId, EcPoint>,
    certs: HashMap<NodeId, Certificate>,
    /// Last round in which the one-shot injection fired.
    replayed_round: u32,
    first_new1: Option<Vec<u8>>,
    first_new2: Option<Vec<u8>>,
    chosen: Vec<SecretValue>,
    learned: Vec<SecretValue>,
}

impl Attacker {
    fn next_seed(&mut self) -> u64 {
        self.draws += 1;
        splitmix64(self.seed ^ self.draws.rotate_left(32))
    }

    fn frame(src: NodeId, dst: NodeId, kind: MessageKind, body: Vec<u8>) -> Vec<u8> {
        LinkFrame { src, dst, kind, body }
            .encode()
            .expect("attacker frames fit")
    }

    /// New2 from `claimed` to `victim` carrying an attacker-chosen secret,
    /// signed with the attacker's own key over the victim's nonce.
    fn forge_new2(&mut self, claimed: NodeId, victim: NodeId) -> Option<Injection> {
        let public = self.publics.get(&victim)?.clone();
        let nonce = *self.nonces.get(&victim)?;
        let seed = self.next_seed();
        let mut secret = [0u8; SECRET_LEN];
        secret.copy_from_slice(&crypto::sha1(&seed.to_be_bytes())[..SECRET_LEN]);
        self.chosen.push(SecretValue(secret));
        let mut ops = OpCounter::new();
        let opts = EncryptOptions {
            compressed: self.layout.compressed,
            max_plaintext: SECRET_LEN,
        };
        let cipher = crypto::encrypt(self.curve, &public, &secret, opts, seed, &mut ops)
            .ok()?
            .to_bytes(self.curve);
        let sig = crypto::sign(
            self.curve,
            &self.keypair.private,
            &New2Packet::signed_bytes(&cipher, &nonce),
            seed,
            &mut ops,
        )
        .ok()?;
        let body = New2Packet { cipher, sig }.encode(&self.layout).ok()?;
        Some(Injection {
            to: victim,
            frame: Self::frame(claimed, victim, MessageKind::New2, body),
        })
    }

    fn try_decrypt(&mut self, cipher: &[u8]) {
        let Ok(ct) = Ciphertext::from_bytes(self.curve, cipher, self.layout.compressed) else {
            return;
        };
        if let Ok(pt) = crypto::decrypt(self.curve, &self.keypair.private, &ct, &mut OpCounter::new()) {
            if let Ok(s) = <[u8; SECRET_LEN]>::try_from(pt.as_slice()) {
                self.learned.push(SecretValue(s));
            }
        }
    }

    fn forged_certs(&self, nonce: Nonce) -> Vec<Injection> {
        let public = &self.keypair.public;
        let mut out = Vec::new();
        let rogue = |id| cert::issue(self.curve, id, public, &self.rogue_kgc.private, self.layout.compressed);
        let mut certs: Vec<Certificate> = [B, SYBIL].into_iter().filter_map(|id| rogue(id).ok()).collect();
        if let (Some(genuine), Ok(mut transplanted)) = (self.certs.get(&A), rogue(B)) {
            transplanted.sig = genuine.sig.clone();
            certs.push(transplanted);
        }
        for cert in certs {
            let id = cert.id;
            let body = New1Packet {
                round: self.round,
                nonce,
                cert,
            }
            .encode(&self.layout)
            .expect("same layout");
            out.push(Injection {
                to: A,
                frame: Self::frame(id, NodeId::BROADCAST, MessageKind::New1, body),
            });
        }
        out
    }

    fn on_new1(&mut self, sender: NodeId, frame: &[u8], packet: New1Packet) -> Vec<Injection> {
        self.round = self.round.max(packet.round);
        if let Ok(q) = packet.cert.public_key(self.curve) {
            self.publics.insert(sender, q);
        }
        self.nonces.insert(sender, packet.nonce);
        self.certs.insert(sender, packet.cert.clone());
        match self.scenario {
            AttackScenario::ReplayNew1 if sender == A => {
                if packet.round == 1 && self.first_new1.is_none() {
                    self.first_new1 = Some(frame.to_vec());
                }
                if packet.round >= 2 && self.replayed_round < packet.round {
                    self.replayed_round = packet.round;
                    let Some(old) = self.first_new1.clone() else {
                        return Vec::new();
                    };
                    let old_frame = LinkFrame::decode(&old).expect("recorded frame");
                    let mut rewritten = New1Packet::decode(&old_frame.body, &self.layout).expect("recorded body");
                    rewritten.round = packet.round;
                    let body = rewritten.encode(&self.layout).expect("same layout");
                    return vec![
                        Injection { to: B, frame: old },
                        Injection {
                            to: B,
                            frame: Self::frame(A, NodeId::BROADCAST, MessageKind::New1, body),
                        },
                    ];
                }
                Vec::new()
            }
            AttackScenario::ForgeCert if sender == A && self.replayed_round < packet.round => {
                self.replayed_round = packet.round;
                self.forged_certs(packet.nonce)
            }
            AttackScenario::MitmRelay => {
                let other = if sender == A { B } else { A };
                vec![Injection {
                    to: other,
                    frame: frame.to_vec(),
                }]
            }
            _ => Vec::new(),
        }
    }

    fn on_new2(&mut self, sender: NodeId, dst: NodeId, frame: &[u8], packet: New2Packet) -> Vec<Injection> {
        self.try_decrypt(&packet.cipher);
        match self.scenario {
            AttackScenario::ReplayNew2 if sender == B && dst == A => {
                if self.round == 1 && self.first_new2.is_none() {
                    self.first_new2 = Some(frame.to_vec());
                }
                match (&self.first_new2, self.round >= 2) {
                    (Some(old), true) => vec![Injection {
                        to: A,
                        frame: old.clone(),
                    }],
                    _ => Vec::new(),
                }
            }
            AttackScenario::ForgeCert if sender == B && dst == A => self.forge_new2(B, A).into_iter().collect(),
            AttackScenario::TamperNew2 if sender == B && dst == A => {
                let mut out = Vec::new();
                let mut flipped = packet.cipher.clone();
                let last = flipped.len() - 1;
                flipped[last - crypto::MAC_LEN] ^= 0x01;
                let body = [flipped, packet.sig.to_bytes(self.curve)].concat();
                out.push(Injection {
                    to: A,
                    frame: Self::frame(B, A, MessageKind::New2, body),
                });
                let mut sig = packet.sig.to_bytes(self.curve);
                sig[0] ^= 0x80;
                let body = [packet.cipher.clone(), sig].concat();
                out.push(Injection {
                    to: A,
                    frame: Self::frame(B, A, MessageKind::New2, body),
                });
                // swap in our own ciphertext under B's genuine signature
                if let Some(mut own) = self.forge_new2(B, A) {
                    let own_frame = LinkFrame::decode(&own.frame).expect("own frame");
                    let own_packet = New2Packet::decode(&own_frame.body, &self.layout).expect("own body");
                    let body = New2Packet {
                        cipher: own_packet.cipher,
                        sig: packet.sig.clone(),
                    }
                    .encode(&self.layout)
                    .expect("same layout");
                    own.frame = Self::frame(B, A, MessageKind::New2, body);
                    out.push(own);
                }
                out
            }
            AttackScenario::MitmRelay => {
                let victim = sender;
                let claimed = dst;
                self.forge_new2(claimed, victim).into_iter().collect()
            }
            _ => Vec::new(),
        }
    }
}

impl Adversary for Attacker {
    fn observe(&mut self, _now: u64, sender: NodeId, frame: &[u8]) -> Vec<Injection> {
        let Ok(link) = LinkFrame::decode(frame) else {
            return Vec::new();
        };
        match link.kind {
            MessageKind::New1 => match New1Packet::decode(&link.body, &self.layout) {
                Ok(p) => self.on_new1(sender, frame, p),
                Err(_) => Vec::new(),
            },
            MessageKind::New2 => match New2Packet::decode(&link.body, &self.layout) {
                Ok(p) => self.on_new2(sender, link.dst, frame, p),
                Err(_) => Vec::new(),
            },
        }
    }

    fn blocks(&self, sender: NodeId, recipient: NodeId, frame: &[u8]) -> bool {
        let Ok(link) = LinkFrame::decode(frame) else {
            return false;
        };
        match self.scenario {
            AttackScenario::ReplayNew1 => {
                sender == A
                    && recipient == B
                    && link.kind == MessageKind::New1
                    && New1Packet::decode(&link.body, &self.layout).is_ok_and(|p| p.round >= 2)
            }
            AttackScenario::ReplayNew2 => {
                sender == B && recipient == A && link.kind == MessageKind::New2 && self.round >= 2
            }
            AttackScenario::TamperNew2 => sender == B && recipient == A && link.kind == MessageKind::New2,
            _ => false,
        }
    }

    fn knowledge(&self) -> Vec<SecretValue> {
        self.chosen.iter().chain(&self.learned).copied().collect()
    }

    fn controlled_keys(&self) -> Vec<EcPoint> {
        vec![self.keypair.public.clone(), self.rogue_kgc.public.clone()]
    }
}

/// Runs one scenario against freshly minted nodes 1 (A) and 2 (B) on a
/// lossless channel with one retransmission.
pub fn run_attack(scenario: AttackScenario, curve_id: CurveId, seed: u64) -> Result<AttackReport, SimError> {
    let net = generate_network(2, curve_id, seed, false).map_err(|e| SimError::Topology(e.to_string()))?;
    let curve = curve_id.params();
    let positions = match scenario {
        AttackScenario::MitmRelay => vec![(0.0, 0.0), (200.0, 0.0)],
        _ => vec![(0.0, 0.0), (25.0, 0.0)],
    };
    let topology = Topology::from_positions(TopologyKind::Custom, 250.0, 50.0, positions);
    let attacker = Attacker {
        scenario,
        curve,
        layout: WireLayout::new(curve, false, SECRET_LEN),
        keypair: crypto::keygen(curve, splitmix64(seed ^ 0xA77A_C4E4)),
        rogue_kgc: crypto::keygen(curve, splitmix64(seed ^ 0x0B06_0E00)),
        seed,
        draws: 0,
        round: 0,
        nonces: HashMap::new(),
        publics: HashMap::new(),
        certs: HashMap::new(),
        replayed_round: 0,
        first_new1: None,
        first_new2: None,
        chosen: Vec::new(),
        learned: Vec::new(),
    };
    let mut sim = Simulation::new(
        topology,
        &net.bundles,
        EngineConfig::with_interval(10, 1),
        LossModel::lossless(),
        seed,
    )?
    .with_adversary(Box::new(attacker));
    for _ in 0..scenario.stages() {
        sim.run_stage();
    }
    Ok(assess(scenario, curve_id, seed, &sim))
}

fn assess(scenario: AttackScenario, curve: CurveId, seed: u64, sim: &Simulation) -> AttackReport {
    let adv = sim.adversary().expect("attack runs carry an adversary");
    let knowledge = adv.knowledge();
    let controlled = adv.controlled_keys();

    let mut established = Vec::new();
    let mut compromised = 0;
    let mut registrations = 0;
    let mut drops = BTreeMap::new();
    for e in sim.engines() {
        drops.insert(e.id(), e.metrics().drops);
        for entry in e.neighbors() {
            if controlled.contains(&entry.public) {
                registrations += 1;
            }
            if entry.state != NeighborState::Established {
                continue;
            }
            let leaked =
                knowledge.contains(&entry.own_secret) || entry.partner_secret.is_some_and(|s| knowledge.contains(&s));
            if leaked {
                compromised += 1;
            }
            if Some(entry.partner_round) == e.round() {
                established.push((e.id(), entry.partner));
            }
        }
    }
    established.sort();

    let holds = |holder: NodeId, partner: NodeId| established.contains(&(holder, partner));
    let drop_of = |id: NodeId| drops.get(&id).copied().unwrap_or_default();
    let mut checks = vec![
        Check {
            name: "no victim key known to the attacker",
            passed: compromised == 0,
        },
        Check {
            name: "no attacker key registered by a victim",
            passed: registrations == 0,
        },
    ];
    match scenario {
        AttackScenario::ReplayNew1 => {
            checks.push(Check {
                name: "verbatim replay dropped as stale",
                passed: drop_of(B).stale >= 1,
            });
            checks.push(Check {
                name: "A accepts no key bound to its old nonce",
                passed: !holds(A, B) && drop_of(A).stale >= 1,
            });
        }
        AttackScenario::ReplayNew2 => {
            checks.push(Check {
                name: "replayed New2 dropped as stale",
                passed: drop_of(A).stale >= 1,
            });
            checks.push(Check {
                name: "A holds no key from the replay",
                passed: !holds(A, B),
            });
        }
        AttackScenario::ForgeCert => {
            checks.push(Check {
                name: "all forged certificates rejected",
                passed: drop_of(A).cert_fail >= 3,
            });
            checks.push(Check {
                name: "New2 under the attacker's key rejected",
                passed: drop_of(A).sig_fail >= 1,
            });
            checks.push(Check {
                name: "genuine pair still establishes",
                passed: holds(A, B) && holds(B, A),
            });
        }
        AttackScenario::TamperNew2 => {
            checks.push(Check {
                name: "every tampered New2 fails its signature",
                passed: drop_of(A).sig_fail >= 3,
            });
            checks.push(Check {
                name: "A holds no key for B",
                passed: !holds(A, B),
            });
        }
        AttackScenario::MitmRelay => {
            checks.push(Check {
                name: "relayed answers fail signature checks at both ends",
                passed: drop_of(A).sig_fail >= 1 && drop_of(B).sig_fail >= 1,
            });
            checks.push(Check {
                name: "no established state",
                passed: established.is_empty(),
            });
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    let injected = sim.result().traffic.injected;
    AttackReport {
        scenario,
        curve,
        seed,
        established,
        compromised_keys: compromised,
        adversary_registrations: registrations,
        injected,
        drops,
        checks,
        passed,
    }
}
