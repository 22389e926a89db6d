//! Per-node key establishment state machine.
//!
//! The engine is a deterministic function of its state, the incoming event
//! and the seed it was built with. It never reads a clock: every timing
//! decision comes from the `now` carried by events.
//!
//! A stage runs as follows. The node broadcasts New1 (round, nonce,
//! certificate), repeated `retransmissions` times. On a valid New1 from a
//! partner it registers the partner's key and nonce, picks a secret value for
//! that partner and answers with New2: the secret encrypted to the partner,
//! signed together with the partner's nonce. On a New2 whose signature
//! verifies against its own current nonce, it decrypts the partner's secret
//! and XORs it with its own to form the pairwise key.

mod config;
mod metrics;
mod neighbor;

use std::collections::{BTreeMap, VecDeque};

use hmac::{Hmac, Mac};
use log::debug;
use serde::Serialize;
use sha1::Sha1;
use thiserror::Error;

pub use config::EngineConfig;
pub use metrics::{DropCause, DropCounters, Metrics};
pub use neighbor::{NeighborEntry, NeighborState, PairwiseKey, SecretValue, SECRET_LEN};

use crate::cert::{self, NodeId};
use crate::crypto::{self, Ciphertext, CryptoError, CurveParams, EncryptOptions, OpCounter};
use crate::kgc::SecurityBundle;
use crate::wire::{LinkFrame, MessageKind, New1Packet, New2Packet, Nonce, WireLayout, NONCE_LEN};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("bundle rejected: {0}")]
    Bundle(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EngineEvent {
    StartStage { round: u32, now: u64 },
    Tick { now: u64 },
    Frame { bytes: Vec<u8>, now: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PurgeReason {
    RegistrationTimeout,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EngineAction {
    /// `dst` is [`NodeId::BROADCAST`] for broadcasts.
    Send {
        dst: NodeId,
        frame: Vec<u8>,
    },
    KeyEstablished {
        partner: NodeId,
        key: PairwiseKey,
    },
    EntryPurged {
        partner: NodeId,
        reason: PurgeReason,
    },
}

#[derive(Clone, Debug)]
struct Stage {
    round: u32,
    nonce: Nonce,
    new1_frame: Vec<u8>,
    pending_retransmissions: VecDeque<u64>,
}

#[derive(Clone, Debug)]
struct Orphan {
    src: NodeId,
    body: Vec<u8>,
    arrived_at: u64,
}

/// Outcome of one processing attempt.
enum Disposition {
    Processed,
    Ignored,
    Buffered,
    Dropped(DropCause),
}

#[derive(Clone, Debug, Serialize)]
pub struct NeighborSummary {
    pub partner: NodeId,
    pub state: NeighborState,
    pub partner_round: u32,
}

/// Exportable view of an engine's counters and neighbor table.
#[derive(Clone, Debug, Serialize)]
pub struct EngineSnapshot {
    pub node: NodeId,
    pub round: Option<u32>,
    pub metrics: Metrics,
    pub ops: OpCounter,
    pub orphans: usize,
    pub neighbors: Vec<NeighborSummary>,
}

pub struct Engine {
    config: EngineConfig,
    bundle: SecurityBundle,
    curve: &'static CurveParams,
    layout: WireLayout,
    prf_key: [u8; 20],
    stage: Option<Stage>,
    prev_nonce: Option<Nonce>,
    neighbors: BTreeMap<NodeId, NeighborEntry>,
    orphans: VecDeque<Orphan>,
    outbox: VecDeque<(NodeId, Vec<u8>)>,
    metrics: Metrics,
    ops: OpCounter,
}

impl Engine {
    pub fn new(bundle: SecurityBundle, config: EngineConfig, seed: u64) -> Result<Engine, EngineError> {
        config.validate()?;
        if bundle.cert.compressed != config.compressed {
            return Err(EngineError::Bundle(
                "certificate encoding does not match the configured point mode".into(),
            ));
        }
        let curve = bundle.curve.params();
        let mut material = b"tinyake-engine".to_vec();
        material.extend(seed.to_be_bytes());
        material.extend(bundle.node_id.to_bytes());
        material.extend(bundle.keypair.private.to_bytes(curve));
        Ok(Engine {
            config,
            curve,
            layout: WireLayout::new(curve, config.compressed, SECRET_LEN),
            prf_key: crypto::sha1(&material),
            bundle,
            stage: None,
            prev_nonce: None,
            neighbors: BTreeMap::new(),
            orphans: VecDeque::new(),
            outbox: VecDeque::new(),
            metrics: Metrics::default(),
            ops: OpCounter::new(),
        })
    }

    pub fn id(&self) -> NodeId {
        self.bundle.node_id
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn layout(&self) -> &WireLayout {
        &self.layout
    }

    pub fn round(&self) -> Option<u32> {
        self.stage.as_ref().map(|s| s.round)
    }

    pub fn current_nonce(&self) -> Option<Nonce> {
        self.stage.as_ref().map(|s| s.nonce)
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn ops(&self) -> &OpCounter {
        &self.ops
    }

    pub fn neighbors(&self) -> impl Iterator<Item = &NeighborEntry> {
        self.neighbors.values()
    }

    pub fn entry(&self, partner: NodeId) -> Option<&NeighborEntry> {
        self.neighbors.get(&partner)
    }

    pub fn pairwise_key(&self, partner: NodeId) -> Option<PairwiseKey> {
        self.neighbors.get(&partner).and_then(NeighborEntry::pairwise_key)
    }

    pub fn registered_count(&self) -> usize {
        self.neighbors
            .values()
            .filter(|e| e.state == NeighborState::Registered)
            .count()
    }

    pub fn orphan_count(&self) -> usize {
        self.orphans.len()
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            node: self.id(),
            round: self.round(),
            metrics: self.metrics,
            ops: self.ops,
            orphans: self.orphans.len(),
            neighbors: self
                .neighbors
                .values()
                .map(|e| NeighborSummary {
                    partner: e.partner,
                    state: e.state,
                    partner_round: e.partner_round,
                })
                .collect(),
        }
    }

    pub fn handle(&mut self, event: EngineEvent) -> Vec<EngineAction> {
        match event {
            EngineEvent::StartStage { round, now } => self.start_stage(round, now),
            EngineEvent::Tick { now } => self.on_timer(now),
            EngineEvent::Frame { bytes, now } => self.on_frame(&bytes, now),
        }
    }

    /// Draws a fresh nonce and broadcasts New1, scheduling the configured
    /// number of identical retransmissions.
    pub fn start_stage(&mut self, round: u32, now: u64) -> Vec<EngineAction> {
        if let Some(stage) = &self.stage {
            if round <= stage.round {
                debug!("node {}: ignoring start of non-increasing round {round}", self.id());
                return Vec::new();
            }
        }
        let nonce = Nonce(
            self.prf(b"nonce", &round.to_be_bytes())[..NONCE_LEN]
                .try_into()
                .expect("nonce length"),
        );
        let packet = New1Packet {
            round,
            nonce,
            cert: self.bundle.cert.clone(),
        };
        let body = packet.encode(&self.layout).expect("own certificate fits the layout");
        let new1_frame = LinkFrame {
            src: self.id(),
            dst: NodeId::BROADCAST,
            kind: MessageKind::New1,
            body,
        }
        .encode()
        .expect("New1 fits a frame");
        let interval = self.config.retransmit_interval;
        let pending_retransmissions = (1..=u64::from(self.config.retransmissions))
            .map(|i| now + i * interval)
            .collect();
        self.prev_nonce = self.stage.as_ref().map(|s| s.nonce);
        self.stage = Some(Stage {
            round,
            nonce,
            new1_frame: new1_frame.clone(),
            pending_retransmissions,
        });
        let mut actions = Vec::new();
        self.enqueue(NodeId::BROADCAST, new1_frame);
        self.flush(&mut actions);
        actions
    }

    pub fn on_frame(&mut self, bytes: &[u8], now: u64) -> Vec<EngineAction> {
        self.metrics.frames_received += 1;
        self.metrics.bytes_received += bytes.len() as u64;
        let mut actions = Vec::new();
        let disposition = match LinkFrame::decode(bytes) {
            Err(e) => {
                debug!("node {}: undecodable frame: {e}", self.id());
                Disposition::Dropped(DropCause::Malformed)
            }
            Ok(frame) if frame.src == self.id() => Disposition::Dropped(DropCause::Misaddressed),
            Ok(frame) if !frame.is_broadcast() && frame.dst != self.id() => {
                Disposition::Dropped(DropCause::Misaddressed)
            }
            Ok(frame) => match frame.kind {
                MessageKind::New1 => self.on_new1(frame.src, &frame.body, now, &mut actions),
                MessageKind::New2 => self.on_new2(frame.src, &frame.body, now, &mut actions),
            },
        };
        self.record(disposition);
        self.flush(&mut actions);
        actions
    }

    /// Periodic work: New1 retransmissions, one-way repair, and cleanup of
    /// stale registrations and orphaned New2s.
    pub fn on_timer(&mut self, now: u64) -> Vec<EngineAction> {
        let mut actions = Vec::new();

        let mut due = Vec::new();
        if let Some(stage) = &mut self.stage {
            while stage.pending_retransmissions.front().is_some_and(|&t| t <= now) {
                stage.pending_retransmissions.pop_front();
                due.push(stage.new1_frame.clone());
            }
        }
        for frame in due {
            self.enqueue(NodeId::BROADCAST, frame);
        }

        let timeout = self.config.cleanup_timeout;
        let expired: Vec<NodeId> = self
            .neighbors
            .values()
            .filter(|e| e.state == NeighborState::Registered && now >= e.registered_at + timeout)
            .map(|e| e.partner)
            .collect();
        for partner in expired {
            self.neighbors.remove(&partner);
            self.metrics.entries_purged += 1;
            actions.push(EngineAction::EntryPurged {
                partner,
                reason: PurgeReason::RegistrationTimeout,
            });
        }

        let round = self.round();
        let bound = self.config.retransmissions;
        let repair = self.config.repair_interval;
        let capacity = self.config.queue_capacity;
        let mut resend = Vec::new();
        for entry in self.neighbors.values_mut() {
            if self.outbox.len() + resend.len() >= capacity {
                break;
            }
            if entry.state == NeighborState::Registered
                && Some(entry.partner_round) == round
                && entry.new2_resends < bound
                && now >= entry.last_new2_at + repair
            {
                entry.new2_resends += 1;
                entry.last_new2_at = now;
                resend.push((entry.partner, entry.new2_frame.clone()));
            }
        }
        for (dst, frame) in resend {
            self.enqueue(dst, frame);
        }

        let orphan_timeout = self.config.orphan_timeout;
        let before = self.orphans.len();
        self.orphans.retain(|o| now < o.arrived_at + orphan_timeout);
        self.metrics.orphans_expired += (before - self.orphans.len()) as u64;

        self.flush(&mut actions);
        actions
    }

    fn on_new1(&mut self, src: NodeId, body: &[u8], now: u64, actions: &mut Vec<EngineAction>) -> Disposition {
        let packet = match New1Packet::decode(body, &self.layout) {
            Ok(p) => p,
            Err(_) => return Disposition::Dropped(DropCause::Malformed),
        };
        let Some(stage) = &self.stage else {
            return Disposition::Dropped(DropCause::Stale);
        };
        if packet.round != stage.round {
            return Disposition::Dropped(DropCause::Stale);
        }
        if packet.cert.id != src {
            return Disposition::Dropped(DropCause::CertFail);
        }
        let cert_bytes = packet.cert.to_bytes(self.curve);

        if let Some(entry) = self.neighbors.get_mut(&src) {
            if entry.partner_round == packet.round && entry.cert_bytes == cert_bytes {
                match entry.state {
                    NeighborState::Established => return Disposition::Ignored,
                    NeighborState::Registered => {
                        entry.registered_at = now;
                        if entry.partner_nonce != packet.nonce {
                            entry.partner_nonce = packet.nonce;
                            let cipher = entry.new2_cipher.clone();
                            let frame = match self.build_new2(src, cipher, packet.nonce, packet.round) {
                                Ok(f) => f,
                                Err(_) => return Disposition::Dropped(DropCause::Malformed),
                            };
                            self.neighbors.get_mut(&src).expect("present").new2_frame = frame;
                        }
                        let frame = self.neighbors[&src].new2_frame.clone();
                        self.neighbors.get_mut(&src).expect("present").last_new2_at = now;
                        self.enqueue(src, frame);
                        return Disposition::Processed;
                    }
                }
            }
        } else if self.neighbors.len() >= self.config.max_neighbors {
            return Disposition::Dropped(DropCause::TableFull);
        }

        if !cert::verify_cert(self.curve, &packet.cert, &self.bundle.kgc_public, &mut self.ops) {
            debug!("node {}: certificate from {src} rejected", self.id());
            return Disposition::Dropped(DropCause::CertFail);
        }
        let public = packet.cert.public_key(self.curve).expect("verified key decodes");
        let own_secret = self.secret_for(src, packet.round);

        let eph_seed = self.prf_u64(b"ephemeral", src, packet.round);
        let opts = EncryptOptions {
            compressed: self.config.compressed,
            max_plaintext: SECRET_LEN,
        };
        let cipher = match crypto::encrypt(self.curve, &public, &own_secret.0, opts, eph_seed, &mut self.ops) {
            Ok(ct) => ct.to_bytes(self.curve),
            Err(_) => return Disposition::Dropped(DropCause::CertFail),
        };
        let new2_frame = match self.build_new2(src, cipher.clone(), packet.nonce, packet.round) {
            Ok(f) => f,
            Err(_) => return Disposition::Dropped(DropCause::Malformed),
        };
        self.neighbors.insert(
            src,
            NeighborEntry {
                partner: src,
                public,
                cert_bytes,
                partner_nonce: packet.nonce,
                partner_round: packet.round,
                own_secret,
                partner_secret: None,
                state: NeighborState::Registered,
                registered_at: now,
                last_new2_at: now,
                new2_resends: 0,
                new2_cipher: cipher,
                new2_frame: new2_frame.clone(),
                accepted_new2: None,
            },
        );
        self.enqueue(src, new2_frame);

        // New2s that arrived before this New1
        let (ready, waiting): (VecDeque<Orphan>, VecDeque<Orphan>) = std::mem::take(&mut self.orphans)
            .into_iter()
            .partition(|o| o.src == src);
        self.orphans = waiting;
        for orphan in ready {
            self.metrics.released += 1;
            let d = self.on_new2(src, &orphan.body, now, actions);
            self.record(d);
        }
        Disposition::Processed
    }

    fn on_new2(&mut self, src: NodeId, body: &[u8], now: u64, actions: &mut Vec<EngineAction>) -> Disposition {
        let packet = match New2Packet::decode(body, &self.layout) {
            Ok(p) => p,
            Err(_) => return Disposition::Dropped(DropCause::Malformed),
        };
        let Some(round) = self.round() else {
            return Disposition::Dropped(DropCause::Stale);
        };
        let state = match self.neighbors.get(&src) {
            Some(e) if e.partner_round == round => e.state,
            _ => {
                self.buffer_orphan(src, body, now);
                return Disposition::Buffered;
            }
        };

        if state == NeighborState::Established {
            let entry = &self.neighbors[&src];
            let duplicate = entry.accepted_new2.as_deref() == Some(body);
            if !duplicate {
                if let Err(cause) = self.check_new2_signature(src, &packet) {
                    return Disposition::Dropped(cause);
                }
            }
            // the partner is still waiting for our New2
            let bound = self.config.retransmissions;
            let entry = self.neighbors.get_mut(&src).expect("present");
            if entry.new2_resends < bound {
                entry.new2_resends += 1;
                entry.last_new2_at = now;
                let frame = entry.new2_frame.clone();
                self.enqueue(src, frame);
                return Disposition::Processed;
            }
            return Disposition::Ignored;
        }

        if let Err(cause) = self.check_new2_signature(src, &packet) {
            return Disposition::Dropped(cause);
        }
        let ct = match Ciphertext::from_bytes(self.curve, &packet.cipher, self.config.compressed) {
            Ok(ct) => ct,
            Err(_) => return Disposition::Dropped(DropCause::Malformed),
        };
        let plaintext = match crypto::decrypt(self.curve, &self.bundle.keypair.private, &ct, &mut self.ops) {
            Ok(pt) => pt,
            Err(CryptoError::AuthenticationFailure) => return Disposition::Dropped(DropCause::MacFail),
            Err(_) => return Disposition::Dropped(DropCause::Malformed),
        };
        let Ok(partner_secret) = <[u8; SECRET_LEN]>::try_from(plaintext.as_slice()) else {
            return Disposition::Dropped(DropCause::Malformed);
        };
        let entry = self.neighbors.get_mut(&src).expect("present");
        entry.partner_secret = Some(SecretValue(partner_secret));
        entry.state = NeighborState::Established;
        entry.accepted_new2 = Some(body.to_vec());
        let key = entry.pairwise_key().expect("established");
        self.metrics.keys_established += 1;
        actions.push(EngineAction::KeyEstablished { partner: src, key });
        Disposition::Processed
    }

    /// Verifies a New2 signature against our current nonce. A signature
    /// that only verifies against the previous stage's nonce is reported as
    /// stale.
    fn check_new2_signature(&mut self, src: NodeId, packet: &New2Packet) -> Result<(), DropCause> {
        let nonce = self.current_nonce().ok_or(DropCause::Stale)?;
        let public = self.neighbors[&src].public.clone();
        let msg = New2Packet::signed_bytes(&packet.cipher, &nonce);
        match crypto::verify(self.curve, &public, &msg, &packet.sig, &mut self.ops) {
            Ok(true) => return Ok(()),
            Ok(false) => {}
            Err(_) => return Err(DropCause::SigFail),
        }
        if let Some(prev) = self.prev_nonce {
            let old = New2Packet::signed_bytes(&packet.cipher, &prev);
            if crypto::verify(self.curve, &public, &old, &packet.sig, &mut self.ops) == Ok(true) {
                return Err(DropCause::Stale);
            }
        }
        Err(DropCause::SigFail)
    }

    fn build_new2(
        &mut self,
        dst: NodeId,
        cipher: Vec<u8>,
        partner_nonce: Nonce,
        round: u32,
    ) -> Result<Vec<u8>, crate::wire::WireError> {
        let sign_seed = self.prf_u64(b"sign", dst, round);
        let sig = crypto::sign(
            self.curve,
            &self.bundle.keypair.private,
            &New2Packet::signed_bytes(&cipher, &partner_nonce),
            sign_seed,
            &mut self.ops,
        )?;
        let body = New2Packet { cipher, sig }.encode(&self.layout)?;
        LinkFrame {
            src: self.id(),
            dst,
            kind: MessageKind::New2,
            body,
        }
        .encode()
    }

    fn buffer_orphan(&mut self, src: NodeId, body: &[u8], now: u64) {
        if self.orphans.len() >= self.config.queue_capacity {
            self.orphans.pop_front();
            self.metrics.orphans_evicted += 1;
        }
        self.orphans.push_back(Orphan {
            src,
            body: body.to_vec(),
            arrived_at: now,
        });
    }

    fn record(&mut self, d: Disposition) {
        match d {
            Disposition::Processed => self.metrics.processed += 1,
            Disposition::Ignored => self.metrics.ignored += 1,
            Disposition::Buffered => self.metrics.buffered += 1,
            Disposition::Dropped(cause) => {
                debug!("node {}: dropped packet ({cause:?})", self.id());
                self.metrics.drops.bump(cause);
            }
        }
    }

    fn enqueue(&mut self, dst: NodeId, frame: Vec<u8>) {
        if self.outbox.len() >= self.config.queue_capacity {
            self.metrics.drops.bump(DropCause::SendQueueFull);
            return;
        }
        self.outbox.push_back((dst, frame));
    }

    fn flush(&mut self, actions: &mut Vec<EngineAction>) {
        while let Some((dst, frame)) = self.outbox.pop_front() {
            self.metrics.frames_sent += 1;
            self.metrics.bytes_sent += frame.len() as u64;
            actions.push(EngineAction::Send { dst, frame });
        }
    }

    /// Secret value for `partner` in `round`; the same on every call.
    fn secret_for(&self, partner: NodeId, round: u32) -> SecretValue {
        let mut data = partner.to_bytes().to_vec();
        data.extend(round.to_be_bytes());
        let out = self.prf(b"secret", &data);
        SecretValue(out[..SECRET_LEN].try_into().expect("secret length"))
    }

    fn prf(&self, label: &[u8], data: &[u8]) -> [u8; 20] {
        let mut mac = Hmac::<Sha1>::new_from_slice(&self.prf_key).expect("any key length");
        mac.update(label);
        mac.update(data);
        mac.finalize().into_bytes().into()
    }

    fn prf_u64(&self, label: &[u8], partner: NodeId, round: u32) -> u64 {
        let mut data = partner.to_bytes().to_vec();
        data.extend(round.to_be_bytes());
        let out = self.prf(label, &data);
        u64::from_be_bytes(out[..8].try_into().expect("8 bytes"))
    }
}
