//! Discrete-event network simulator.
//!
//! Time advances in integer ticks. A frame sent at tick `t` arrives at tick
//! `t + 1`. Every node starts a stage on the same tick. Within a tick, stage
//! starts run first, then arrivals in send
//! order, then every engine's timer, then the adversary's timer.
//!
//! Packet fate is a pure function of the trial seed, the link, the message
//! kind and how many packets of that kind the link has carried so far, so
//! two runs that differ only in the retransmission count see the same fate
//! for every packet they have in common.

pub mod attack;
mod loss;
mod sweep;
mod topology;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::Serialize;
use thiserror::Error;

pub use loss::{LinkRule, LossModel};
pub use sweep::{run_sweep, write_csv, SweepPoint, SweepReport, SweepRow, SweepSpec};
pub use topology::{build_topology, Topology, TopologyKind};

use crate::cert::NodeId;
use crate::crypto::{EcPoint, OpCounter};
use crate::engine::{Engine, EngineAction, EngineConfig, EngineError, Metrics, NeighborState, SecretValue};
use crate::kgc::SecurityBundle;
use crate::wire::LinkFrame;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("topology: {0}")]
    Topology(String),
    #[error("{nodes} positions but {bundles} bundles")]
    BundleCount { nodes: usize, bundles: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Frame an adversary puts on the air, addressed to one victim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Injection {
    pub to: NodeId,
    pub frame: Vec<u8>,
}

/// Active network attacker. It hears every transmission, can suppress any
/// delivery and can inject arbitrary frames, which arrive one tick later
/// without loss.
pub trait Adversary: Send {
    fn observe(&mut self, now: u64, sender: NodeId, frame: &[u8]) -> Vec<Injection>;

    fn blocks(&self, _sender: NodeId, _recipient: NodeId, _frame: &[u8]) -> bool {
        false
    }

    fn on_tick(&mut self, _now: u64) -> Vec<Injection> {
        Vec::new()
    }

    /// Secret values the attacker chose or managed to decrypt.
    fn knowledge(&self) -> Vec<SecretValue>;

    /// Public keys whose private halves the attacker holds.
    fn controlled_keys(&self) -> Vec<EcPoint>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Traffic {
    /// Frames put on the air by nodes (a broadcast counts once).
    pub transmissions: u64,
    pub bytes_on_air: u64,
    pub deliveries: u64,
    pub lost: u64,
    /// Unicasts whose destination is out of range.
    pub unreachable: u64,
    pub blocked: u64,
    pub injected: u64,
}

/// Outcome of one simulated run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub nodes: usize,
    pub in_range_pairs: u64,
    /// In-range pairs where both ends hold matching current-round keys.
    pub established_pairs: u64,
    pub one_way_pairs: u64,
    pub key_mismatches: u64,
    pub ratio: f64,
    pub residual_registered: u64,
    pub residual_orphans: u64,
    pub end_time: u64,
    pub traffic: Traffic,
    pub metrics: Metrics,
    pub ops: OpCounter,
    pub sm_total: u64,
}

/// Parameters of a single-stage run.
#[derive(Clone, Debug)]
pub struct TrialSpec<'a> {
    pub topology: &'a Topology,
    pub bundles: &'a [SecurityBundle],
    pub loss: LossModel,
    pub config: EngineConfig,
    pub rules: Vec<LinkRule>,
    pub seed: u64,
}

#[derive(Debug, PartialEq, Eq)]
struct Pending {
    time: u64,
    seq: u64,
    to: usize,
    bytes: Vec<u8>,
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct Simulation {
    topology: Topology,
    engines: Vec<Engine>,
    index: HashMap<NodeId, usize>,
    loss: LossModel,
    rules: Vec<LinkRule>,
    seed: u64,
    now: u64,
    round: u32,
    queue: BinaryHeap<Pending>,
    seq: u64,
    link_counts: HashMap<(NodeId, NodeId, crate::wire::MessageKind), u32>,
    adversary: Option<Box<dyn Adversary>>,
    traffic: Traffic,
}

impl Simulation {
    /// Node `i` of the topology runs `bundles[i]`.
    pub fn new(
        topology: Topology,
        bundles: &[SecurityBundle],
        config: EngineConfig,
        loss: LossModel,
        seed: u64,
    ) -> Result<Simulation, SimError> {
        if topology.len() != bundles.len() {
            return Err(SimError::BundleCount {
                nodes: topology.len(),
                bundles: bundles.len(),
            });
        }
        let engines = bundles
            .iter()
            .map(|b| {
                let engine_seed = loss::splitmix64(seed ^ u64::from(b.node_id.0).rotate_left(40));
                Engine::new(b.clone(), config, engine_seed)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let index = engines.iter().enumerate().map(|(i, e)| (e.id(), i)).collect();
        Ok(Simulation {
            topology,
            engines,
            index,
            loss,
            rules: Vec::new(),
            seed,
            now: 0,
            round: 0,
            queue: BinaryHeap::new(),
            seq: 0,
            link_counts: HashMap::new(),
            adversary: None,
            traffic: Traffic::default(),
        })
    }

    pub fn with_rules(mut self, rules: Vec<LinkRule>) -> Simulation {
        self.rules = rules;
        self
    }

    pub fn with_adversary(mut self, adversary: Box<dyn Adversary>) -> Simulation {
        self.adversary = Some(adversary);
        self
    }

    pub fn engines(&self) -> &[Engine] {
        &self.engines
    }

    pub fn engine(&self, id: NodeId) -> Option<&Engine> {
        self.index.get(&id).map(|&i| &self.engines[i])
    }

    pub fn adversary(&self) -> Option<&dyn Adversary> {
        self.adversary.as_deref()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Ticks one stage occupies.
    pub fn stage_length(&self) -> u64 {
        self.engines[0].config().quiescence_horizon() + 1
    }

    /// Starts the next round on every node at the current tick and runs
    /// until the stage has settled.
    pub fn run_stage(&mut self) {
        self.round += 1;
        let end = self.now + self.stage_length();
        let mut started = false;
        while self.now < end {
            let now = self.now;
            if !started {
                for i in 0..self.engines.len() {
                    let actions = self.engines[i].start_stage(self.round, now);
                    self.dispatch(i, actions);
                }
                started = true;
            }
            while self.queue.peek().is_some_and(|p| p.time <= now) {
                let p = self.queue.pop().expect("peeked");
                let actions = self.engines[p.to].on_frame(&p.bytes, now);
                self.dispatch(p.to, actions);
            }
            for i in 0..self.engines.len() {
                let actions = self.engines[i].on_timer(now);
                self.dispatch(i, actions);
            }
            if let Some(adv) = self.adversary.as_mut() {
                let injections = adv.on_tick(now);
                self.inject(injections);
            }
            self.now += 1;
        }
    }

    fn schedule(&mut self, to: usize, bytes: Vec<u8>) {
        self.seq += 1;
        self.queue.push(Pending {
            time: self.now + 1,
            seq: self.seq,
            to,
            bytes,
        });
    }

    fn inject(&mut self, injections: Vec<Injection>) {
        for inj in injections {
            if let Some(&to) = self.index.get(&inj.to) {
                self.traffic.injected += 1;
                self.schedule(to, inj.frame);
            }
        }
    }

    fn dispatch(&mut self, from: usize, actions: Vec<EngineAction>) {
        for action in actions {
            if let EngineAction::Send { dst, frame } = action {
                self.transmit(from, dst, frame);
            }
        }
    }

    fn transmit(&mut self, from: usize, dst: NodeId, frame: Vec<u8>) {
        self.traffic.transmissions += 1;
        self.traffic.bytes_on_air += frame.len() as u64;
        let sender = self.engines[from].id();
        if let Some(adv) = self.adversary.as_mut() {
            let injections = adv.observe(self.now, sender, &frame);
            self.inject(injections);
        }
        let kind = match LinkFrame::decode(&frame) {
            Ok(f) => f.kind,
            Err(_) => return,
        };
        let recipients: Vec<usize> = if dst == NodeId::BROADCAST {
            self.topology.neighbors(from).to_vec()
        } else {
            match self.index.get(&dst) {
                Some(&to) if self.topology.in_range(from, to) => vec![to],
                _ => {
                    self.traffic.unreachable += 1;
                    return;
                }
            }
        };
        for to in recipients {
            let recipient = self.engines[to].id();
            let counter = self.link_counts.entry((sender, recipient, kind)).or_insert(0);
            let index = *counter;
            *counter += 1;
            if self
                .adversary
                .as_ref()
                .is_some_and(|a| a.blocks(sender, recipient, &frame))
            {
                self.traffic.blocked += 1;
                continue;
            }
            let scripted = self
                .rules
                .iter()
                .any(|r| r.src == sender && r.dst == recipient && r.kind == kind && index < r.count);
            let p = self
                .loss
                .delivery_probability(self.topology.distance(from, to), self.topology.radius);
            if scripted || loss::link_draw(self.seed, sender, recipient, kind, index) >= p {
                self.traffic.lost += 1;
                continue;
            }
            self.traffic.deliveries += 1;
            self.schedule(to, frame.clone());
        }
    }

    pub fn result(&self) -> TrialResult {
        let mut established = 0;
        let mut one_way = 0;
        let mut mismatches = 0;
        let mut pairs = 0;
        for (i, j) in self.topology.in_range_pairs() {
            pairs += 1;
            let (a, b) = (&self.engines[i], &self.engines[j]);
            let ka = current_key(a, b.id());
            let kb = current_key(b, a.id());
            match (ka, kb) {
                (Some(x), Some(y)) if x == y => established += 1,
                (Some(_), Some(_)) => mismatches += 1,
                (Some(_), None) | (None, Some(_)) => one_way += 1,
                (None, None) => {}
            }
        }
        let mut metrics = Metrics::default();
        let mut ops = OpCounter::default();
        let mut residual_registered = 0;
        let mut residual_orphans = 0;
        for e in &self.engines {
            metrics += *e.metrics();
            ops += *e.ops();
            residual_registered += e.registered_count() as u64;
            residual_orphans += e.orphan_count() as u64;
        }
        TrialResult {
            seed: self.seed,
            nodes: self.engines.len(),
            in_range_pairs: pairs,
            established_pairs: established,
            one_way_pairs: one_way,
            key_mismatches: mismatches,
            ratio: if pairs == 0 {
                0.0
            } else {
                established as f64 / pairs as f64
            },
            residual_registered,
            residual_orphans,
            end_time: self.now,
            traffic: self.traffic,
            metrics,
            ops,
            sm_total: ops.sm,
        }
    }
}

fn current_key(engine: &Engine, partner: NodeId) -> Option<[u8; crate::engine::SECRET_LEN]> {
    let entry = engine.entry(partner)?;
    if entry.state != NeighborState::Established || Some(entry.partner_round) != engine.round() {
        return None;
    }
    entry.pairwise_key().map(|k| k.0)
}

/// Runs one stage over the given network and returns the settled outcome.
pub fn run_trial(spec: &TrialSpec<'_>) -> Result<TrialResult, SimError> {
    let mut sim = Simulation::new(spec.topology.clone(), spec.bundles, spec.config, spec.loss, spec.seed)?
        .with_rules(spec.rules.clone());
    sim.run_stage();
    Ok(sim.result())
}
