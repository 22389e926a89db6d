//! Analytical cost model: SM-normalized computation, bytes on air, energy
//! and RAM sizing.
//!
//! Primitive weights are expressed in SM equivalents. Energy figures carry
//! their basis (per operation, per 80 bits, per 160 bits) and can only be
//! converted through the matching accessor.

use std::fmt;
use std::ops::{Add, Mul};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{WireLayout, ATTACHMENT};

const CONSTANTS_JSON: &str = include_str!("../data/cost_constants.json");

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("{what} is quoted {actual}, not {wanted}")]
    UnitMismatch {
        what: &'static str,
        actual: Basis,
        wanted: Basis,
    },
    #[error("{0} must be at least 1")]
    NonPositive(&'static str),
}

/// Scalar-multiplication equivalents.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SmEquiv(pub f64);

#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Millijoules(pub f64);

impl Add for SmEquiv {
    type Output = SmEquiv;
    fn add(self, rhs: SmEquiv) -> SmEquiv {
        SmEquiv(self.0 + rhs.0)
    }
}

impl Mul<f64> for SmEquiv {
    type Output = SmEquiv;
    fn mul(self, rhs: f64) -> SmEquiv {
        SmEquiv(self.0 * rhs)
    }
}

impl Add for Millijoules {
    type Output = Millijoules;
    fn add(self, rhs: Millijoules) -> Millijoules {
        Millijoules(self.0 + rhs.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    PerOperation,
    Per80Bits,
    Per160Bits,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::PerOperation => "per operation",
            Basis::Per80Bits => "per 80 bits",
            Basis::Per160Bits => "per 160 bits",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRate {
    pub microjoules: f64,
    pub basis: Basis,
}

impl EnergyRate {
    pub fn for_ops(&self, what: &'static str, ops: f64) -> Result<Millijoules, CostError> {
        match self.basis {
            Basis::PerOperation => Ok(Millijoules(self.microjoules * ops / 1000.0)),
            actual => Err(CostError::UnitMismatch {
                what,
                actual,
                wanted: Basis::PerOperation,
            }),
        }
    }

    pub fn for_bits(&self, what: &'static str, bits: f64) -> Result<Millijoules, CostError> {
        let block = match self.basis {
            Basis::Per80Bits => 80.0,
            Basis::Per160Bits => 160.0,
            Basis::PerOperation => {
                return Err(CostError::UnitMismatch {
                    what,
                    actual: Basis::PerOperation,
                    wanted: Basis::Per160Bits,
                })
            }
        };
        Ok(Millijoules(self.microjoules * bits / block / 1000.0))
    }
}

/// SM-equivalent weight of each primitive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpWeights {
    pub sm: f64,
    pub pa: f64,
    pub rev: f64,
    pub modular: f64,
    pub mul: f64,
    pub hash: f64,
    pub mac: f64,
    pub kdf: f64,
    pub enc: f64,
    pub dec: f64,
    /// Per 160 bits.
    pub send: f64,
    /// Per 160 bits.
    pub receive: f64,
    pub me_public: f64,
    pub me_private: f64,
}

impl OpWeights {
    /// Every weight except SM set to zero.
    pub fn sm_only(&self) -> OpWeights {
        OpWeights {
            sm: self.sm,
            pa: 0.0,
            rev: 0.0,
            modular: 0.0,
            mul: 0.0,
            hash: 0.0,
            mac: 0.0,
            kdf: 0.0,
            enc: 0.0,
            dec: 0.0,
            send: 0.0,
            receive: 0.0,
            me_public: 0.0,
            me_private: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub sm: EnergyRate,
    pub me_public: EnergyRate,
    pub me_private: EnergyRate,
    pub enc: EnergyRate,
    pub dec: EnergyRate,
    pub hash: EnergyRate,
    pub send: EnergyRate,
    pub receive: EnergyRate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamModel {
    pub base: u64,
    pub per_neighbor: u64,
    pub per_queue_unit: u64,
    /// Per-neighbor figure used in the protocol comparison table.
    pub table_extra_per_neighbor: u64,
}

impl RamModel {
    pub fn estimate(&self, neighbors: u64, queue: u64) -> Result<u64, CostError> {
        if neighbors == 0 {
            return Err(CostError::NonPositive("neighbors"));
        }
        if queue == 0 {
            return Err(CostError::NonPositive("queue length"));
        }
        Ok(self.base + self.per_neighbor * (neighbors - 1) + self.per_queue_unit * (queue - 1))
    }
}

/// One column of the protocol comparison table, kept as published.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRow {
    pub name: String,
    pub computation_sm: f64,
    pub communication_bytes: f64,
    pub extra_ram: String,
    pub computation_mj: f64,
    pub communication_mj: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostConstants {
    pub weights: OpWeights,
    pub energy: EnergyTable,
    pub ram: RamModel,
    pub protocols: Vec<ProtocolRow>,
}

impl CostConstants {
    pub fn from_json(text: &str) -> Result<CostConstants, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn reference(&self, name: &str) -> Option<&ProtocolRow> {
        self.protocols.iter().find(|p| p.name == name)
    }
}

/// The checked-in constants table.
pub fn constants() -> &'static CostConstants {
    static CONSTANTS: OnceLock<CostConstants> = OnceLock::new();
    CONSTANTS.get_or_init(|| CostConstants::from_json(CONSTANTS_JSON).expect("bundled constants parse"))
}

/// Primitive operation counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpMix {
    pub sm: u32,
    pub pa: u32,
    pub rev: u32,
    pub modular: u32,
    pub mul: u32,
    pub hash: u32,
    pub mac: u32,
    pub kdf: u32,
    pub enc: u32,
    pub dec: u32,
}

impl OpMix {
    pub const ECDSA_VERIFY: OpMix = OpMix {
        sm: 2,
        pa: 1,
        rev: 1,
        modular: 4,
        mul: 2,
        hash: 1,
        mac: 0,
        kdf: 0,
        enc: 0,
        dec: 0,
    };

    /// One encryption plus one decryption.
    pub const ECIES_ROUND_TRIP: OpMix = OpMix {
        sm: 3,
        pa: 0,
        rev: 0,
        modular: 0,
        mul: 0,
        hash: 0,
        mac: 2,
        kdf: 2,
        enc: 1,
        dec: 1,
    };

    /// One signature plus one verification.
    pub const ECDSA_ROUND_TRIP: OpMix = OpMix {
        sm: 3,
        pa: 1,
        rev: 2,
        modular: 6,
        mul: 4,
        hash: 2,
        mac: 0,
        kdf: 0,
        enc: 0,
        dec: 0,
    };

    /// Work one node does for one partner: check the certificate, encrypt
    /// and sign its New2, verify and decrypt the partner's New2.
    pub fn per_node() -> OpMix {
        OpMix::ECDSA_VERIFY + OpMix::ECIES_ROUND_TRIP + OpMix::ECDSA_ROUND_TRIP
    }

    pub fn weighted(&self, w: &OpWeights) -> SmEquiv {
        SmEquiv(
            f64::from(self.sm) * w.sm
                + f64::from(self.pa) * w.pa
                + f64::from(self.rev) * w.rev
                + f64::from(self.modular) * w.modular
                + f64::from(self.mul) * w.mul
                + f64::from(self.hash) * w.hash
                + f64::from(self.mac) * w.mac
                + f64::from(self.kdf) * w.kdf
                + f64::from(self.enc) * w.enc
                + f64::from(self.dec) * w.dec,
        )
    }
}

impl Add for OpMix {
    type Output = OpMix;
    fn add(self, r: OpMix) -> OpMix {
        OpMix {
            sm: self.sm + r.sm,
            pa: self.pa + r.pa,
            rev: self.rev + r.rev,
            modular: self.modular + r.modular,
            mul: self.mul + r.mul,
            hash: self.hash + r.hash,
            mac: self.mac + r.mac,
            kdf: self.kdf + r.kdf,
            enc: self.enc + r.enc,
            dec: self.dec + r.dec,
        }
    }
}

pub fn sm_cost_per_node(w: &OpWeights) -> SmEquiv {
    OpMix::per_node().weighted(w)
}

pub fn sm_cost_per_pair(w: &OpWeights) -> SmEquiv {
    sm_cost_per_node(w) * 2.0
}

/// Bytes on air for nodes with `d` neighbors each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommBytes {
    pub send_per_node: u64,
    pub receive_per_node: u64,
    /// Both directions of one isolated pair.
    pub pair_total: u64,
}

/// One broadcast New1 plus one New2 per neighbor sent; one of each per
/// neighbor received.
pub fn comm_bytes(layout: &WireLayout, d: u64) -> CommBytes {
    let new1 = (layout.new1_len() + ATTACHMENT) as u64;
    let new2 = (layout.new2_len() + ATTACHMENT) as u64;
    CommBytes {
        send_per_node: new1 + new2 * d,
        receive_per_node: (new1 + new2) * d,
        pair_total: 2 * (new1 + new2),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub computation: Millijoules,
    pub communication: Millijoules,
}

/// Energy of one pair: computation at the SM rate, and every pair byte both
/// sent and received once.
pub fn pair_energy(c: &CostConstants, layout: &WireLayout) -> Result<Energy, CostError> {
    let computation = c.energy.sm.for_ops("SM", sm_cost_per_pair(&c.weights).0)?;
    let bits = comm_bytes(layout, 1).pair_total as f64 * 8.0;
    let communication = c.energy.send.for_bits("send", bits)? + c.energy.receive.for_bits("receive", bits)?;
    Ok(Energy {
        computation,
        communication,
    })
}

/// Per-node energy in a network where every node has `d` neighbors.
pub fn node_energy(c: &CostConstants, layout: &WireLayout, d: u64) -> Result<Energy, CostError> {
    let computation = c.energy.sm.for_ops("SM", sm_cost_per_node(&c.weights).0 * d as f64)?;
    let b = comm_bytes(layout, d);
    let communication = c.energy.send.for_bits("send", b.send_per_node as f64 * 8.0)?
        + c.energy.receive.for_bits("receive", b.receive_per_node as f64 * 8.0)?;
    Ok(Energy {
        computation,
        communication,
    })
}

pub fn ram_estimate(neighbors: u64, queue: u64) -> Result<u64, CostError> {
    constants().ram.estimate(neighbors, queue)
}

/// Everything `analyze` prints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostReport {
    pub neighbors: u64,
    pub queue: u64,
    pub op_mix_per_node: OpMix,
    pub sm_per_node: f64,
    pub sm_per_pair: f64,
    pub pure_sm_per_node: f64,
    pub pure_sm_per_pair: f64,
    pub comm: CommBytes,
    pub pair_energy: Energy,
    pub node_energy: Energy,
    pub ram_bytes: u64,
    pub ram_budget_bytes: u64,
    pub ram_over_budget_by: i64,
    /// Extra RAM per neighbor as used in the comparison table.
    pub table_extra_ram: u64,
    /// Extra RAM per neighbor in the sizing model.
    pub measured_extra_ram: u64,
    pub extra_ram_discrepancy_per_neighbor: i64,
    pub reference: Vec<ProtocolRow>,
}

pub const RAM_BUDGET: u64 = 8 * 1024;

pub fn analyze(layout: &WireLayout, neighbors: u64, queue: u64) -> Result<CostReport, CostError> {
    let c = constants();
    let w = &c.weights;
    let ram_bytes = c.ram.estimate(neighbors, queue)?;
    Ok(CostReport {
        neighbors,
        queue,
        op_mix_per_node: OpMix::per_node(),
        sm_per_node: sm_cost_per_node(w).0,
        sm_per_pair: sm_cost_per_pair(w).0,
        pure_sm_per_node: sm_cost_per_node(&w.sm_only()).0,
        pure_sm_per_pair: sm_cost_per_pair(&w.sm_only()).0,
        comm: comm_bytes(layout, neighbors),
        pair_energy: pair_energy(c, layout)?,
        node_energy: node_energy(c, layout, neighbors)?,
        ram_bytes,
        ram_budget_bytes: RAM_BUDGET,
        ram_over_budget_by: ram_bytes as i64 - RAM_BUDGET as i64,
        table_extra_ram: c.ram.table_extra_per_neighbor,
        measured_extra_ram: c.ram.per_neighbor,
        extra_ram_discrepancy_per_neighbor: c.ram.per_neighbor as i64 - c.ram.table_extra_per_neighbor as i64,
        reference: c.protocols.clone(),
    })
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.op_mix_per_node;
        writeln!(f, "computation")?;
        writeln!(
            f,
            "  per node op mix: {} SM, {} PA, {} Rev, {} Mod, {} M, {} Hash, {} MAC, {} KDF, {} Enc, {} Dec",
            m.sm, m.pa, m.rev, m.modular, m.mul, m.hash, m.mac, m.kdf, m.enc, m.dec
        )?;
        writeln!(
            f,
            "  per node: {:.4} SM (pure SM {:.0})",
            self.sm_per_node, self.pure_sm_per_node
        )?;
        writeln!(
            f,
            "  per pair: {:.4} SM (pure SM {:.0})",
            self.sm_per_pair, self.pure_sm_per_pair
        )?;
        writeln!(f, "communication (d = {})", self.neighbors)?;
        writeln!(f, "  send per node:    {} B", self.comm.send_per_node)?;
        writeln!(f, "  receive per node: {} B", self.comm.receive_per_node)?;
        writeln!(f, "  pair total:       {} B", self.comm.pair_total)?;
        writeln!(f, "energy")?;
        writeln!(
            f,
            "  pair: computation {:.2} mJ, communication {:.2} mJ",
            self.pair_energy.computation.0, self.pair_energy.communication.0
        )?;
        writeln!(
            f,
            "  node with d = {}: computation {:.2} mJ, communication {:.2} mJ",
            self.neighbors, self.node_energy.computation.0, self.node_energy.communication.0
        )?;
        writeln!(f, "ram (neighbors = {}, queue = {})", self.neighbors, self.queue)?;
        writeln!(f, "  estimate: {} B", self.ram_bytes)?;
        let margin = if self.ram_over_budget_by > 0 {
            format!("{} B over", self.ram_over_budget_by)
        } else {
            format!("{} B spare", -self.ram_over_budget_by)
        };
        writeln!(f, "  8 KB budget: {margin} before platform overhead")?;
        writeln!(
            f,
            "  extra per neighbor: comparison table {}d, sizing model {} B/neighbor (discrepancy {} B)",
            self.table_extra_ram, self.measured_extra_ram, self.extra_ram_discrepancy_per_neighbor
        )?;
        writeln!(f, "reference (two parties)")?;
        writeln!(
            f,
            "  {:<10} {:>8} {:>6} {:>9} {:>9} {:>8}",
            "protocol", "SM", "B", "RAM", "comp mJ", "comm mJ"
        )?;
        for r in &self.reference {
            writeln!(
                f,
                "  {:<10} {:>8.2} {:>6} {:>9} {:>9.2} {:>8.2}",
                r.name, r.computation_sm, r.communication_bytes, r.extra_ram, r.computation_mj, r.communication_mj
            )?;
        }
        Ok(())
    }
}

impl CostReport {
    /// `metric,value` lines.
    pub fn to_csv(&self) -> String {
        let rows: Vec<(String, String)> = vec![
            ("neighbors".into(), self.neighbors.to_string()),
            ("queue".into(), self.queue.to_string()),
            ("sm_per_node".into(), format!("{:.4}", self.sm_per_node)),
            ("sm_per_pair".into(), format!("{:.4}", self.sm_per_pair)),
            ("pure_sm_per_node".into(), format!("{}", self.pure_sm_per_node)),
            ("pure_sm_per_pair".into(), format!("{}", self.pure_sm_per_pair)),
            ("send_bytes_per_node".into(), self.comm.send_per_node.to_string()),
            ("receive_bytes_per_node".into(), self.comm.receive_per_node.to_string()),
            ("pair_bytes".into(), self.comm.pair_total.to_string()),
            (
                "pair_computation_mj".into(),
                format!("{:.4}", self.pair_energy.computation.0),
            ),
            (
                "pair_communication_mj".into(),
                format!("{:.4}", self.pair_energy.communication.0),
            ),
            (
                "node_computation_mj".into(),
                format!("{:.4}", self.node_energy.computation.0),
            ),
            (
                "node_communication_mj".into(),
                format!("{:.4}", self.node_energy.communication.0),
            ),
            ("ram_bytes".into(), self.ram_bytes.to_string()),
            ("ram_over_budget_by".into(), self.ram_over_budget_by.to_string()),
            ("table_extra_ram_per_neighbor".into(), self.table_extra_ram.to_string()),
            (
                "measured_extra_ram_per_neighbor".into(),
                self.measured_extra_ram.to_string(),
            ),
            (
                "extra_ram_discrepancy_per_neighbor".into(),
                self.extra_ram_discrepancy_per_neighbor.to_string(),
            ),
        ];
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::CurveId;
    use crate::engine::SECRET_LEN;

    fn layout() -> WireLayout {
        WireLayout::new(CurveId::Secp160r1.params(), false, SECRET_LEN)
    }

    #[test]
    fn per_node_mix_matches_component_sum() {
        let m = OpMix::per_node();
        assert_eq!((m.sm, m.pa, m.rev, m.modular, m.mul), (8, 2, 3, 10, 6));
        assert_eq!((m.hash, m.mac, m.kdf, m.enc, m.dec), (3, 2, 2, 1, 1));
    }

    #[test]
    fn comm_formulas() {
        let l = layout();
        for d in 0..20u64 {
            let b = comm_bytes(&l, d);
            assert_eq!(b.send_per_node, 103 + 123 * d);
            assert_eq!(b.receive_per_node, 226 * d);
            assert_eq!(b.pair_total, 452);
        }
    }

    #[test]
    fn ram_examples() {
        assert_eq!(ram_estimate(1, 1), Ok(4028));
        assert_eq!(ram_estimate(2, 1), Ok(4092));
        assert_eq!(ram_estimate(1, 2), Ok(4312));
        assert_eq!(ram_estimate(16, 12), Ok(8112));
        assert!(ram_estimate(0, 1).is_err());
        assert!(ram_estimate(1, 0).is_err());
    }

    #[test]
    fn unit_mismatch_is_rejected() {
        let c = constants();
        assert!(c.energy.send.for_ops("send", 1.0).is_err());
        assert!(c.energy.sm.for_bits("SM", 160.0).is_err());
        let one_block = c.energy.enc.for_bits("enc", 80.0).unwrap();
        assert!((one_block.0 - 0.0162).abs() < 1e-12);
    }

    #[test]
    fn pure_sm_subtotal() {
        let w = constants().weights.sm_only();
        assert_eq!(sm_cost_per_node(&w).0, 8.0);
        assert_eq!(sm_cost_per_pair(&w).0, 16.0);
    }

    #[test]
    fn constants_round_trip() {
        let c = constants();
        let text = serde_json::to_string_pretty(c).unwrap();
        assert_eq!(&CostConstants::from_json(&text).unwrap(), c);
        assert_eq!(c.protocols.len(), 8);
        assert_eq!(c.reference("NZMA").unwrap().extra_ram, "23n+20d");
    }

    #[test]
    fn report_flags_ram_margin_and_discrepancy() {
        let r = analyze(&layout(), 16, 12).unwrap();
        assert_eq!(r.ram_bytes, 8112);
        assert_eq!(r.ram_over_budget_by, 8112 - 8192);
        assert_eq!(r.extra_ram_discrepancy_per_neighbor, 4);
        let text = r.to_string();
        assert!(text.contains("60d"));
        assert!(text.contains("64 B/neighbor"));
        assert!(r.to_csv().contains("extra_ram_discrepancy_per_neighbor,4"));
    }
}
