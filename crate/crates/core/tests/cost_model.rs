use tinyake::cost::{
    analyze, comm_bytes, constants, node_energy, pair_energy, ram_estimate, sm_cost_per_node, sm_cost_per_pair,
    CostConstants, OpMix, RAM_BUDGET,
};
use tinyake::crypto::CurveId;
use tinyake::engine::{EngineConfig, SECRET_LEN};
use tinyake::kgc::generate_network;
use tinyake::sim::{run_trial, LossModel, Topology, TopologyKind, TrialSpec};
use tinyake::wire::WireLayout;

fn layout() -> WireLayout {
    WireLayout::new(CurveId::Secp160r1.params(), false, SECRET_LEN)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn reference_row_matches_published_values() {
    let row = constants().reference("TinyAKE").unwrap();
    assert_eq!(row.computation_sm, 16.49);
    assert_eq!(row.communication_bytes, 452.0);
    assert_eq!(row.extra_ram, "60d");
    assert_eq!(row.computation_mj, 183.85);
    assert_eq!(row.communication_mj, 39.69);
    assert_eq!(constants().protocols.len(), 8);
}

#[test]
fn unit_rates_match_published_values() {
    let c = constants();
    assert_eq!(c.energy.sm.microjoules, 11_150.0);
    assert_eq!(c.energy.send.microjoules, 1184.0);
    assert_eq!(c.energy.receive.microjoules, 572.0);
    assert_eq!((c.weights.hash, c.weights.enc, c.weights.dec), (0.0185, 0.0051, 0.0078));
}

#[test]
fn weighted_cost_by_hand() {
    let w = &constants().weights;
    let m = OpMix::per_node();
    let by_hand = 8.0
        + 2.0 * w.pa
        + 3.0 * w.rev
        + 10.0 * w.modular
        + 6.0 * w.mul
        + 3.0 * w.hash
        + 2.0 * w.mac
        + 2.0 * w.kdf
        + w.enc
        + w.dec;
    assert_eq!((m.sm, m.pa, m.rev, m.modular, m.mul), (8, 2, 3, 10, 6));
    assert_eq!((m.hash, m.mac, m.kdf, m.enc, m.dec), (3, 2, 2, 1, 1));
    assert!(close(sm_cost_per_node(w).0, by_hand, 1e-12));
    assert!(close(sm_cost_per_node(w).0, 8.25, 0.05));
    assert!(close(sm_cost_per_pair(w).0, 16.49, 0.1));
    assert_eq!(sm_cost_per_pair(&w.sm_only()).0, 16.0);
}

#[test]
fn energy_by_hand() {
    let e = pair_energy(constants(), &layout()).unwrap();
    let comm = 452.0 * 8.0 / 160.0 * (1184.0 + 572.0) / 1000.0;
    assert!(close(e.communication.0, comm, 1e-9));
    assert!(close(e.communication.0, 39.69, 0.1));
    let comp = sm_cost_per_pair(&constants().weights).0 * 11.15;
    assert!(close(e.computation.0, comp, 1e-9));
    assert!(close(e.computation.0, 183.85, 0.2));

    // one neighbor costs the same as half a pair on each side
    let n = node_energy(constants(), &layout(), 1).unwrap();
    assert!(close(2.0 * n.computation.0, e.computation.0, 1e-9));
    assert!(close(2.0 * n.communication.0, e.communication.0, 1e-9));
}

#[test]
fn comm_bytes_scale_with_neighbors() {
    let l = layout();
    assert_eq!(comm_bytes(&l, 1).pair_total, 452);
    let c = comm_bytes(&l, 4);
    assert_eq!(c.send_per_node, 103 + 4 * 123);
    assert_eq!(c.receive_per_node, 4 * (103 + 123));
    let small = WireLayout::new(CurveId::Secp160r1.params(), true, SECRET_LEN);
    assert_eq!(comm_bytes(&small, 1).pair_total, 2 * (13 + 71 + 13 + 91));
}

#[test]
fn model_matches_a_measured_pair() {
    let net = generate_network(2, CurveId::Secp160r1, 5, false).unwrap();
    let t = Topology::from_positions(TopologyKind::Custom, 50.0, 50.0, vec![(0.0, 0.0), (20.0, 0.0)]);
    let r = run_trial(&TrialSpec {
        topology: &t,
        bundles: &net.bundles,
        loss: LossModel::lossless(),
        config: EngineConfig::with_interval(10, 0),
        rules: Vec::new(),
        seed: 1,
    })
    .unwrap();
    assert_eq!(r.ratio, 1.0);
    assert_eq!(r.traffic.bytes_on_air, comm_bytes(&layout(), 1).pair_total);
    assert_eq!(r.sm_total, 16);
    assert_eq!(r.ops.sm, 16);
}

#[test]
fn ram_model() {
    assert_eq!(ram_estimate(1, 1).unwrap(), 4028);
    assert_eq!(ram_estimate(2, 1).unwrap() - ram_estimate(1, 1).unwrap(), 64);
    assert_eq!(ram_estimate(1, 2).unwrap() - ram_estimate(1, 1).unwrap(), 284);
    assert_eq!(ram_estimate(16, 12).unwrap(), 8112);
    assert!(ram_estimate(16, 12).unwrap() <= RAM_BUDGET);
    assert!(ram_estimate(0, 1).is_err());
    let report = analyze(&layout(), 16, 12).unwrap();
    assert_eq!(report.ram_over_budget_by, -80);
    assert_eq!(report.extra_ram_discrepancy_per_neighbor, 4);
}

#[test]
fn constants_parse_from_text() {
    let text = include_str!("../data/cost_constants.json");
    let c = CostConstants::from_json(text).unwrap();
    assert_eq!(&c, constants());
    assert!(CostConstants::from_json("{}").is_err());
}
