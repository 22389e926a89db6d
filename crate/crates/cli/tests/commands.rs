use std::path::Path;
use std::process::{Command, Output};

fn run(bin: &str, args: &[&str]) -> Output {
    Command::new(bin).args(args).output().expect("spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn kgc(dir: &Path, nodes: &str, curve: &str) -> Output {
    run(
        env!("CARGO_BIN_EXE_kgc"),
        &[
            "generate",
            "--nodes",
            nodes,
            "--curve",
            curve,
            "--seed",
            "4",
            "--out",
            dir.to_str().unwrap(),
        ],
    )
}

#[test]
fn kgc_writes_manifest_and_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgc(dir.path(), "6", "secp160r1");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains('6'));
    assert!(dir.path().join("manifest.json").exists());
    let bundles = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(bundles, 7);
    assert!(!kgc(dir.path(), "0", "secp160r1").status.success());
}

#[test]
fn simulate_with_provisioned_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net");
    assert!(kgc(&net, "9", "toy16").status.success());
    let csv = dir.path().join("sweep.csv");
    let out = run(
        env!("CARGO_BIN_EXE_simulate"),
        &[
            "--nodes",
            "9",
            "--field",
            "50",
            "--retx",
            "0..1",
            "--trials",
            "2",
            "--bundles",
            net.to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("k,trial,seed,ratio,"));
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    assert!(stdout(&out).contains("mean_ratio"));

    // wrong node count for the bundle directory
    let bad = run(
        env!("CARGO_BIN_EXE_simulate"),
        &[
            "--nodes",
            "4",
            "--bundles",
            net.to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
        ],
    );
    assert!(!bad.status.success());
}

#[test]
fn attack_reports_pass() {
    let out = run(
        env!("CARGO_BIN_EXE_attack"),
        &["--scenario", "all", "--curve", "toy16", "--runs", "2"],
    );
    assert!(out.status.success(), "{}", stdout(&out));
    let json = run(
        env!("CARGO_BIN_EXE_attack"),
        &["--scenario", "mitm-relay", "--curve", "toy16", "--json"],
    );
    assert!(json.status.success());
    let text = stdout(&json);
    let first = text.lines().next().unwrap();
    let v: serde_json::Value = serde_json::from_str(first).unwrap();
    assert_eq!(v["passed"], true);
    assert!(!run(env!("CARGO_BIN_EXE_attack"), &["--scenario", "nope"])
        .status
        .success());
}

#[test]
fn analyze_prints_costs() {
    let out = run(env!("CARGO_BIN_EXE_analyze"), &["--neighbors", "16", "--queue", "12"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("8112 B"));
    assert!(text.contains("pair total:       452 B"));
    let json = run(env!("CARGO_BIN_EXE_analyze"), &["--json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["ram_bytes"], 4028);
    assert_eq!(v["comm"]["pair_total"], 452);
}
