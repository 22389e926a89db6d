use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use tinyake::sim::attack::{run_attack, AttackScenario};
use tinyake_cli::{init_logging, parse_curve};

/// Run a scripted attack against two honest nodes and report whether it
/// was defeated.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// replay-new1, replay-new2, forge-cert, tamper-new2, mitm-relay or all.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Consecutive seeds to run, starting at --seed.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long, default_value = "secp160r1")]
    curve: String,
    #[arg(long)]
    json: bool,
}

fn main() -> Result<ExitCode> {
    init_logging();
    let cli = Cli::parse();
    let curve = parse_curve(&cli.curve)?;
    let scenarios: Vec<AttackScenario> = if cli.scenario == "all" {
        AttackScenario::ALL.to_vec()
    } else {
        vec![cli.scenario.parse().map_err(anyhow::Error::msg)?]
    };
    let mut failures = 0;
    for scenario in scenarios {
        for seed in cli.seed..cli.seed + cli.runs {
            let report = run_attack(scenario, curve, seed)?;
            if !report.passed {
                failures += 1;
            }
            if cli.json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                println!("{report}");
            }
        }
    }
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
