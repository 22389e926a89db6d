use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Parser;
use tinyake::engine::EngineConfig;
use tinyake::kgc::generate_network;
use tinyake::sim::{build_topology, run_sweep, write_csv, LossModel, SweepSpec, TopologyKind};
use tinyake_cli::{init_logging, load_network, parse_curve, parse_k_range};

/// Retransmission sweep over a simulated network.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[arg(long, default_value = "grid")]
    topology: TopologyKind,
    #[arg(long)]
    nodes: usize,
    /// Side of the square field, in meters.
    #[arg(long, default_value_t = 750.0)]
    field: f64,
    /// Grid spacing, in meters.
    #[arg(long, default_value_t = 25.0)]
    spacing: f64,
    #[arg(long, default_value_t = 50.0)]
    radius: f64,
    /// `near=P,far=P[,good=F]` or `p=P`.
    #[arg(long, default_value = "near=0.95,far=0.5")]
    loss: String,
    /// Retransmission counts to sweep, e.g. `0..5`.
    #[arg(long, default_value = "0..5")]
    retx: String,
    #[arg(long, default_value_t = 10)]
    trials: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Curve for freshly minted bundles. toy16 is fast but insecure.
    #[arg(long, default_value = "toy16")]
    curve: String,
    /// Use bundles written by `kgc generate` instead of minting new ones.
    #[arg(long)]
    bundles: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    interval: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    if cli.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let loss = LossModel::parse(&cli.loss).map_err(anyhow::Error::msg)?;
    let ks: Vec<u32> = parse_k_range(&cli.retx)?.collect();
    let topology = build_topology(cli.topology, cli.nodes, cli.field, cli.spacing, cli.radius, cli.seed)?;
    let (bundles, compressed) = match &cli.bundles {
        Some(dir) => {
            let (manifest, bundles) = load_network(dir)?;
            (bundles, manifest.compressed)
        }
        None => (
            generate_network(cli.nodes, parse_curve(&cli.curve)?, cli.seed, false)?.bundles,
            false,
        ),
    };
    if bundles.len() != cli.nodes {
        bail!("{} bundles for {} nodes", bundles.len(), cli.nodes);
    }
    let config = EngineConfig {
        compressed,
        ..EngineConfig::with_interval(cli.interval, 0)
    };
    let report = run_sweep(&SweepSpec {
        topology: &topology,
        bundles: &bundles,
        loss,
        config,
        ks,
        trials: cli.trials,
        seed: cli.seed,
    })?;
    write_csv(&report.rows, BufWriter::new(File::create(&cli.out)?))?;
    println!("k,trials,mean_ratio,stddev");
    for p in &report.points {
        println!("{},{},{:.6},{:.6}", p.k, p.trials, p.mean, p.stddev);
    }
    Ok(())
}
