use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tinyake::kgc::{generate_network, write_kgc_secret, write_network};
use tinyake_cli::{init_logging, parse_curve};

/// Offline key generation center.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mint a KGC key and one security bundle per node.
    Generate {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value = "secp160r1")]
        curve: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Compressed points in certificates.
        #[arg(long)]
        compressed: bool,
        /// Also write the KGC private key here. It never goes into a bundle.
        #[arg(long)]
        kgc_secret: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    init_logging();
    match Cli::parse().command {
        Command::Generate {
            nodes,
            curve,
            seed,
            out,
            compressed,
            kgc_secret,
        } => {
            let net = generate_network(nodes, parse_curve(&curve)?, seed, compressed)?;
            let written = write_network(&net, &out).with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = kgc_secret {
                write_kgc_secret(&net, &path)?;
            }
            println!(
                "wrote manifest and {} bundles for {} to {}",
                written.len(),
                curve,
                out.display()
            );
        }
    }
    Ok(())
}
