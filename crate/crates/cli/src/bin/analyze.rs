use anyhow::Result;
use clap::Parser;
use tinyake::cost::analyze;
use tinyake::crypto::CurveId;
use tinyake::engine::SECRET_LEN;
use tinyake::wire::WireLayout;

/// Print the computation, communication, energy and RAM accounting.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[arg(long, default_value_t = 1)]
    neighbors: u64,
    #[arg(long, default_value_t = 1)]
    queue: u64,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Size messages with compressed points.
    #[arg(long)]
    compressed: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let layout = WireLayout::new(CurveId::Secp160r1.params(), cli.compressed, SECRET_LEN);
    let report = analyze(&layout, cli.neighbors, cli.queue)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else if cli.csv {
        print!("{}", report.to_csv());
    } else {
        print!("{report}");
    }
    Ok(())
}
