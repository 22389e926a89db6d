//! Helpers shared by the command-line tools.

use std::ops::RangeInclusive;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tinyake::crypto::CurveId;
use tinyake::kgc::{bundle_file_name, read_bundle, NetworkManifest, SecurityBundle};

/// `a..b` and `a..=b` are both inclusive; a single number is a one-point range.
pub fn parse_k_range(s: &str) -> Result<RangeInclusive<u32>> {
    let range = if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        lo.trim().parse::<u32>()?..=hi.trim().parse::<u32>()?
    } else {
        let k = s.trim().parse::<u32>()?;
        k..=k
    };
    if range.is_empty() {
        bail!("empty retransmission range {s:?}");
    }
    Ok(range)
}

pub fn parse_curve(s: &str) -> Result<CurveId> {
    CurveId::from_name(s).with_context(|| format!("unknown curve {s:?} (try secp160r1 or toy16)"))
}

/// Loads the bundles listed in `dir/manifest.json`, in manifest order.
pub fn load_network(dir: &Path) -> Result<(NetworkManifest, Vec<SecurityBundle>)> {
    let manifest_path = dir.join("manifest.json");
    let text =
        std::fs::read_to_string(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: NetworkManifest = serde_json::from_str(&text)?;
    let bundles = manifest
        .nodes
        .iter()
        .map(|&id| {
            let path = dir.join(bundle_file_name(id));
            read_bundle(&path).with_context(|| format!("reading {}", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, bundles))
}

pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
}
