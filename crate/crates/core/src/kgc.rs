//! Offline key generation center: mints the KGC key pair and one security
//! bundle per node, and reads/writes the binary bundle files that nodes load
//! at boot.
//!
//! Bundle file layout (version 1):
//!
//! ```text
//! "TAKE" | version:u8 | field* ; field = len:u16 BE | bytes
//! fields: curve name, node id, private scalar, public key (x||y),
//!         certificate, KGC public key (x||y)
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cert::{self, CertError, Certificate, NodeId};
use crate::crypto::{self, CryptoError, CurveId, EcPoint, KeyPair, OpCounter, PrivateKey};

pub const BUNDLE_MAGIC: &[u8; 4] = b"TAKE";
pub const BUNDLE_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum KgcError {
    #[error("node count {0} out of range 1..=65535")]
    NodeCount(usize),
    #[error("bundle format error: {0}")]
    Format(String),
    #[error("bundle integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Everything a node needs at runtime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecurityBundle {
    pub curve: CurveId,
    pub node_id: NodeId,
    pub keypair: KeyPair,
    pub cert: Certificate,
    pub kgc_public: EcPoint,
    pub version: u8,
}

impl SecurityBundle {
    pub fn to_bytes(&self) -> Vec<u8> {
        let curve = self.curve.params();
        let mut out = BUNDLE_MAGIC.to_vec();
        out.push(self.version);
        let fields: [Vec<u8>; 6] = [
            self.curve.name().as_bytes().to_vec(),
            self.node_id.to_bytes().to_vec(),
            self.keypair.private.to_bytes(curve),
            curve.encode_point(&self.keypair.public).expect("public key is finite"),
            self.cert.to_bytes(curve),
            curve.encode_point(&self.kgc_public).expect("KGC key is finite"),
        ];
        for field in &fields {
            out.extend((field.len() as u16).to_be_bytes());
            out.extend(field);
        }
        out
    }

    /// Parses a bundle and checks its internal consistency.
    pub fn from_bytes(bytes: &[u8]) -> Result<SecurityBundle, KgcError> {
        if bytes.len() < 5 || &bytes[..4] != BUNDLE_MAGIC {
            return Err(KgcError::Format("bad magic".into()));
        }
        if bytes[4] != BUNDLE_VERSION {
            return Err(KgcError::Format(format!("unsupported version {}", bytes[4])));
        }
        let mut rest = &bytes[5..];
        let mut fields = Vec::with_capacity(6);
        while !rest.is_empty() {
            if rest.len() < 2 {
                return Err(KgcError::Format("truncated length prefix".into()));
            }
            let len = u16::from_be_bytes([rest[0], rest[1]]) as usize;
            if rest.len() < 2 + len {
                return Err(KgcError::Format("truncated field".into()));
            }
            fields.push(&rest[2..2 + len]);
            rest = &rest[2 + len..];
        }
        if fields.len() != 6 {
            return Err(KgcError::Format(format!("expected 6 fields, found {}", fields.len())));
        }

        let name = std::str::from_utf8(fields[0]).map_err(|_| KgcError::Format("curve name".into()))?;
        let curve_id = CurveId::from_name(name).ok_or_else(|| KgcError::Format(format!("unknown curve {name}")))?;
        let curve = curve_id.params();
        if fields[1].len() != 2 {
            return Err(KgcError::Format("node id must be 2 bytes".into()));
        }
        let node_id = NodeId(u16::from_be_bytes([fields[1][0], fields[1][1]]));
        if fields[2].len() != curve.scalar_len() {
            return Err(KgcError::Format("private key length".into()));
        }
        let private = PrivateKey::from_scalar(curve, num_bigint::BigUint::from_bytes_be(fields[2]))
            .map_err(|e| KgcError::Format(e.to_string()))?;
        let public = curve
            .decode_point(fields[3])
            .map_err(|e| KgcError::Format(format!("public key: {e}")))?;
        let compressed = match fields[4].len() {
            n if n == Certificate::encoded_len(curve, false) => false,
            n if n == Certificate::encoded_len(curve, true) => true,
            n => return Err(KgcError::Format(format!("certificate length {n}"))),
        };
        let cert = Certificate::from_bytes(curve, fields[4], compressed)?;
        let kgc_public = curve
            .decode_point(fields[5])
            .map_err(|e| KgcError::Format(format!("KGC key: {e}")))?;

        let bundle = SecurityBundle {
            curve: curve_id,
            node_id,
            keypair: KeyPair { private, public },
            cert,
            kgc_public,
            version: bytes[4],
        };
        bundle.check_integrity()?;
        Ok(bundle)
    }

    pub fn check_integrity(&self) -> Result<(), KgcError> {
        let curve = self.curve.params();
        if self.cert.id != self.node_id {
            return Err(KgcError::Integrity("certificate id differs from node id".into()));
        }
        if curve.mul(self.keypair.private.scalar(), &curve.g) != self.keypair.public {
            return Err(KgcError::Integrity("private key does not match public key".into()));
        }
        match self.cert.public_key(curve) {
            Ok(q) if q == self.keypair.public => {}
            _ => return Err(KgcError::Integrity("certificate key differs from node key".into())),
        }
        if !cert::verify_cert(curve, &self.cert, &self.kgc_public, &mut OpCounter::new()) {
            return Err(KgcError::Integrity("certificate does not verify under KGC key".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkManifest {
    pub curve: CurveId,
    pub nodes: Vec<NodeId>,
    /// Hex `x || y`.
    pub kgc_public_key: String,
    pub seed_fingerprint: String,
    pub compressed: bool,
    pub bundle_version: u8,
}

pub struct GeneratedNetwork {
    pub manifest: NetworkManifest,
    pub bundles: Vec<SecurityBundle>,
    /// Never written into a bundle.
    pub kgc: KeyPair,
}

fn derived_seed(master: u64, label: &[u8], index: u64) -> u64 {
    let mut material = master.to_be_bytes().to_vec();
    material.extend_from_slice(label);
    material.extend(index.to_be_bytes());
    let h = crypto::sha1(&material);
    u64::from_be_bytes(h[..8].try_into().expect("8 bytes"))
}

/// Mints the KGC key pair and bundles for nodes `1..=count`.
pub fn generate_network(
    count: usize,
    curve_id: CurveId,
    master_seed: u64,
    compressed: bool,
) -> Result<GeneratedNetwork, KgcError> {
    if count == 0 || count > 65535 {
        return Err(KgcError::NodeCount(count));
    }
    let curve = curve_id.params();
    let kgc = crypto::keygen(curve, derived_seed(master_seed, b"kgc", 0));
    let bundles = (1..=count as u16)
        .into_par_iter()
        .map(|id| {
            let keypair = crypto::keygen(curve, derived_seed(master_seed, b"node", u64::from(id)));
            let cert = cert::issue(curve, NodeId(id), &keypair.public, &kgc.private, compressed)?;
            Ok(SecurityBundle {
                curve: curve_id,
                node_id: NodeId(id),
                keypair,
                cert,
                kgc_public: kgc.public.clone(),
                version: BUNDLE_VERSION,
            })
        })
        .collect::<Result<Vec<_>, KgcError>>()?;
    let fingerprint = crypto::sha1(&master_seed.to_be_bytes());
    let manifest = NetworkManifest {
        curve: curve_id,
        nodes: bundles.iter().map(|b| b.node_id).collect(),
        kgc_public_key: hex::encode(curve.encode_point(&kgc.public)?),
        seed_fingerprint: hex::encode(&fingerprint[..8]),
        compressed,
        bundle_version: BUNDLE_VERSION,
    };
    Ok(GeneratedNetwork { manifest, bundles, kgc })
}

pub fn write_bundle(bundle: &SecurityBundle, path: &Path) -> Result<(), KgcError> {
    fs::write(path, bundle.to_bytes())?;
    Ok(())
}

pub fn read_bundle(path: &Path) -> Result<SecurityBundle, KgcError> {
    SecurityBundle::from_bytes(&fs::read(path)?)
}

pub fn bundle_file_name(id: NodeId) -> String {
    format!("node_{}.take", id.0)
}

/// Writes `manifest.json` and one bundle per node into `dir`. Returns the
/// bundle paths.
pub fn write_network(net: &GeneratedNetwork, dir: &Path) -> Result<Vec<PathBuf>, KgcError> {
    fs::create_dir_all(dir)?;
    let manifest = serde_json::to_string_pretty(&net.manifest)?;
    fs::write(dir.join("manifest.json"), manifest + "\n")?;
    net.bundles
        .iter()
        .map(|b| {
            let path = dir.join(bundle_file_name(b.node_id));
            write_bundle(b, &path)?;
            Ok(path)
        })
        .collect()
}

/// Writes the KGC private scalar as hex to its own file.
pub fn write_kgc_secret(net: &GeneratedNetwork, path: &Path) -> Result<(), KgcError> {
    let curve = net.manifest.curve.params();
    fs::write(path, hex::encode(net.kgc.private.to_bytes(curve)) + "\n")?;
    Ok(())
}
