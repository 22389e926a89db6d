use tinyake::cert::NodeId;
use tinyake::crypto::CurveId;
use tinyake::kgc::{
    bundle_file_name, generate_network, read_bundle, write_kgc_secret, write_network, KgcError, NetworkManifest,
    SecurityBundle,
};

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

#[test]
fn network_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let net = generate_network(5, CurveId::Secp160r1, 8, false).unwrap();
    let paths = write_network(&net, dir.path()).unwrap();
    assert_eq!(paths.len(), 5);

    let manifest: NetworkManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, net.manifest);
    assert_eq!(manifest.nodes, (1..=5).map(NodeId).collect::<Vec<_>>());

    for b in &net.bundles {
        let back = read_bundle(&dir.path().join(bundle_file_name(b.node_id))).unwrap();
        assert_eq!(&back, b);
    }
}

#[test]
fn kgc_secret_never_lands_in_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    for compressed in [false, true] {
        let net = generate_network(20, CurveId::Secp160r1, 77, compressed).unwrap();
        let out = dir.path().join(format!("net-{compressed}"));
        write_network(&net, &out).unwrap();
        let secret = net.kgc.private.to_bytes(CurveId::Secp160r1.params());
        // the minimal big-endian form as well as the padded one
        let trimmed: Vec<u8> = secret.iter().copied().skip_while(|&b| b == 0).collect();
        for entry in std::fs::read_dir(&out).unwrap() {
            let bytes = std::fs::read(entry.unwrap().path()).unwrap();
            assert!(!contains(&bytes, &secret));
            assert!(!contains(&bytes, &trimmed));
            assert!(!contains(&bytes, hex::encode(&secret).as_bytes()));
        }
        let secret_file = dir.path().join(format!("kgc-{compressed}.hex"));
        write_kgc_secret(&net, &secret_file).unwrap();
        assert_eq!(
            std::fs::read_to_string(&secret_file).unwrap().trim(),
            hex::encode(&secret)
        );
    }
}

#[test]
fn full_size_network_of_961_nodes() {
    let net = generate_network(961, CurveId::Secp160r1, 2024, false).unwrap();
    assert_eq!(net.bundles.len(), 961);
    for (i, b) in net.bundles.iter().enumerate() {
        assert_eq!(b.node_id, NodeId(i as u16 + 1));
        assert_eq!(b.cert.id, b.node_id);
    }
    // spot-check integrity; generation already checks every bundle's shape
    for b in net.bundles.iter().step_by(97) {
        b.check_integrity().unwrap();
    }
}

#[test]
fn generation_is_reproducible() {
    let a = generate_network(4, CurveId::Toy16, 5, false).unwrap();
    let b = generate_network(4, CurveId::Toy16, 5, false).unwrap();
    assert_eq!(a.bundles, b.bundles);
    assert_eq!(a.manifest, b.manifest);
    let c = generate_network(4, CurveId::Toy16, 6, false).unwrap();
    assert_ne!(a.kgc.public, c.kgc.public);
}

#[test]
fn node_count_limits() {
    assert!(matches!(
        generate_network(0, CurveId::Toy16, 1, false),
        Err(KgcError::NodeCount(0))
    ));
    assert!(generate_network(65536, CurveId::Toy16, 1, false).is_err());
}

#[test]
fn corrupted_bundles_are_refused() {
    let net = generate_network(2, CurveId::Secp160r1, 9, false).unwrap();
    let good = net.bundles[0].to_bytes();
    assert!(SecurityBundle::from_bytes(&good).is_ok());
    assert!(SecurityBundle::from_bytes(&good[..good.len() - 1]).is_err());
    let mut bad_magic = good.clone();
    bad_magic[0] ^= 0xFF;
    assert!(SecurityBundle::from_bytes(&bad_magic).is_err());

    // every single-byte change past the header is either a format error or
    // an integrity failure
    for i in 5..good.len() {
        let mut bytes = good.clone();
        bytes[i] ^= 0x01;
        assert!(SecurityBundle::from_bytes(&bytes).is_err(), "byte {i} accepted");
    }

    // bundle 2's certificate with bundle 1's keys
    let mut swapped = net.bundles[0].clone();
    swapped.cert = net.bundles[1].cert.clone();
    assert!(swapped.check_integrity().is_err());
}
