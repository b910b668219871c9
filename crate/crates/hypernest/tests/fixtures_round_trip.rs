//! Every writer's output is accepted by its reader with full-precision
//! value equality; the bundled fixtures pin the on-disk formats.

use std::path::{Path, PathBuf};

use hypernest::io;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn point_cloud_fixture_rewrites_identically() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("cloud.csv");
    let points = io::read_points(&src).unwrap();
    let copy = dir.path().join("cloud.csv");
    io::write_points(&copy, &points).unwrap();
    assert_eq!(
        std::fs::read(&src).unwrap(),
        std::fs::read(&copy).unwrap(),
        "point CSV must round-trip byte for byte"
    );
}

#[test]
fn graph_bundle_fixture_rewrites_identically() {
    let dir = tempfile::tempdir().unwrap();
    let graph = io::read_graph(&fixtures().join("graph")).unwrap();
    let stem = dir.path().join("graph");
    io::write_graph(&stem, &graph).unwrap();
    for suffix in [
        "edges.tsv",
        "features.csv",
        "labels.csv",
        "masks.csv",
        "edge_samples.csv",
    ] {
        let a = std::fs::read(fixtures().join(format!("graph.{suffix}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("graph.{suffix}"))).unwrap();
        assert_eq!(a, b, "graph {suffix} must round-trip byte for byte");
    }
}

#[test]
fn model_fixtures_rewrite_identically() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["stack.model", "tpca.model", "gcn.model"] {
        let src = fixtures().join(name);
        let model = io::read_model(&src).unwrap();
        let copy = dir.path().join(name);
        io::write_model(&copy, &model).unwrap();
        assert_eq!(
            std::fs::read(&src).unwrap(),
            std::fs::read(&copy).unwrap(),
            "{name} must round-trip byte for byte"
        );
    }
}
