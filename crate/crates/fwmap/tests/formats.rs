//! Round-trip tests of the instance formats over the shipped fixtures.

use std::fs;
use std::path::PathBuf;

use fwmap::io;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn mrf_fixtures_round_trip() {
    for name in ["chain3.uai", "cycle4.uai"] {
        let inst = io::parse_mrf(&fixture(name)).expect("fixture parses");
        let written = io::write_mrf(&inst);
        let again = io::parse_mrf(&written).expect("serialized form parses");
        assert_eq!(inst, again, "{name}: parse → write → parse must be identity");
    }
}

#[test]
fn chain3_has_expected_shape() {
    let inst = io::parse_mrf(&fixture("chain3.uai")).unwrap();
    assert_eq!(inst.num_nodes(), 3);
    assert_eq!(inst.num_labels, vec![2, 2, 2]);
    assert_eq!(inst.edges.len(), 2);
    assert_eq!(inst.unaries[0], vec![0.0, 1.5]);
    // MAP by enumeration: all-zeros costs 0.5.
    assert_eq!(inst.energy(&[0, 0, 0]), 0.5);
}

#[test]
fn repeated_mrf_factors_are_summed() {
    // The same edge given twice, once reversed: tables must fold together
    // with a transpose.
    let text = "MARKOV\n2\n2 3\n2\n2 0 1\n2 1 0\n6\n1 2 3 4 5 6\n6\n10 40 20 50 30 60\n";
    let inst = io::parse_mrf(text).unwrap();
    assert_eq!(inst.edges.len(), 1);
    let e = &inst.edges[0];
    assert_eq!((e.u, e.v), (0, 1));
    // Second table is (3×2) over (1,0): transposed entry (a,b) = t[b*2+a].
    assert_eq!(e.table, vec![11.0, 22.0, 33.0, 44.0, 55.0, 66.0]);
}

#[test]
fn mrf_parser_rejects_bad_input() {
    assert!(matches!(
        io::parse_mrf("MARKOV\n1\n2\n1\n3 0 0 0\n8\n0 0 0 0 0 0 0 0\n"),
        Err(io::IoError::Arity { arity: 3, .. })
    ));
    assert!(io::parse_mrf("MRF\n").is_err(), "wrong magic");
    assert!(
        io::parse_mrf("MARKOV\n1\n2\n1\n1 0\n2\n0).0 1.0\n").is_err(),
        "malformed number"
    );
    assert!(
        io::parse_mrf("MARKOV\n1\n2\n1\n1 0\n2\n0.0 1.0\nextra\n").is_err(),
        "trailing garbage"
    );
    assert!(
        io::parse_mrf("MARKOV\n2\n2 2\n1\n2 0 0\n4\n0 0 0 0\n").is_err(),
        "self loop"
    );
}

#[test]
fn tomography_fixtures_round_trip() {
    for name in ["tiny.tomo", "tomo_conflict.tomo"] {
        let inst = io::parse_tomography(&fixture(name)).expect("fixture parses");
        let written = io::write_tomography(&inst);
        let again = io::parse_tomography(&written).expect("serialized form parses");
        assert_eq!(inst, again, "{name}: parse → write → parse must be identity");
    }
}

#[test]
fn tomo_conflict_has_expected_shape() {
    let inst = io::parse_tomography(&fixture("tomo_conflict.tomo")).unwrap();
    assert_eq!((inst.height, inst.width, inst.max_label), (8, 8, 2));
    assert_eq!(inst.rows.len(), 2);
    assert_eq!(inst.rows[0].target, 10);
    assert_eq!(inst.rows[1].pixels, vec![0, 8, 16, 24, 32, 40, 48, 56]);
}

#[test]
fn tomography_parser_rejects_bad_input() {
    assert!(matches!(
        io::parse_tomography("TOMO 2 2 1 0.5\nROW 5 2 0 1\n"),
        Err(io::IoError::InfeasibleRow { target: 5, .. })
    ));
    assert!(matches!(
        io::parse_tomography("TOMO 2 2 1 0.5\nROW -1 2 0 1\n"),
        Err(io::IoError::InfeasibleRow { target: -1, .. })
    ));
    assert!(
        io::parse_tomography("TOMO 2 2 1 0.5\nROW 1 2 0 4\n").is_err(),
        "pixel outside grid"
    );
    assert!(
        io::parse_tomography("TOMO 2 2 1 0.5\nROW 1 2 0 0\n").is_err(),
        "repeated pixel"
    );
}

#[test]
fn matching_fixture_round_trips() {
    let inst = io::parse_graph_matching(&fixture("match3.gm")).expect("fixture parses");
    let written = io::write_graph_matching(&inst);
    let again = io::parse_graph_matching(&written).expect("serialized form parses");
    assert_eq!(inst, again, "parse → write → parse must be identity");
}

#[test]
fn match3_has_expected_shape() {
    let inst = io::parse_graph_matching(&fixture("match3.gm")).unwrap();
    assert_eq!((inst.num_nodes, inst.num_labels), (3, 3));
    assert_eq!(inst.allowed, vec![vec![0, 1, 2]; 3]);
    assert_eq!(inst.costs[0], vec![8.0, 7.0, 3.0]);
    assert_eq!(inst.edges.len(), 3, "three node pairs carry pairwise costs");
    // Assignment (2, 1, 0): costs 3 + 4 + 3 plus the pairwise hits
    // (0↔1 on labels 2,1: none declared) … verified by enumeration below.
    let energy = inst.energy(&[2, 1, 0]).expect("injective assignment");
    assert!((energy - 10.0).abs() < 1e-12, "unaries only, no pairwise on these labels");
}

#[test]
fn matching_parser_rejects_bad_input() {
    assert!(
        io::parse_graph_matching("p 2 2 2 0\na 0 0 0 1.0\na 0 1 1 1.0\n").is_err(),
        "duplicate assignment id"
    );
    assert!(
        io::parse_graph_matching("p 2 2 2 1\na 0 0 0 1.0\na 1 0 1 1.0\ne 0 1 2.0\n").is_err(),
        "edge within one node"
    );
    assert!(
        io::parse_graph_matching("p 2 2 1 0\na 0 0 0 1.0\na 1 1 1 1.0\n").is_err(),
        "declared counts must match"
    );
    assert!(
        io::parse_graph_matching("p 1 1 1 0\na 0 0 0 1.0\ne 0 0 1.0\n").is_err(),
        "undeclared edge"
    );
}
