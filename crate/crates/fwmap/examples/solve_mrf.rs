//! Solve a loopy MRF and compare the dual bound to the exact MAP.
//!
//! A random 2×3 grid with 3 labels per node is serialized to the UAI text
//! format, parsed back (exercising the full file round-trip), decomposed
//! into spanning forests and solved; the trace shows the bound climbing
//! from h(0) toward the MAP value found by exhaustive enumeration.
//!
//! Run with: cargo run --example solve_mrf

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fwmap::clock::ClockKind;
use fwmap::io;
use fwmap::mrf::{build_mrf_decomposition, MrfEdge, MrfInstance};
use fwmap::proximal::{solve, SolveOptions};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (h, w, labels) = (2usize, 3usize, 3usize);
    let n = h * w;
    let unaries: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..labels).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut edges = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = r * w + c;
            for u in [(r + 1 < h).then(|| v + w), (c + 1 < w).then(|| v + 1)]
                .into_iter()
                .flatten()
            {
                let table = (0..labels * labels)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                edges.push(MrfEdge { u: v, v: u, table });
            }
        }
    }
    let generated = MrfInstance {
        num_labels: vec![labels; n],
        unaries,
        edges,
    };

    // Round-trip through the UAI MARKOV text format.
    let text = io::write_mrf(&generated);
    let inst = io::parse_mrf(&text).expect("serialized instance parses back");
    assert_eq!(inst, generated, "round-trip must be lossless");
    println!(
        "instance: {} nodes, {} edges ({} bytes as UAI text)",
        inst.num_nodes(),
        inst.edges.len(),
        text.len()
    );

    // Exact MAP by enumeration — only for this tiny instance.
    let mut best = f64::INFINITY;
    let mut labeling = vec![0usize; n];
    let mut current = vec![0usize; n];
    loop {
        let e = inst.energy(&current);
        if e < best {
            best = e;
            labeling.copy_from_slice(&current);
        }
        let mut v = 0;
        loop {
            if v == n {
                break;
            }
            current[v] += 1;
            if current[v] < labels {
                break;
            }
            current[v] = 0;
            v += 1;
        }
        if v == n {
            break;
        }
    }
    println!("exact MAP: {best:.6} at {labeling:?}");

    let (dec, _) = build_mrf_decomposition(&inst).expect("decomposition builds");
    println!(
        "decomposition: {} forest terms over {} Boolean variables",
        dec.num_terms(),
        dec.num_vars()
    );

    let options = SolveOptions {
        max_iterations: Some(200),
        prox_weight: Some(1.0),
        clock: ClockKind::Work,
        ..SolveOptions::default()
    };
    let result = solve(&dec, &options).expect("solve runs");
    for row in result.trace.iter().step_by(5) {
        println!(
            "iter {:>3}: h = {:+.6}, best = {:+.6}, A = {:.2e}, B = {:.2e}",
            row.iter, row.h, row.h_best, row.a_gap, row.b_gap
        );
    }
    println!(
        "dual bound {:.6} ≤ MAP {:.6} (gap {:.2e})",
        result.best_bound,
        best,
        best - result.best_bound
    );
    assert!(
        result.best_bound <= best + 1e-9,
        "weak duality must hold"
    );
}
