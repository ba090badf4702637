//! Race the proximal solver against the subgradient baseline.
//!
//! Both maximize the identical dual bound of one random 3×3 grid MRF, so
//! their best-bound trajectories are directly comparable; the run prints the
//! two final bounds and where each solver stood after matching work.
//!
//! Run with: cargo run --example subgradient_baseline

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fwmap::clock::ClockKind;
use fwmap::mrf::{build_mrf_decomposition, MrfEdge, MrfInstance};
use fwmap::proximal::{solve, SolveOptions};
use fwmap::subgradient::{solve_sa, SaOptions};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (h, w, labels) = (3usize, 3usize, 3usize);
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
    let inst = MrfInstance {
        num_labels: vec![labels; n],
        unaries,
        edges,
    };
    let (dec, _) = build_mrf_decomposition(&inst).expect("decomposition builds");
    println!(
        "grid MRF: {} nodes, {} edges, {} tree terms",
        n,
        inst.edges.len(),
        dec.num_terms()
    );

    let fw = solve(
        &dec,
        &SolveOptions {
            max_iterations: Some(300),
            prox_weight: Some(1.0),
            clock: ClockKind::Work,
            ..SolveOptions::default()
        },
    )
    .expect("proximal solve runs");

    let sa = solve_sa(
        &dec,
        &SaOptions {
            max_steps: 10_000,
            clock: ClockKind::Work,
            ..SaOptions::default()
        },
    )
    .expect("baseline runs");

    println!("proximal: h_best = {:.9} ({:?})", fw.best_bound, fw.stop);
    println!("baseline: h_best = {:.9} ({:?})", sa.best_bound, sa.stop);
    println!(
        "agreement: |Δ| = {:.3e}",
        (fw.best_bound - sa.best_bound).abs()
    );

    // Bound at equal virtual work: walk both traces up to the earlier of the
    // two finishing times.
    let fw_end = fw.trace.last().map(|r| r.time_s).unwrap_or(0.0);
    let cutoff = fw_end.min(sa.trace.last().map(|r| r.time_s).unwrap_or(0.0));
    let at = |trace: &[fwmap::io::TraceRecord]| {
        trace
            .iter()
            .take_while(|r| r.time_s <= cutoff)
            .map(|r| r.h_best)
            .last()
            .unwrap_or(f64::NEG_INFINITY)
    };
    println!(
        "at equal work ({cutoff:.4} virtual s): proximal {:.9}, baseline {:.9}",
        at(&fw.trace),
        at(&sa.trace)
    );
}
