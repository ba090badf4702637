//! Solve a discrete-tomography relaxation with contradictory projections.
//!
//! Two rays cover the same eight pixels of an 8×8 binary-ish image but demand
//! different sums, so no labeling satisfies both and the dual bound must rise
//! strictly above the trivial h(0) = 0 to certify the conflict.
//!
//! Run with: cargo run --example solve_tomography

use fwmap::clock::ClockKind;
use fwmap::proximal::{solve, SolveOptions};
use fwmap::tomography::{
    build_tomography_decomposition, ConvKind, ProjectionRow, TomographyInstance,
};

fn main() {
    let top_row: Vec<usize> = (0..8).collect();
    let left_column: Vec<usize> = (0..8).map(|r| r * 8).collect();
    let inst = TomographyInstance {
        height: 8,
        width: 8,
        max_label: 2,
        truncation: 1.0,
        rows: vec![
            ProjectionRow {
                target: 10,
                pixels: top_row,
            },
            ProjectionRow {
                target: 2,
                pixels: left_column,
            },
        ],
    };
    // The rays share pixel 0 only; targets 10 and 2 cannot coexist without
    // paying smoothness cost, so the optimum of the relaxation is positive.
    let (dec, _) = build_tomography_decomposition(&inst, ConvKind::Pruned)
        .expect("instance is well formed");
    println!(
        "decomposition: {} terms over {} Boolean variables",
        dec.num_terms(),
        dec.num_vars()
    );

    let options = SolveOptions {
        max_iterations: Some(200),
        prox_weight: Some(5.0),
        clock: ClockKind::Work,
        ..SolveOptions::default()
    };
    let result = solve(&dec, &options).expect("solve runs");
    for row in result.trace.iter().step_by(4) {
        println!(
            "iter {:>3}: h = {:+.6}, best = {:+.6}, A = {:.2e}, B = {:.2e}",
            row.iter, row.h, row.h_best, row.a_gap, row.b_gap
        );
    }
    println!(
        "final bound {:.6} after {} iterations ({:?})",
        result.best_bound, result.iterations, result.stop
    );
    assert!(
        result.best_bound > 0.0,
        "conflicting rays must push the bound above zero"
    );
}
