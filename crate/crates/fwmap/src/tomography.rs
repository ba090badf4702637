//! Discrete tomography: smoothness MRF plus linear projection constraints.
//!
//! The image is a grid of pixels with labels `0..=k`, a truncated-L1
//! smoothness prior on the 4-neighborhood (`θ(a,b) = min(|a−b|, τ)`, zero
//! unaries) and, per projection ray, a hard constraint that the labels along
//! the ray sum to a prescribed value.  The grid prior decomposes into tree
//! terms exactly like any MRF; every projection row becomes one extra term
//! whose domain is `{ x : Σ_v Σ_l l·x_{v;l} = target }` with zero cost, so
//! its oracle only has to minimize `⟨λ, x⟩` under the sum constraint.
//!
//! That minimization runs on a balanced [`PartitionTree`]: leaves hold one
//! pixel's `k+1` multiplier values, inner nodes combine children with a
//! (min,+) convolution ([`min_convolution`]), and a top-down sweep splits
//! the target sum back into per-pixel labels.

use thiserror::Error;

use crate::model::{
    CompactLabeling, Decomposition, MinOracle, ModelError, OracleError, Term, INFEASIBLE,
    INFEASIBLE_THRESHOLD,
};
use crate::mrf::{build_mrf_decomposition, BooleanEncoding, MrfEdge, MrfError, MrfInstance};

/// One projection ray: the listed pixels' labels must sum to `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionRow {
    /// Required sum of labels along the ray.
    pub target: usize,
    /// Row-major pixel indices, pairwise distinct.
    pub pixels: Vec<usize>,
}

/// A discrete-tomography instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyInstance {
    /// Grid height.
    pub height: usize,
    /// Grid width.
    pub width: usize,
    /// Largest label; pixels take values in `0..=max_label`.
    pub max_label: usize,
    /// Truncation threshold `τ` of the pairwise prior.
    pub truncation: f64,
    /// Projection rays.
    pub rows: Vec<ProjectionRow>,
}

/// Errors from tomography validation and encoding.
#[derive(Debug, Error, PartialEq)]
pub enum TomoError {
    /// A row's target sum cannot be met by its pixels.
    #[error("row {row}: target {target} infeasible for {pixels} pixels with labels 0..={max_label}")]
    InfeasibleRow {
        row: usize,
        target: usize,
        pixels: usize,
        max_label: usize,
    },
    /// A row mentions a pixel outside the grid or twice.
    #[error("row {row}: bad pixel list: {msg}")]
    BadRow { row: usize, msg: String },
    /// Grid encoding failed.
    #[error(transparent)]
    Mrf(#[from] MrfError),
    /// Decomposition assembly failed.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// (min,+) convolution of two cost tables:
/// `out[s] = min_{s' } a[s'] + b[s − s']` with `out.len() = a.len() + b.len() − 1`.
///
/// Entries at or above the infeasibility threshold act as "no value"; sums
/// involving them stay above the threshold, so no special casing is needed.
pub fn min_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert!(!a.is_empty() && !b.is_empty());
    let mut out = vec![f64::INFINITY; a.len() + b.len() - 1];
    for (i, &av) in a.iter().enumerate() {
        for (j, &bv) in b.iter().enumerate() {
            let s = av + bv;
            if s < out[i + j] {
                out[i + j] = s;
            }
        }
    }
    // Clamp "sum of sentinels" overflow back to the canonical sentinel so
    // tables stay comparable.
    for v in &mut out {
        if *v >= INFEASIBLE_THRESHOLD {
            *v = INFEASIBLE;
        }
    }
    out
}

/// (min,+) convolution by best-first pair enumeration.
///
/// Both inputs are scanned in sorted order through a frontier of candidate
/// index pairs, so each output cell is fixed by the first pair that lands on
/// it; cells covered early prune the remaining quadratic work.  Returns the
/// same table as [`min_convolution`], entry for entry.
pub fn min_convolution_pruned(a: &[f64], b: &[f64]) -> Vec<f64> {
    use std::cmp::{Ordering, Reverse};
    use std::collections::BinaryHeap;

    /// Total order on sums so the heap pops them nondecreasing.
    #[derive(PartialEq)]
    struct Key(f64);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Key {
        fn cmp(&self, other: &Self) -> Ordering {
            self.0.total_cmp(&other.0)
        }
    }

    assert!(!a.is_empty() && !b.is_empty());
    let mut ia: Vec<usize> = (0..a.len()).collect();
    let mut ib: Vec<usize> = (0..b.len()).collect();
    ia.sort_by(|&x, &y| a[x].total_cmp(&a[y]));
    ib.sort_by(|&x, &y| b[x].total_cmp(&b[y]));

    let mut out = vec![f64::INFINITY; a.len() + b.len() - 1];
    let mut remaining = out.len();
    let mut heap: BinaryHeap<(Reverse<Key>, usize, usize)> = BinaryHeap::new();
    let mut visited = vec![false; a.len() * b.len()];
    let key = |i: usize, j: usize| -> Key { Key(a[ia[i]] + b[ib[j]]) };
    heap.push((Reverse(key(0, 0)), 0, 0));
    visited[0] = true;
    while let Some((Reverse(Key(sum)), i, j)) = heap.pop() {
        let cell = ia[i] + ib[j];
        if out[cell].is_infinite() {
            out[cell] = sum;
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        if i + 1 < a.len() && !visited[(i + 1) * b.len() + j] {
            visited[(i + 1) * b.len() + j] = true;
            heap.push((Reverse(key(i + 1, j)), i + 1, j));
        }
        if j + 1 < b.len() && !visited[i * b.len() + j + 1] {
            visited[i * b.len() + j + 1] = true;
            heap.push((Reverse(key(i, j + 1)), i, j + 1));
        }
    }
    for v in &mut out {
        if *v >= INFEASIBLE_THRESHOLD {
            *v = INFEASIBLE;
        }
    }
    out
}

/// Which convolution the summation oracle uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvKind {
    /// Plain nested loops.
    #[default]
    Naive,
    /// Best-first pruned enumeration (identical output).
    Pruned,
}

/// Balanced binary partition of a pixel range with per-node cost tables.
///
/// Node `q` covers pixels `lo..hi` (term-local positions); `table[s]` is the
/// minimum of `Σ λ` over that segment given that its labels sum to `s`.
/// Built bottom-up by convolution, consumed top-down to split the row
/// target; ties at a split go to the smallest left-child sum.
pub struct PartitionTree {
    nodes: Vec<PartitionNode>,
    root: usize,
}

struct PartitionNode {
    lo: usize,
    children: Option<(usize, usize)>,
    table: Vec<f64>,
}

impl PartitionTree {
    /// Build the tree for `n` pixels with per-pixel tables
    /// `leaf(v)[l] = λ_{v;l}`, `l ∈ 0..=k`.
    fn build(n: usize, leaf: &dyn Fn(usize) -> Vec<f64>, conv: ConvKind) -> Self {
        let mut nodes = Vec::with_capacity(2 * n - 1);
        let root = Self::build_range(0, n, leaf, conv, &mut nodes);
        PartitionTree { nodes, root }
    }

    fn build_range(
        lo: usize,
        hi: usize,
        leaf: &dyn Fn(usize) -> Vec<f64>,
        conv: ConvKind,
        nodes: &mut Vec<PartitionNode>,
    ) -> usize {
        if hi - lo == 1 {
            nodes.push(PartitionNode {
                lo,
                children: None,
                table: leaf(lo),
            });
            return nodes.len() - 1;
        }
        // Split so the left part holds ⌈(hi−lo)/2⌉ pixels.
        let mid = (lo + hi + 1) / 2;
        let left = Self::build_range(lo, mid, leaf, conv, nodes);
        let right = Self::build_range(mid, hi, leaf, conv, nodes);
        let table = match conv {
            ConvKind::Naive => min_convolution(&nodes[left].table, &nodes[right].table),
            ConvKind::Pruned => min_convolution_pruned(&nodes[left].table, &nodes[right].table),
        };
        nodes.push(PartitionNode {
            lo,
            children: Some((left, right)),
            table,
        });
        nodes.len() - 1
    }

    /// Minimum of `Σ λ` subject to the labels summing to `target`.
    fn root_value(&self, target: usize) -> f64 {
        self.nodes[self.root].table[target]
    }

    /// Recover per-pixel labels for the given sum, smallest left-child sum
    /// on ties.
    fn backtrack(&self, target: usize, out: &mut [u32]) {
        self.split(self.root, target, out);
    }

    fn split(&self, node: usize, target: usize, out: &mut [u32]) {
        let n = &self.nodes[node];
        let Some((left, right)) = n.children else {
            out[n.lo] = target as u32;
            return;
        };
        let lt = &self.nodes[left].table;
        let rt = &self.nodes[right].table;
        let mut best: Option<(usize, f64)> = None;
        let from = target.saturating_sub(rt.len() - 1);
        let to = target.min(lt.len() - 1);
        for ls in from..=to {
            let v = lt[ls] + rt[target - ls];
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((ls, v));
            }
        }
        let (ls, _) = best.expect("in-range target always has a split");
        self.split(left, ls, out);
        self.split(right, target - ls, out);
    }
}

/// Exact min-oracle for one projection row.
///
/// The domain is every labeling of the row's pixels whose labels sum to the
/// target; all domain points cost zero, so `solve(λ)` purely minimizes
/// `⟨λ, x⟩` via the partition tree.
pub struct SummationOracle {
    num_pixels: usize,
    max_label: usize,
    target: usize,
    conv: ConvKind,
}

impl SummationOracle {
    /// Oracle for `num_pixels` pixels with labels `0..=max_label` summing to
    /// `target`.  Fails if the target is out of range.
    pub fn new(
        num_pixels: usize,
        max_label: usize,
        target: usize,
        conv: ConvKind,
    ) -> Result<Self, TomoError> {
        if target > num_pixels * max_label {
            return Err(TomoError::InfeasibleRow {
                row: 0,
                target,
                pixels: num_pixels,
                max_label,
            });
        }
        Ok(SummationOracle {
            num_pixels,
            max_label,
            target,
            conv,
        })
    }

    fn block(&self) -> usize {
        self.max_label + 1
    }
}

impl MinOracle for SummationOracle {
    fn arity(&self) -> usize {
        self.num_pixels * self.block()
    }

    fn compact_len(&self) -> usize {
        self.num_pixels
    }

    fn solve(&self, lambda: &[f64]) -> Result<(CompactLabeling, f64), OracleError> {
        debug_assert_eq!(lambda.len(), self.arity());
        let k = self.block();
        let tree = PartitionTree::build(
            self.num_pixels,
            &|v| lambda[v * k..(v + 1) * k].to_vec(),
            self.conv,
        );
        debug_assert!(
            tree.root_value(self.target) < INFEASIBLE_THRESHOLD,
            "an in-range target is always attainable with finite multipliers"
        );
        let mut labeling = vec![0u32; self.num_pixels];
        tree.backtrack(self.target, &mut labeling);
        Ok((labeling, 0.0))
    }

    fn solve_max(&self, lambda: &[f64]) -> Result<(CompactLabeling, f64), OracleError> {
        // All domain costs are zero, so the worst vertex for λ is the best
        // vertex for −λ.
        let negated: Vec<f64> = lambda.iter().map(|&l| -l).collect();
        self.solve(&negated)
    }

    fn decode(&self, s: &[u32], out: &mut [f64]) {
        debug_assert_eq!(s.len(), self.num_pixels);
        debug_assert_eq!(out.len(), self.arity());
        out.fill(0.0);
        let k = self.block();
        for (v, &l) in s.iter().enumerate() {
            out[v * k + l as usize] = 1.0;
        }
    }

    fn inner_product(&self, lambda: &[f64], s: &[u32]) -> f64 {
        let k = self.block();
        s.iter()
            .enumerate()
            .map(|(v, &l)| lambda[v * k + l as usize])
            .sum()
    }

    fn energy(&self, x: &[bool]) -> Option<f64> {
        let k = self.block();
        let mut sum = 0usize;
        for v in 0..self.num_pixels {
            let block = &x[v * k..(v + 1) * k];
            let mut label = None;
            for (l, &bit) in block.iter().enumerate() {
                if bit {
                    if label.is_some() {
                        return None;
                    }
                    label = Some(l);
                }
            }
            sum += label?;
        }
        (sum == self.target).then_some(0.0)
    }

    fn work(&self) -> u64 {
        // Convolution work is quadratic in the total label mass of the row.
        let m = (self.num_pixels * self.block()) as u64;
        m * m + 1
    }
}

/// Assemble the full tomography decomposition: truncated-L1 grid prior as
/// tree terms plus one summation term per projection row.
///
/// Returns the decomposition and the pixel indicator layout (pixels are
/// numbered row-major, so pixel `(r, c)` is node `r * width + c`).
pub fn build_tomography_decomposition(
    inst: &TomographyInstance,
    conv: ConvKind,
) -> Result<(Decomposition, BooleanEncoding), TomoError> {
    let (h, w) = (inst.height, inst.width);
    assert!(h > 0 && w > 0, "grid must be nonempty");
    let n = h * w;
    let k = inst.max_label;
    let block = k + 1;

    for (r, row) in inst.rows.iter().enumerate() {
        if row.pixels.is_empty() {
            return Err(TomoError::BadRow {
                row: r,
                msg: "empty pixel list".into(),
            });
        }
        let mut seen = vec![false; n];
        for &p in &row.pixels {
            if p >= n {
                return Err(TomoError::BadRow {
                    row: r,
                    msg: format!("pixel {p} outside the {h}x{w} grid"),
                });
            }
            if seen[p] {
                return Err(TomoError::BadRow {
                    row: r,
                    msg: format!("pixel {p} repeated"),
                });
            }
            seen[p] = true;
        }
        if row.target > row.pixels.len() * k {
            return Err(TomoError::InfeasibleRow {
                row: r,
                target: row.target,
                pixels: row.pixels.len(),
                max_label: k,
            });
        }
    }

    // Smoothness prior: truncated L1 on the 4-neighborhood, zero unaries.
    let mut table = vec![0.0; block * block];
    for a in 0..block {
        for b in 0..block {
            table[a * block + b] = ((a as f64) - (b as f64)).abs().min(inst.truncation);
        }
    }
    let mut edges = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            if c + 1 < w {
                edges.push(MrfEdge {
                    u: p,
                    v: p + 1,
                    table: table.clone(),
                });
            }
            if r + 1 < h {
                edges.push(MrfEdge {
                    u: p,
                    v: p + w,
                    table: table.clone(),
                });
            }
        }
    }
    let grid = MrfInstance {
        num_labels: vec![block; n],
        unaries: vec![vec![0.0; block]; n],
        edges,
    };
    let (grid_dec, enc) = build_mrf_decomposition(&grid)?;

    // Rebuild the term list, appending one summation term per row.  The
    // tree terms are moved out of the grid decomposition unchanged.
    let mut terms: Vec<Term> = grid_dec.into_terms();
    for row in &inst.rows {
        let oracle = SummationOracle::new(row.pixels.len(), k, row.target, conv)?;
        let mut map = Vec::with_capacity(row.pixels.len() * block);
        for &p in &row.pixels {
            for l in 0..block {
                map.push(enc.indicator(p, l));
            }
        }
        terms.push(Term::new(map, Box::new(oracle)));
    }
    let dec = Decomposition::build(enc.num_vars(), terms)?;
    Ok((dec, enc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn min_convolution_worked_example() {
        // [0,1] ⊛ [0,0]: out[0]=0, out[1]=min(0+0,1+0)=0, out[2]=1.
        assert_eq!(min_convolution(&[0.0, 1.0], &[0.0, 0.0]), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn min_convolution_keeps_sentinels_infeasible() {
        let a = vec![0.0, INFEASIBLE];
        let b = vec![INFEASIBLE, 2.0];
        let out = min_convolution(&a, &b);
        assert_eq!(out[0], INFEASIBLE);
        assert_eq!(out[1], 2.0);
        assert_eq!(out[2], INFEASIBLE);
    }

    #[test]
    fn pruned_convolution_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..300 {
            let la = rng.gen_range(1..=12);
            let lb = rng.gen_range(1..=12);
            let mk = |len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..len)
                    .map(|_| {
                        if rng.gen_bool(0.1) {
                            INFEASIBLE
                        } else {
                            rng.gen_range(-5.0..5.0)
                        }
                    })
                    .collect()
            };
            let a = mk(la, &mut rng);
            let b = mk(lb, &mut rng);
            assert_eq!(
                min_convolution(&a, &b),
                min_convolution_pruned(&a, &b),
                "pruned convolution must match naive entry for entry"
            );
        }
    }

    #[test]
    fn summation_oracle_two_pixel_example() {
        // n=2, k=1, target 1, λ = [(0,1),(0,0)]: feasible labelings are
        // (1,0) with ⟨λ,x⟩=1 and (0,1) with 0 → picks (0,1).
        let oracle = SummationOracle::new(2, 1, 1, ConvKind::Naive).unwrap();
        let (s, cost) = oracle.solve(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s, vec![0, 1]);
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn summation_oracle_extreme_targets() {
        let oracle = SummationOracle::new(3, 2, 0, ConvKind::Naive).unwrap();
        let (s, _) = oracle.solve(&[0.0; 9]).unwrap();
        assert_eq!(s, vec![0, 0, 0]);
        let oracle = SummationOracle::new(3, 2, 6, ConvKind::Naive).unwrap();
        let (s, _) = oracle.solve(&[0.0; 9]).unwrap();
        assert_eq!(s, vec![2, 2, 2]);
    }

    #[test]
    fn summation_oracle_rejects_unreachable_targets() {
        match SummationOracle::new(2, 1, 3, ConvKind::Naive) {
            Err(TomoError::InfeasibleRow { target: 3, pixels: 2, max_label: 1, .. }) => {}
            other => panic!("expected InfeasibleRow, got {:?}", other.err()),
        }
    }

    #[test]
    fn summation_oracle_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.gen_range(1..=6);
            let k = rng.gen_range(1..=3);
            let target = rng.gen_range(0..=n * k);
            let conv = if rng.gen_bool(0.5) {
                ConvKind::Naive
            } else {
                ConvKind::Pruned
            };
            let oracle = SummationOracle::new(n, k, target, conv).unwrap();
            for _ in 0..20 {
                let lambda: Vec<f64> = (0..oracle.arity())
                    .map(|_| rng.gen_range(-4.0..4.0))
                    .collect();
                let (s, cost) = oracle.solve(&lambda).unwrap();
                assert_eq!(cost, 0.0, "row terms have zero raw cost");
                let sum: u32 = s.iter().sum();
                assert_eq!(sum as usize, target, "labels must hit the target sum");
                // Enumerate all labelings with the required sum.
                let mut best = f64::INFINITY;
                let mut labeling = vec![0usize; n];
                loop {
                    if labeling.iter().sum::<usize>() == target {
                        let v: f64 = labeling
                            .iter()
                            .enumerate()
                            .map(|(p, &l)| lambda[p * (k + 1) + l])
                            .sum();
                        best = best.min(v);
                    }
                    let mut p = 0;
                    loop {
                        if p == n {
                            break;
                        }
                        labeling[p] += 1;
                        if labeling[p] <= k {
                            break;
                        }
                        labeling[p] = 0;
                        p += 1;
                    }
                    if p == n {
                        break;
                    }
                }
                let achieved = oracle.inner_product(&lambda, &s);
                assert!(
                    (achieved - best).abs() <= 1e-12 * (1.0 + best.abs()),
                    "partition DP {achieved} vs enumeration {best}"
                );
            }
        }
    }

    #[test]
    fn backtrack_ties_prefer_smaller_left_sums() {
        // All-zero multipliers leave every split tied; the smallest feasible
        // left sum must win at every node.  With n=3 (left pair, right leaf),
        // target 2, k=2: left sum can be 0..2; smallest feasible is 0 with
        // the right leaf absorbing 2.
        let oracle = SummationOracle::new(3, 2, 2, ConvKind::Naive).unwrap();
        let (s, _) = oracle.solve(&[0.0; 9]).unwrap();
        assert_eq!(s, vec![0, 0, 2]);
    }

    #[test]
    fn build_decomposition_covers_grid_and_rows() {
        let inst = TomographyInstance {
            height: 2,
            width: 2,
            max_label: 1,
            truncation: 1.0,
            rows: vec![
                ProjectionRow {
                    target: 1,
                    pixels: vec![0, 1],
                },
                ProjectionRow {
                    target: 2,
                    pixels: vec![2, 3],
                },
            ],
        };
        let (dec, enc) = build_tomography_decomposition(&inst, ConvKind::Naive).unwrap();
        // 2x2 grid has a 4-cycle: spanning tree + leftover edge + 2 rows.
        assert_eq!(dec.num_vars(), 8);
        assert_eq!(dec.num_terms(), 4);
        assert_eq!(enc.indicator(3, 1), 7);
        // Pixel 0 is covered by the spanning-tree term and the first row.
        assert!(dec.cover_count(enc.indicator(0, 0)) >= 2);
    }

    #[test]
    fn build_rejects_bad_rows() {
        let mut inst = TomographyInstance {
            height: 1,
            width: 2,
            max_label: 1,
            truncation: 1.0,
            rows: vec![ProjectionRow {
                target: 3,
                pixels: vec![0, 1],
            }],
        };
        match build_tomography_decomposition(&inst, ConvKind::Naive) {
            Err(TomoError::InfeasibleRow { target: 3, .. }) => {}
            other => panic!("expected InfeasibleRow, got {:?}", other.err()),
        }
        inst.rows = vec![ProjectionRow {
            target: 1,
            pixels: vec![0, 0],
        }];
        match build_tomography_decomposition(&inst, ConvKind::Naive) {
            Err(TomoError::BadRow { .. }) => {}
            other => panic!("expected BadRow, got {:?}", other.err()),
        }
    }
}
