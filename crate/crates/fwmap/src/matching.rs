//! Graph matching: injective node-to-label assignment with pairwise costs.
//!
//! An instance assigns each node one label from its allowed list, all chosen
//! labels pairwise distinct, minimizing assignment costs plus pairwise costs
//! on an edge set.  The decomposition keeps the pairwise structure in tree
//! terms (via the same forest machinery as MRFs) and concentrates the
//! injectivity constraint — together with all assignment costs — in a single
//! global term whose oracle is the Hungarian algorithm on a padded square
//! matrix.  Among equally cheap assignments the oracle returns the
//! lexicographically smallest one (node by node, lowest label id first),
//! extracted greedily from the tight graph of the optimal dual potentials.

use thiserror::Error;

use crate::model::{
    CompactLabeling, Decomposition, MinOracle, ModelError, OracleError, Term, INFEASIBLE,
    INFEASIBLE_THRESHOLD,
};
use crate::mrf::{forest_partition, BooleanEncoding, MrfError, TreeEdge, TreeOracle};

/// Pairwise cost table between two nodes' allowed-label lists.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchEdge {
    /// First node (always `< v`).
    pub u: usize,
    /// Second node.
    pub v: usize,
    /// Row-major table over allowed positions: entry for `u` taking its
    /// `pu`-th allowed label and `v` its `pv`-th is `table[pu * |allowed[v]| + pv]`.
    pub table: Vec<f64>,
}

/// A graph-matching instance.
///
/// `allowed[v]` lists node `v`'s candidate labels in ascending order and
/// `costs[v]` the matching assignment costs, position for position.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingInstance {
    /// Number of left nodes.
    pub num_nodes: usize,
    /// Number of labels (right nodes).
    pub num_labels: usize,
    /// Allowed label ids per node, ascending.
    pub allowed: Vec<Vec<usize>>,
    /// Assignment cost per allowed position.
    pub costs: Vec<Vec<f64>>,
    /// Pairwise cost tables, one per unordered node pair, `u < v`.
    pub edges: Vec<MatchEdge>,
}

/// Errors from matching validation and encoding.
#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    /// More nodes than labels: no injective assignment exists.
    #[error("no injective assignment: {nodes} nodes but only {labels} labels")]
    InfeasibleMatching { nodes: usize, labels: usize },
    /// A node with no allowed labels cannot be assigned.
    #[error("node {node} has no allowed labels")]
    EmptyDomain { node: usize },
    /// Tree-term construction failed.
    #[error(transparent)]
    Mrf(#[from] MrfError),
    /// Decomposition assembly failed.
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl MatchingInstance {
    /// Empty instance with `num_nodes` nodes and `num_labels` labels.
    pub fn new(num_nodes: usize, num_labels: usize) -> Self {
        MatchingInstance {
            num_nodes,
            num_labels,
            allowed: vec![Vec::new(); num_nodes],
            costs: vec![Vec::new(); num_nodes],
            edges: Vec::new(),
        }
    }

    /// Position of `label` in `allowed[node]`, if present.
    pub fn position(&self, node: usize, label: usize) -> Option<usize> {
        self.allowed[node].binary_search(&label).ok()
    }

    /// Allow `label` for `node` at the given assignment cost.  Lists stay
    /// sorted by label id; duplicates and out-of-range ids are rejected.
    pub fn add_assignment(&mut self, node: usize, label: usize, cost: f64) -> Result<(), String> {
        if node >= self.num_nodes {
            return Err(format!(
                "node {node} out of range ({} declared)",
                self.num_nodes
            ));
        }
        if label >= self.num_labels {
            return Err(format!(
                "label {label} out of range ({} declared)",
                self.num_labels
            ));
        }
        if !cost.is_finite() {
            return Err("assignment costs must be finite".into());
        }
        match self.allowed[node].binary_search(&label) {
            Ok(_) => Err(format!("label {label} already allowed for node {node}")),
            Err(pos) => {
                self.allowed[node].insert(pos, label);
                self.costs[node].insert(pos, cost);
                // Keep edge tables consistent: a new position shifts the
                // node's block, so pairwise costs must be added afterwards.
                for e in &self.edges {
                    assert!(
                        e.u != node && e.v != node,
                        "add all assignments of a node before its pairwise costs"
                    );
                }
                Ok(())
            }
        }
    }

    /// Accumulate a pairwise cost between `(u, label_u)` and `(v, label_v)`.
    /// Both assignments must already exist; `u` and `v` must differ.
    pub fn add_pairwise(
        &mut self,
        u: usize,
        label_u: usize,
        v: usize,
        label_v: usize,
        cost: f64,
    ) -> Result<(), String> {
        if u == v {
            return Err(format!("pairwise cost joins node {u} with itself"));
        }
        if !cost.is_finite() {
            return Err("pairwise costs must be finite".into());
        }
        // Normalize orientation to u < v.
        let (u, label_u, v, label_v) = if u < v {
            (u, label_u, v, label_v)
        } else {
            (v, label_v, u, label_u)
        };
        let pu = self
            .position(u, label_u)
            .ok_or_else(|| format!("label {label_u} is not allowed for node {u}"))?;
        let pv = self
            .position(v, label_v)
            .ok_or_else(|| format!("label {label_v} is not allowed for node {v}"))?;
        let len_v = self.allowed[v].len();
        if let Some(e) = self.edges.iter_mut().find(|e| e.u == u && e.v == v) {
            debug_assert_eq!(e.table.len(), self.allowed[u].len() * len_v);
            e.table[pu * len_v + pv] += cost;
        } else {
            let mut table = vec![0.0; self.allowed[u].len() * len_v];
            table[pu * len_v + pv] = cost;
            self.edges.push(MatchEdge { u, v, table });
        }
        Ok(())
    }

    /// Total energy of a full assignment given as one label id per node, or
    /// `None` if it is not an injective assignment of allowed labels.
    pub fn energy(&self, assignment: &[usize]) -> Option<f64> {
        if assignment.len() != self.num_nodes {
            return None;
        }
        let mut used = vec![false; self.num_labels];
        let mut positions = Vec::with_capacity(self.num_nodes);
        let mut total = 0.0;
        for (v, &l) in assignment.iter().enumerate() {
            if l >= self.num_labels || used[l] {
                return None;
            }
            used[l] = true;
            let pos = self.position(v, l)?;
            positions.push(pos);
            total += self.costs[v][pos];
        }
        for e in &self.edges {
            total += e.table[positions[e.u] * self.allowed[e.v].len() + positions[e.v]];
        }
        Some(total)
    }
}

/// Minimum-cost perfect matching on an `n × n` matrix by the O(n³)
/// potentials ("shortest augmenting path") Hungarian algorithm.
///
/// Returns the column matched to each row and the optimal dual potentials
/// `(u, v)`; every matched cell is tight (`cost − u − v = 0` up to rounding)
/// and all reduced costs are nonnegative.
pub fn hungarian(n: usize, cost: &dyn Fn(usize, usize) -> f64) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    assert!(n > 0, "empty assignment problem");
    let none = n;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j] = row matched to column j; index n is the virtual start column.
    let mut p = vec![none; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 0..n {
        p[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 0..n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            debug_assert!(delta.is_finite(), "cost matrix must be finite");
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == none {
                break;
            }
        }
        // Augment along the alternating path back to the virtual column.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    let mut row_to_col = vec![none; n];
    for j in 0..n {
        if p[j] != none {
            row_to_col[p[j]] = j;
        }
    }
    u.truncate(n);
    v.truncate(n);
    (row_to_col, u, v)
}

/// Augmenting-path search on the tight graph (Kuhn's algorithm step).
fn kuhn_augment(
    row: usize,
    adj: &[Vec<usize>],
    banned: &[bool],
    seen: &mut [bool],
    col_match: &mut [Option<usize>],
) -> bool {
    for &c in &adj[row] {
        if banned[c] || seen[c] {
            continue;
        }
        seen[c] = true;
        let free = match col_match[c] {
            None => true,
            Some(r) => kuhn_augment(r, adj, banned, seen, col_match),
        };
        if free {
            col_match[c] = Some(row);
            return true;
        }
    }
    false
}

/// Can `rows` be perfectly matched into non-banned columns of `adj`?
fn tight_matching_exists(rows: &[usize], adj: &[Vec<usize>], banned: &[bool]) -> bool {
    let n_cols = banned.len();
    let mut col_match = vec![None; n_cols];
    for &r in rows {
        let mut seen = vec![false; n_cols];
        if !kuhn_augment(r, adj, banned, &mut seen, &mut col_match) {
            return false;
        }
    }
    true
}

/// Exact min-oracle over injective assignments.
///
/// The compact labeling stores, per node, the *position* of its chosen label
/// in the node's allowed list; the raw cost is the sum of assignment costs.
pub struct AssignmentOracle {
    allowed: Vec<Vec<usize>>,
    costs: Vec<Vec<f64>>,
    num_labels: usize,
    offsets: Vec<usize>,
    arity: usize,
}

impl AssignmentOracle {
    /// Oracle over the instance's allowed lists and assignment costs.
    pub fn new(inst: &MatchingInstance) -> Result<Self, MatchError> {
        if inst.num_nodes > inst.num_labels {
            return Err(MatchError::InfeasibleMatching {
                nodes: inst.num_nodes,
                labels: inst.num_labels,
            });
        }
        if let Some(node) = (0..inst.num_nodes).find(|&v| inst.allowed[v].is_empty()) {
            return Err(MatchError::EmptyDomain { node });
        }
        let mut offsets = Vec::with_capacity(inst.num_nodes);
        let mut acc = 0;
        for v in 0..inst.num_nodes {
            offsets.push(acc);
            acc += inst.allowed[v].len();
        }
        Ok(AssignmentOracle {
            allowed: inst.allowed.clone(),
            costs: inst.costs.clone(),
            num_labels: inst.num_labels,
            offsets,
            arity: acc,
        })
    }

    /// Minimize `sign · (costs + λ)` over injective assignments; the
    /// returned raw cost is always the unsigned assignment cost.
    fn solve_signed(
        &self,
        lambda: &[f64],
        sign: f64,
    ) -> Result<(CompactLabeling, f64), OracleError> {
        debug_assert_eq!(lambda.len(), self.arity);
        let n = self.allowed.len();
        let size = self.num_labels;

        // Dense per-node rows over all labels; positions outside the allowed
        // list stay at the infeasibility sentinel.  Rows n.. are zero padding
        // so the matrix is square.
        let mut dense = vec![INFEASIBLE; n * size];
        let mut scale = 0.0f64;
        for v in 0..n {
            for (pos, &l) in self.allowed[v].iter().enumerate() {
                let c = sign * (self.costs[v][pos] + lambda[self.offsets[v] + pos]);
                dense[v * size + l] = c;
                scale = scale.max(c.abs());
            }
        }
        let entry = |i: usize, j: usize| -> f64 {
            if i < n {
                dense[i * size + j]
            } else {
                0.0
            }
        };
        let (row_to_col, pot_u, pot_v) = hungarian(size, &entry);

        let assigned: f64 = (0..n).map(|i| entry(i, row_to_col[i])).sum();
        if assigned >= INFEASIBLE_THRESHOLD {
            return Err(OracleError::Failure(format!(
                "allowed lists admit no injective assignment of {n} nodes"
            )));
        }

        // Tight graph of the optimal duals; every optimal assignment lives
        // here, so a greedy lexicographic extraction stays optimal as long
        // as the remaining rows can still be perfectly matched.
        let tol = 1e-9 * (1.0 + scale);
        let adj: Vec<Vec<usize>> = (0..size)
            .map(|i| {
                (0..size)
                    .filter(|&j| {
                        let c = entry(i, j);
                        c < INFEASIBLE_THRESHOLD && c - pot_u[i] - pot_v[j] <= tol
                    })
                    .collect()
            })
            .collect();
        let mut banned = vec![false; size];
        let mut labeling = vec![0u32; n];
        let mut raw = 0.0;
        for v in 0..n {
            let tail: Vec<usize> = (v + 1..size).collect();
            let mut chosen = None;
            for (pos, &l) in self.allowed[v].iter().enumerate() {
                if banned[l] || !adj[v].contains(&l) {
                    continue;
                }
                banned[l] = true;
                if tight_matching_exists(&tail, &adj, &banned) {
                    chosen = Some((pos, l));
                    break;
                }
                banned[l] = false;
            }
            let (pos, _) = chosen.ok_or_else(|| {
                OracleError::Failure("tight graph lost a perfect matching".into())
            })?;
            labeling[v] = pos as u32;
            raw += self.costs[v][pos];
        }
        Ok((labeling, raw))
    }
}

impl MinOracle for AssignmentOracle {
    fn arity(&self) -> usize {
        self.arity
    }

    fn compact_len(&self) -> usize {
        self.allowed.len()
    }

    fn solve(&self, lambda: &[f64]) -> Result<(CompactLabeling, f64), OracleError> {
        self.solve_signed(lambda, 1.0)
    }

    fn solve_max(&self, lambda: &[f64]) -> Result<(CompactLabeling, f64), OracleError> {
        self.solve_signed(lambda, -1.0)
    }

    fn decode(&self, s: &[u32], out: &mut [f64]) {
        debug_assert_eq!(s.len(), self.allowed.len());
        debug_assert_eq!(out.len(), self.arity);
        out.fill(0.0);
        for (v, &pos) in s.iter().enumerate() {
            out[self.offsets[v] + pos as usize] = 1.0;
        }
    }

    fn inner_product(&self, lambda: &[f64], s: &[u32]) -> f64 {
        s.iter()
            .enumerate()
            .map(|(v, &pos)| lambda[self.offsets[v] + pos as usize])
            .sum()
    }

    fn energy(&self, x: &[bool]) -> Option<f64> {
        let n = self.allowed.len();
        let mut used = vec![false; self.num_labels];
        let mut total = 0.0;
        for v in 0..n {
            let block = &x[self.offsets[v]..self.offsets[v] + self.allowed[v].len()];
            let mut pos = None;
            for (p, &bit) in block.iter().enumerate() {
                if bit {
                    if pos.is_some() {
                        return None;
                    }
                    pos = Some(p);
                }
            }
            let p = pos?;
            let l = self.allowed[v][p];
            if used[l] {
                return None;
            }
            used[l] = true;
            total += self.costs[v][p];
        }
        Some(total)
    }

    fn work(&self) -> u64 {
        let n = self.num_labels as u64;
        n * n * n + 1
    }
}

/// Assemble the matching decomposition: tree terms over the pairwise edge
/// graph (zero unaries) plus one global assignment term carrying all
/// assignment costs and the injectivity constraint.
///
/// Returns the decomposition and the indicator layout: variable
/// `enc.indicator(v, pos)` is "node `v` takes its `pos`-th allowed label".
pub fn build_matching_decomposition(
    inst: &MatchingInstance,
) -> Result<(Decomposition, BooleanEncoding), MatchError> {
    let assignment = AssignmentOracle::new(inst)?; // validates feasibility
    let n = inst.num_nodes;
    let block_sizes: Vec<usize> = inst.allowed.iter().map(Vec::len).collect();
    let enc = BooleanEncoding::new(&block_sizes);

    let pairs: Vec<(usize, usize)> = inst.edges.iter().map(|e| (e.u, e.v)).collect();
    let forests = forest_partition(n, &pairs);

    let mut terms = Vec::new();
    for forest in &forests {
        // Split the forest into its connected components.
        let mut comps: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        let mut dsu_roots: std::collections::BTreeMap<usize, usize> =
            std::collections::BTreeMap::new();
        let mut dsu = crate::mrf::Dsu::new(n);
        for &e in forest {
            dsu.union(pairs[e].0, pairs[e].1);
        }
        for &e in forest {
            let root = dsu.find(pairs[e].0);
            let c = *dsu_roots.entry(root).or_insert_with(|| {
                comps.push((Vec::new(), Vec::new()));
                comps.len() - 1
            });
            comps[c].1.push(e);
        }
        for v in 0..n {
            let root = dsu.find(v);
            if let Some(&c) = dsu_roots.get(&root) {
                comps[c].0.push(v);
            }
        }
        for (nodes, edge_ids) in comps {
            let local: std::collections::BTreeMap<usize, usize> =
                nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            let labels: Vec<usize> = nodes.iter().map(|&v| block_sizes[v]).collect();
            let unaries: Vec<Vec<f64>> = labels.iter().map(|&k| vec![0.0; k]).collect();
            let tree_edges: Vec<TreeEdge> = edge_ids
                .iter()
                .map(|&e| TreeEdge {
                    u: local[&inst.edges[e].u],
                    v: local[&inst.edges[e].v],
                    table: inst.edges[e].table.clone(),
                })
                .collect();
            let oracle = TreeOracle::new(labels, unaries, tree_edges)?;
            let mut map = Vec::new();
            for &v in &nodes {
                for pos in 0..block_sizes[v] {
                    map.push(enc.indicator(v, pos));
                }
            }
            terms.push(Term::new(map, Box::new(oracle)));
        }
    }

    // Global assignment term over every indicator, in (node, position) order.
    let map: Vec<usize> = (0..enc.num_vars()).collect();
    terms.push(Term::new(map, Box::new(assignment)));

    let dec = Decomposition::build(enc.num_vars(), terms)?;
    Ok((dec, enc))
}
