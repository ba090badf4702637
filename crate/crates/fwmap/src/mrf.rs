//! Pairwise MRFs decomposed into tree-structured terms.
//!
//! A labeling problem `min_x Σ_v θ_v(x_v) + Σ_{uv} θ_uv(x_u, x_v)` over a
//! general graph is turned into a Boolean energy by one-hot encoding every
//! node (`x_{v;a} = 1` iff node `v` takes label `a`) and into a decomposition
//! by covering the edge set with forests ([`forest_partition`]): each
//! connected component of each forest becomes one term whose oracle runs
//! exact dynamic programming over the tree ([`TreeOracle`]).  Pairwise
//! tables go wholly to the term owning the edge; every unary is split
//! equally among the terms containing its node, so the term energies sum
//! back to the original objective for every full labeling.

use thiserror::Error;

use crate::model::{
    CompactLabeling, Decomposition, MinOracle, ModelError, OracleError, Term,
};

/// One pairwise factor; `table` is row-major `|X_u| × |X_v|`.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfEdge {
    /// First endpoint (row index of the table).
    pub u: usize,
    /// Second endpoint (column index of the table).
    pub v: usize,
    /// Energies `θ_uv(a, b)` at `table[a * |X_v| + b]`.
    pub table: Vec<f64>,
}

/// A pairwise MRF in minimization convention.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfInstance {
    /// Label-space size per node (all at least 1).
    pub num_labels: Vec<usize>,
    /// Unary energies per node (`unaries[v].len() == num_labels[v]`).
    pub unaries: Vec<Vec<f64>>,
    /// Pairwise factors; at most one per unordered node pair.
    pub edges: Vec<MrfEdge>,
}

/// Errors from MRF validation and encoding.
#[derive(Debug, Error, PartialEq)]
pub enum MrfError {
    /// A unary table does not match its node's label count.
    #[error("node {node}: unary table has {got} entries for {expected} labels")]
    UnaryShape {
        node: usize,
        got: usize,
        expected: usize,
    },
    /// A pairwise table does not match its endpoints' label counts.
    #[error("edge ({u},{v}): table has {got} entries, expected {expected}")]
    EdgeShape {
        u: usize,
        v: usize,
        got: usize,
        expected: usize,
    },
    /// An edge endpoint is out of range.
    #[error("edge endpoint {node} out of range for {num_nodes} nodes")]
    NodeRange { node: usize, num_nodes: usize },
    /// An edge joins a node with itself.
    #[error("edge ({u},{u}) joins a node with itself")]
    SelfLoop { u: usize },
    /// Two edges cover the same unordered node pair.
    #[error("duplicate edge between {u} and {v}")]
    DuplicateEdge { u: usize, v: usize },
    /// A node has an empty label space.
    #[error("node {node} has an empty label space")]
    EmptyLabelSpace { node: usize },
    /// Term edges passed to [`TreeOracle::new`] do not form a spanning tree.
    #[error("term edges do not form a spanning tree: {0}")]
    NotATree(String),
    /// Decomposition assembly failed.
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl MrfInstance {
    /// Number of nodes.
    pub fn num_nodes(&self) -> usize {
        self.num_labels.len()
    }

    /// Check table shapes, edge ranges and pairwise uniqueness.
    pub fn validate(&self) -> Result<(), MrfError> {
        let n = self.num_nodes();
        if self.unaries.len() != n {
            return Err(MrfError::UnaryShape {
                node: self.unaries.len().min(n),
                got: self.unaries.len(),
                expected: n,
            });
        }
        for (v, k) in self.num_labels.iter().enumerate() {
            if *k == 0 {
                return Err(MrfError::EmptyLabelSpace { node: v });
            }
            if self.unaries[v].len() != *k {
                return Err(MrfError::UnaryShape {
                    node: v,
                    got: self.unaries[v].len(),
                    expected: *k,
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            for &node in &[e.u, e.v] {
                if node >= n {
                    return Err(MrfError::NodeRange { node, num_nodes: n });
                }
            }
            if e.u == e.v {
                return Err(MrfError::SelfLoop { u: e.u });
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            if !seen.insert(key) {
                return Err(MrfError::DuplicateEdge { u: key.0, v: key.1 });
            }
            let expected = self.num_labels[e.u] * self.num_labels[e.v];
            if e.table.len() != expected {
                return Err(MrfError::EdgeShape {
                    u: e.u,
                    v: e.v,
                    got: e.table.len(),
                    expected,
                });
            }
        }
        Ok(())
    }

    /// Energy of a full labeling (one label per node).
    pub fn energy(&self, labeling: &[usize]) -> f64 {
        debug_assert_eq!(labeling.len(), self.num_nodes());
        let mut e = 0.0;
        for (v, &a) in labeling.iter().enumerate() {
            e += self.unaries[v][a];
        }
        for edge in &self.edges {
            e += edge.table[labeling[edge.u] * self.num_labels[edge.v] + labeling[edge.v]];
        }
        e
    }
}

/// Disjoint-set forest used by the partition and component sweeps.
pub struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    /// `n` singleton sets.
    pub fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    /// Representative of `x`'s set, with path compression.
    pub fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }

    /// Merge the sets of `a` and `b`; `false` if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Cover the edge set with as few forests as greed allows: repeatedly take a
/// maximal spanning forest of the remaining edges (in input order) until
/// none remain.  Returns edge-index lists, each acyclic by construction.
///
/// A tree or path yields a single forest; a triangle yields two; a 4-cycle
/// yields a spanning tree plus one single-edge forest.
pub fn forest_partition(num_nodes: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..edges.len()).collect();
    let mut forests = Vec::new();
    while !remaining.is_empty() {
        let mut dsu = Dsu::new(num_nodes);
        let mut forest = Vec::new();
        let mut leftover = Vec::new();
        for &e in &remaining {
            let (u, v) = edges[e];
            if dsu.union(u, v) {
                forest.push(e);
            } else {
                leftover.push(e);
            }
        }
        forests.push(forest);
        remaining = leftover;
    }
    forests
}

/// One-hot indicator layout for a labeled graph: node `v`'s label `a` maps
/// to the global Boolean coordinate `offsets[v] + a`.
#[derive(Debug, Clone)]
pub struct BooleanEncoding {
    /// Per-node block start.
    pub offsets: Vec<usize>,
    /// Per-node label count (block length).
    pub num_labels: Vec<usize>,
}

impl BooleanEncoding {
    /// Contiguous blocks in node order.
    pub fn new(num_labels: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(num_labels.len());
        let mut acc = 0;
        for &k in num_labels {
            offsets.push(acc);
            acc += k;
        }
        BooleanEncoding {
            offsets,
            num_labels: num_labels.to_vec(),
        }
    }

    /// Total Boolean coordinates `d = Σ_v |X_v|`.
    pub fn num_vars(&self) -> usize {
        self.offsets.last().map_or(0, |&o| o) + self.num_labels.last().copied().unwrap_or(0)
    }

    /// Global coordinate of indicator `x_{v;a}`.
    pub fn indicator(&self, v: usize, a: usize) -> usize {
        debug_assert!(a < self.num_labels[v]);
        self.offsets[v] + a
    }
}

/// Edge of a tree term, in term-local node indices.
#[derive(Debug, Clone)]
pub struct TreeEdge {
    /// Local index of the row endpoint.
    pub u: usize,
    /// Local index of the column endpoint.
    pub v: usize,
    /// Energies, row-major `|X_u| × |X_v|`.
    pub table: Vec<f64>,
}

/// Exact min-oracle for a tree-structured MRF term.
///
/// `solve` runs one leaf-to-root sweep of dynamic programming followed by a
/// root-to-leaf backtrack; ties are broken toward the lowest label index at
/// every argmin.  The compact encoding is one label per local node, so
/// cached planes cost one table lookup per node to score.
pub struct TreeOracle {
    labels: Vec<usize>,
    offsets: Vec<usize>,
    arity: usize,
    unaries: Vec<Vec<f64>>,
    edges: Vec<TreeEdge>,
    /// BFS order from the root (parents before children).
    order: Vec<usize>,
    /// For each non-root node: (parent, edge index, `true` if the edge is
    /// stored with the parent as row endpoint).
    parent: Vec<Option<(usize, usize, bool)>>,
}

impl TreeOracle {
    /// Build the oracle for a tree with the given per-node label counts,
    /// unary tables and edges.  The edges must form a spanning tree of the
    /// local nodes (a single node with no edges is the smallest tree).
    pub fn new(
        labels: Vec<usize>,
        unaries: Vec<Vec<f64>>,
        edges: Vec<TreeEdge>,
    ) -> Result<Self, MrfError> {
        let n = labels.len();
        assert!(n > 0, "a tree term needs at least one node");
        assert_eq!(unaries.len(), n, "one unary table per node");
        for (v, u) in unaries.iter().enumerate() {
            assert_eq!(u.len(), labels[v], "unary table shape");
        }
        if edges.len() + 1 != n {
            return Err(MrfError::NotATree(format!(
                "{} edges for {} nodes",
                edges.len(),
                n
            )));
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (e, edge) in edges.iter().enumerate() {
            assert_eq!(
                edge.table.len(),
                labels[edge.u] * labels[edge.v],
                "pairwise table shape"
            );
            adj[edge.u].push((edge.v, e));
            adj[edge.v].push((edge.u, e));
        }
        let mut order = Vec::with_capacity(n);
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(0);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(w, e) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((v, e, edges[e].u == v));
                    queue.push_back(w);
                }
            }
        }
        if order.len() != n {
            return Err(MrfError::NotATree("edge set is disconnected".into()));
        }
        let mut offsets = Vec::with_capacity(n);
        let mut arity = 0;
        for &k in &labels {
            offsets.push(arity);
            arity += k;
        }
        Ok(TreeOracle {
            labels,
            offsets,
            arity,
            unaries,
            edges,
            order,
            parent,
        })
    }

    /// Number of local nodes.
    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Raw term energy of one local labeling.
    fn labeling_cost(&self, labeling: &[u32]) -> f64 {
        let mut cost = 0.0;
        for (v, &a) in labeling.iter().enumerate() {
            cost += self.unaries[v][a as usize];
        }
        for e in &self.edges {
            cost +=
                e.table[labeling[e.u] as usize * self.labels[e.v] + labeling[e.v] as usize];
        }
        cost
    }

    /// Shared body of `solve` / `solve_max`: `minimize = true` picks minima.
    fn sweep(&self, lambda: &[f64], minimize: bool) -> (CompactLabeling, f64) {
        let n = self.num_nodes();
        // Node beliefs: unary + λ block, then accumulated child messages.
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|v| {
                (0..self.labels[v])
                    .map(|a| self.unaries[v][a] + lambda[self.offsets[v] + a])
                    .collect()
            })
            .collect();
        // Children precede parents in reversed BFS order.
        for idx in (0..n).rev() {
            let v = self.order[idx];
            let Some((p, e, parent_is_row)) = self.parent[v] else {
                continue;
            };
            let table = &self.edges[e].table;
            let (kp, kv) = (self.labels[p], self.labels[v]);
            for a in 0..kp {
                let mut best = if minimize {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                };
                for b in 0..kv {
                    let t = if parent_is_row {
                        table[a * kv + b]
                    } else {
                        table[b * kp + a]
                    };
                    let cand = t + m[v][b];
                    if (minimize && cand < best) || (!minimize && cand > best) {
                        best = cand;
                    }
                }
                m[p][a] += best;
            }
        }
        // Backtrack root-to-leaves, lowest label index on ties.
        let pick = |scores: &dyn Fn(usize) -> f64, k: usize| -> usize {
            let mut best = 0;
            let mut best_v = scores(0);
            for b in 1..k {
                let v = scores(b);
                if (minimize && v < best_v) || (!minimize && v > best_v) {
                    best = b;
                    best_v = v;
                }
            }
            best
        };
        let mut labeling = vec![0u32; n];
        let root = self.order[0];
        labeling[root] = pick(&|a| m[root][a], self.labels[root]) as u32;
        for idx in 1..n {
            let v = self.order[idx];
            let (p, e, parent_is_row) = self.parent[v].expect("non-root node has a parent");
            let a = labeling[p] as usize;
            let table = &self.edges[e].table;
            let (kp, kv) = (self.labels[p], self.labels[v]);
            labeling[v] = pick(
                &|b| {
                    let t = if parent_is_row {
                        table[a * kv + b]
                    } else {
                        table[b * kp + a]
                    };
                    t + m[v][b]
                },
                kv,
            ) as u32;
        }
        let cost = self.labeling_cost(&labeling);
        (labeling, cost)
    }
}

impl MinOracle for TreeOracle {
    fn arity(&self) -> usize {
        self.arity
    }

    fn compact_len(&self) -> usize {
        self.num_nodes()
    }

    fn solve(&self, lambda: &[f64]) -> Result<(CompactLabeling, f64), OracleError> {
        debug_assert_eq!(lambda.len(), self.arity);
        Ok(self.sweep(lambda, true))
    }

    fn solve_max(&self, lambda: &[f64]) -> Result<(CompactLabeling, f64), OracleError> {
        debug_assert_eq!(lambda.len(), self.arity);
        Ok(self.sweep(lambda, false))
    }

    fn decode(&self, s: &[u32], out: &mut [f64]) {
        debug_assert_eq!(s.len(), self.num_nodes());
        debug_assert_eq!(out.len(), self.arity);
        out.fill(0.0);
        for (v, &a) in s.iter().enumerate() {
            out[self.offsets[v] + a as usize] = 1.0;
        }
    }

    fn inner_product(&self, lambda: &[f64], s: &[u32]) -> f64 {
        s.iter()
            .enumerate()
            .map(|(v, &a)| lambda[self.offsets[v] + a as usize])
            .sum()
    }

    fn energy(&self, x: &[bool]) -> Option<f64> {
        debug_assert_eq!(x.len(), self.arity);
        let mut labeling = vec![0u32; self.num_nodes()];
        for v in 0..self.num_nodes() {
            let block = &x[self.offsets[v]..self.offsets[v] + self.labels[v]];
            let mut label = None;
            for (a, &bit) in block.iter().enumerate() {
                if bit {
                    if label.is_some() {
                        return None; // not one-hot
                    }
                    label = Some(a);
                }
            }
            labeling[v] = label? as u32;
        }
        Some(self.labeling_cost(&labeling))
    }

    fn work(&self) -> u64 {
        let unary: usize = self.labels.iter().sum();
        let pairwise: usize = self
            .edges
            .iter()
            .map(|e| self.labels[e.u] * self.labels[e.v])
            .sum();
        (unary + pairwise + 1) as u64
    }
}

/// Encode an MRF over the given forests into a Boolean decomposition.
///
/// Every connected component of every forest becomes one term; nodes
/// untouched by any edge become single-node terms.  Unaries are split
/// equally among the terms containing the node; each pairwise table goes to
/// the unique term owning its edge.
pub fn encode_mrf(
    inst: &MrfInstance,
    forests: &[Vec<usize>],
) -> Result<(Decomposition, BooleanEncoding), MrfError> {
    inst.validate()?;
    let n = inst.num_nodes();
    let enc = BooleanEncoding::new(&inst.num_labels);

    // Components of each forest, as (sorted nodes, edge indices).
    let mut components: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut edge_used = vec![false; inst.edges.len()];
    for forest in forests {
        let mut dsu = Dsu::new(n);
        for &e in forest {
            assert!(!edge_used[e], "edge {e} listed in two forests");
            edge_used[e] = true;
            let edge = &inst.edges[e];
            let fresh = dsu.union(edge.u, edge.v);
            assert!(fresh, "forest {forest:?} contains a cycle through edge {e}");
        }
        let mut by_root: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> =
            std::collections::BTreeMap::new();
        for &e in forest {
            let edge = &inst.edges[e];
            let root = dsu.find(edge.u);
            by_root.entry(root).or_default().1.push(e);
        }
        for v in 0..n {
            let root = dsu.find(v);
            if let Some(entry) = by_root.get_mut(&root) {
                entry.0.push(v);
            }
        }
        components.extend(by_root.into_values());
    }
    // Nodes with no incident edge anywhere become singleton terms.
    let mut touched = vec![false; n];
    for e in &inst.edges {
        touched[e.u] = true;
        touched[e.v] = true;
    }
    for v in 0..n {
        if !touched[v] {
            components.push((vec![v], Vec::new()));
        }
    }

    let mut cover = vec![0usize; n];
    for (nodes, _) in &components {
        for &v in nodes {
            cover[v] += 1;
        }
    }
    debug_assert!(cover.iter().all(|&c| c >= 1), "every node is in some term");

    let mut terms = Vec::with_capacity(components.len());
    for (nodes, edge_ids) in &components {
        let mut local_of = std::collections::HashMap::new();
        for (j, &v) in nodes.iter().enumerate() {
            local_of.insert(v, j);
        }
        let labels: Vec<usize> = nodes.iter().map(|&v| inst.num_labels[v]).collect();
        let unaries: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&v| {
                let share = cover[v] as f64;
                inst.unaries[v].iter().map(|&u| u / share).collect()
            })
            .collect();
        let edges: Vec<TreeEdge> = edge_ids
            .iter()
            .map(|&e| {
                let edge = &inst.edges[e];
                TreeEdge {
                    u: local_of[&edge.u],
                    v: local_of[&edge.v],
                    table: edge.table.clone(),
                }
            })
            .collect();
        let oracle = TreeOracle::new(labels, unaries, edges)?;
        let mut map = Vec::with_capacity(oracle.arity());
        for &v in nodes {
            for a in 0..inst.num_labels[v] {
                map.push(enc.indicator(v, a));
            }
        }
        terms.push(Term::new(map, Box::new(oracle)));
    }
    let dec = Decomposition::build(enc.num_vars(), terms)?;
    Ok((dec, enc))
}

/// Partition the edges into forests and encode: the one-call path from an
/// MRF instance to a solver-ready decomposition.
pub fn build_mrf_decomposition(
    inst: &MrfInstance,
) -> Result<(Decomposition, BooleanEncoding), MrfError> {
    inst.validate()?;
    let edge_list: Vec<(usize, usize)> = inst.edges.iter().map(|e| (e.u, e.v)).collect();
    let forests = forest_partition(inst.num_nodes(), &edge_list);
    encode_mrf(inst, &forests)
}
