//! Instance parsers, the trace writer and the command-line run
//! configuration.
//!
//! Three plain-text instance formats are supported, one per structured
//! application:
//!
//! * pairwise MRFs in UAI-style `MARKOV` files ([`parse_mrf`]);
//! * discrete tomography: a `TOMO` header followed by `ROW` projection lines
//!   ([`parse_tomography`]);
//! * graph matching in the `p`/`a`/`e` assignment-list format
//!   ([`parse_graph_matching`]).
//!
//! All parsers take the whole file as a string, report errors with 1-based
//! line numbers and reject trailing garbage.  Each has a matching serializer
//! so that parse → write → parse is the identity on shipped fixtures.
//!
//! Solver progress is logged as one [`TraceRecord`] per dual evaluation and
//! written as CSV with 17-significant-digit floats ([`write_trace`]), enough
//! to round-trip `f64` exactly.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::matching::MatchingInstance;
use crate::mrf::{MrfEdge, MrfInstance};
use crate::tomography::{ProjectionRow, TomographyInstance};

/// Errors from the instance parsers.
#[derive(Debug, Error, PartialEq)]
pub enum IoError {
    /// Malformed input; `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// A factor has an unsupported arity (only 1 and 2 are allowed).
    #[error("line {line}: factor arity {arity} not supported (only 1 and 2)")]
    Arity { line: usize, arity: usize },
    /// A projection row demands a sum outside `[0, n·k]`.
    #[error("line {line}: row target {target} infeasible for {pixels} pixels with labels 0..={max_label}")]
    InfeasibleRow {
        line: usize,
        target: i64,
        pixels: usize,
        max_label: usize,
    },
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T, IoError> {
    Err(IoError::Parse {
        line,
        msg: msg.into(),
    })
}

/// Whitespace tokenizer that remembers the line each token came from.
struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            for tok in line.split_whitespace() {
                items.push((ln + 1, tok));
            }
        }
        Tokens { items, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.items.last().map_or(1, |(ln, _)| *ln)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), IoError> {
        if self.pos < self.items.len() {
            let it = self.items[self.pos];
            self.pos += 1;
            Ok(it)
        } else {
            perr(self.last_line(), format!("unexpected end of file, expected {what}"))
        }
    }

    fn parse<T: FromStr>(&mut self, what: &str) -> Result<(usize, T), IoError> {
        let (line, tok) = self.next(what)?;
        match tok.parse::<T>() {
            Ok(v) => Ok((line, v)),
            Err(_) => perr(line, format!("expected {what}, found {tok:?}")),
        }
    }

    fn expect_end(&mut self) -> Result<(), IoError> {
        if self.pos < self.items.len() {
            let (line, tok) = self.items[self.pos];
            return perr(line, format!("trailing garbage starting at {tok:?}"));
        }
        Ok(())
    }
}

/// Parse a pairwise MRF from the UAI `MARKOV` format (minimization
/// convention: table entries are energies, lower is better).
///
/// Only unary and pairwise factors are accepted; higher arities raise
/// [`IoError::Arity`].  Repeated factors over the same scope are summed.
pub fn parse_mrf(text: &str) -> Result<MrfInstance, IoError> {
    let mut tk = Tokens::new(text);
    let (line, magic) = tk.next("the MARKOV header")?;
    if magic != "MARKOV" {
        return perr(line, format!("expected MARKOV header, found {magic:?}"));
    }
    let (_, num_nodes) = tk.parse::<usize>("the variable count")?;
    let mut num_labels = Vec::with_capacity(num_nodes);
    for _ in 0..num_nodes {
        let (line, k) = tk.parse::<usize>("a domain size")?;
        if k == 0 {
            return perr(line, "domain size must be positive");
        }
        num_labels.push(k);
    }
    let (_, num_factors) = tk.parse::<usize>("the factor count")?;
    let mut scopes: Vec<(usize, Vec<usize>)> = Vec::with_capacity(num_factors);
    for _ in 0..num_factors {
        let (line, arity) = tk.parse::<usize>("a factor arity")?;
        if arity != 1 && arity != 2 {
            return Err(IoError::Arity { line, arity });
        }
        let mut scope = Vec::with_capacity(arity);
        for _ in 0..arity {
            let (line, v) = tk.parse::<usize>("a scope variable")?;
            if v >= num_nodes {
                return perr(line, format!("variable {v} out of range ({num_nodes} declared)"));
            }
            scope.push(v);
        }
        if arity == 2 && scope[0] == scope[1] {
            return perr(line, format!("factor scope repeats variable {}", scope[0]));
        }
        scopes.push((line, scope));
    }
    let mut unaries: Vec<Vec<f64>> = num_labels.iter().map(|&k| vec![0.0; k]).collect();
    let mut edges: Vec<MrfEdge> = Vec::new();
    for (scope_line, scope) in scopes {
        let expected: usize = scope.iter().map(|&v| num_labels[v]).product();
        let (line, count) = tk.parse::<usize>("a table size")?;
        if count != expected {
            return perr(
                line,
                format!("table size {count} does not match scope (expected {expected})"),
            );
        }
        let mut table = Vec::with_capacity(count);
        for _ in 0..count {
            let (line, v) = tk.parse::<f64>("a table entry")?;
            if !v.is_finite() {
                return perr(line, "table entries must be finite");
            }
            table.push(v);
        }
        match scope.as_slice() {
            [v] => {
                for (a, e) in unaries[*v].iter_mut().zip(&table) {
                    *a += e;
                }
            }
            [u, v] => {
                // Sum into an existing edge over the same unordered pair,
                // transposing when the stored orientation differs.
                let (ku, kv) = (num_labels[*u], num_labels[*v]);
                if let Some(edge) = edges
                    .iter_mut()
                    .find(|e| (e.u, e.v) == (*u, *v) || (e.u, e.v) == (*v, *u))
                {
                    if (edge.u, edge.v) == (*u, *v) {
                        for (a, e) in edge.table.iter_mut().zip(&table) {
                            *a += e;
                        }
                    } else {
                        for a in 0..ku {
                            for b in 0..kv {
                                edge.table[b * ku + a] += table[a * kv + b];
                            }
                        }
                    }
                } else {
                    edges.push(MrfEdge {
                        u: *u,
                        v: *v,
                        table,
                    });
                }
            }
            _ => unreachable!("arity checked above at line {scope_line}"),
        }
    }
    tk.expect_end()?;
    Ok(MrfInstance {
        num_labels,
        unaries,
        edges,
    })
}

/// Serialize an MRF back to the UAI `MARKOV` format (one unary factor per
/// node, one pairwise factor per edge).
pub fn write_mrf(inst: &MrfInstance) -> String {
    let mut out = String::from("MARKOV\n");
    let n = inst.num_nodes();
    let _ = writeln!(out, "{n}");
    let sizes: Vec<String> = inst.num_labels.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let _ = writeln!(out, "{}", n + inst.edges.len());
    for v in 0..n {
        let _ = writeln!(out, "1 {v}");
    }
    for e in &inst.edges {
        let _ = writeln!(out, "2 {} {}", e.u, e.v);
    }
    for v in 0..n {
        let _ = writeln!(out, "{}", inst.unaries[v].len());
        let _ = writeln!(out, "{}", join_floats(&inst.unaries[v]));
    }
    for e in &inst.edges {
        let _ = writeln!(out, "{}", e.table.len());
        let _ = writeln!(out, "{}", join_floats(&e.table));
    }
    out
}

/// Parse a discrete-tomography instance:
///
/// ```text
/// TOMO <height> <width> <max_label> <truncation>
/// ROW <target> <n> <pixel_1> … <pixel_n>
/// ...
/// ```
///
/// Pixels are row-major indices into the grid.  A file with no `ROW` lines
/// is a plain smoothness-only MRF.
pub fn parse_tomography(text: &str) -> Result<TomographyInstance, IoError> {
    let mut tk = Tokens::new(text);
    let (line, magic) = tk.next("the TOMO header")?;
    if magic != "TOMO" {
        return perr(line, format!("expected TOMO header, found {magic:?}"));
    }
    let (line, height) = tk.parse::<usize>("the grid height")?;
    let (_, width) = tk.parse::<usize>("the grid width")?;
    if height == 0 || width == 0 {
        return perr(line, "grid dimensions must be positive");
    }
    let (_, max_label) = tk.parse::<usize>("the maximum label")?;
    let (line, truncation) = tk.parse::<f64>("the truncation threshold")?;
    if !truncation.is_finite() || truncation < 0.0 {
        return perr(line, "truncation threshold must be finite and non-negative");
    }
    let mut rows = Vec::new();
    while tk.pos < tk.items.len() {
        let (line, word) = tk.next("a ROW line")?;
        if word != "ROW" {
            return perr(line, format!("trailing garbage starting at {word:?}"));
        }
        let (tline, target) = tk.parse::<i64>("a row target")?;
        let (line, n) = tk.parse::<usize>("a pixel count")?;
        if n == 0 {
            return perr(line, "a projection row needs at least one pixel");
        }
        let mut pixels = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, p) = tk.parse::<usize>("a pixel index")?;
            if p >= height * width {
                return perr(line, format!("pixel {p} outside the {height}x{width} grid"));
            }
            if pixels.contains(&p) {
                return perr(line, format!("pixel {p} repeated within one row"));
            }
            pixels.push(p);
        }
        if target < 0 || target as usize > n * max_label {
            return Err(IoError::InfeasibleRow {
                line: tline,
                target,
                pixels: n,
                max_label,
            });
        }
        rows.push(ProjectionRow {
            target: target as usize,
            pixels,
        });
    }
    tk.expect_end()?;
    Ok(TomographyInstance {
        height,
        width,
        max_label,
        truncation,
        rows,
    })
}

/// Serialize a tomography instance to the `TOMO`/`ROW` format.
pub fn write_tomography(inst: &TomographyInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "TOMO {} {} {} {}",
        inst.height,
        inst.width,
        inst.max_label,
        fmt_float(inst.truncation)
    );
    for row in &inst.rows {
        let pix: Vec<String> = row.pixels.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "ROW {} {} {}", row.target, row.pixels.len(), pix.join(" "));
    }
    out
}

/// Parse a graph-matching instance in the assignment-list format:
///
/// ```text
/// p <nodes> <labels> <assignments> <edges>
/// a <id> <node> <label> <cost>      (one per admissible assignment)
/// e <id1> <id2> <cost>              (pairwise cost between two assignments)
/// ```
///
/// Lines starting with `c` are comments.  Assignment ids must be unique and
/// `e` lines must reference declared ids on two distinct nodes.
pub fn parse_graph_matching(text: &str) -> Result<MatchingInstance, IoError> {
    struct Assign {
        node: usize,
        label: usize,
    }
    let mut header: Option<(usize, usize, usize, usize)> = None;
    let mut assigns: Vec<Option<Assign>> = Vec::new();
    let mut a_seen = 0usize;
    let mut e_seen = 0usize;
    let mut a_entries: Vec<(usize, usize, usize, f64)> = Vec::new(); // line, node, label, cost
    let mut e_entries: Vec<(usize, usize, usize, f64)> = Vec::new(); // line, id1, id2, cost
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let mut it = raw.split_whitespace();
        let Some(head) = it.next() else { continue };
        match head {
            "c" => continue,
            "p" => {
                if header.is_some() {
                    return perr(line, "duplicate p line");
                }
                let mut num = |what: &str| -> Result<usize, IoError> {
                    match it.next() {
                        Some(tok) => tok
                            .parse()
                            .map_err(|_| IoError::Parse {
                                line,
                                msg: format!("expected {what}, found {tok:?}"),
                            }),
                        None => perr(line, format!("missing {what} on p line")),
                    }
                };
                let n0 = num("the node count")?;
                let n1 = num("the label count")?;
                let na = num("the assignment count")?;
                let ne = num("the edge count")?;
                if let Some(tok) = it.next() {
                    return perr(line, format!("trailing garbage starting at {tok:?}"));
                }
                header = Some((n0, n1, na, ne));
            }
            "a" | "e" => {
                let Some((n0, n1, _, _)) = header else {
                    return perr(line, "a/e line before the p header");
                };
                let mut num = |what: &str| -> Result<usize, IoError> {
                    match it.next() {
                        Some(tok) => tok.parse().map_err(|_| IoError::Parse {
                            line,
                            msg: format!("expected {what}, found {tok:?}"),
                        }),
                        None => perr(line, format!("missing {what}")),
                    }
                };
                if head == "a" {
                    let id = num("an assignment id")?;
                    let node = num("a node index")?;
                    let label = num("a label index")?;
                    if node >= n0 {
                        return perr(line, format!("node {node} out of range ({n0} declared)"));
                    }
                    if label >= n1 {
                        return perr(line, format!("label {label} out of range ({n1} declared)"));
                    }
                    let cost: f64 = match it.next() {
                        Some(tok) => tok.parse().map_err(|_| IoError::Parse {
                            line,
                            msg: format!("expected a cost, found {tok:?}"),
                        })?,
                        None => return perr(line, "missing a cost"),
                    };
                    if !cost.is_finite() {
                        return perr(line, "assignment costs must be finite");
                    }
                    if let Some(tok) = it.next() {
                        return perr(line, format!("trailing garbage starting at {tok:?}"));
                    }
                    if assigns.len() <= id {
                        assigns.resize_with(id + 1, || None);
                    }
                    if assigns[id].is_some() {
                        return perr(line, format!("duplicate assignment id {id}"));
                    }
                    assigns[id] = Some(Assign { node, label });
                    a_entries.push((line, node, label, cost));
                    a_seen += 1;
                } else {
                    let id1 = num("an assignment id")?;
                    let id2 = num("an assignment id")?;
                    let cost: f64 = match it.next() {
                        Some(tok) => tok.parse().map_err(|_| IoError::Parse {
                            line,
                            msg: format!("expected a cost, found {tok:?}"),
                        })?,
                        None => return perr(line, "missing a cost"),
                    };
                    if !cost.is_finite() {
                        return perr(line, "edge costs must be finite");
                    }
                    if let Some(tok) = it.next() {
                        return perr(line, format!("trailing garbage starting at {tok:?}"));
                    }
                    e_entries.push((line, id1, id2, cost));
                    e_seen += 1;
                }
            }
            other => {
                return perr(line, format!("trailing garbage starting at {other:?}"));
            }
        }
    }
    let Some((n0, n1, na, ne)) = header else {
        return perr(1, "missing p header line");
    };
    if a_seen != na {
        return perr(
            1,
            format!("p line declares {na} assignments but {a_seen} were given"),
        );
    }
    if e_seen != ne {
        return perr(1, format!("p line declares {ne} edges but {e_seen} were given"));
    }
    let mut inst = MatchingInstance::new(n0, n1);
    for (line, node, label, cost) in a_entries {
        inst.add_assignment(node, label, cost)
            .map_err(|msg| IoError::Parse { line, msg })?;
    }
    for (line, id1, id2, cost) in e_entries {
        let a1 = assigns
            .get(id1)
            .and_then(Option::as_ref)
            .ok_or_else(|| IoError::Parse {
                line,
                msg: format!("edge references unknown assignment id {id1}"),
            })?;
        let a2 = assigns
            .get(id2)
            .and_then(Option::as_ref)
            .ok_or_else(|| IoError::Parse {
                line,
                msg: format!("edge references unknown assignment id {id2}"),
            })?;
        if a1.node == a2.node {
            return perr(
                line,
                format!("edge joins two assignments of the same node {}", a1.node),
            );
        }
        inst.add_pairwise(a1.node, a1.label, a2.node, a2.label, cost)
            .map_err(|msg| IoError::Parse { line, msg })?;
    }
    Ok(inst)
}

/// Serialize a matching instance to the `p`/`a`/`e` format, numbering
/// assignments in (node, label) order.
pub fn write_graph_matching(inst: &MatchingInstance) -> String {
    let mut out = String::new();
    let mut ids = vec![Vec::new(); inst.num_nodes];
    let mut next = 0usize;
    let mut a_lines = String::new();
    for v in 0..inst.num_nodes {
        for (pos, &label) in inst.allowed[v].iter().enumerate() {
            let _ = writeln!(
                a_lines,
                "a {next} {v} {label} {}",
                fmt_float(inst.costs[v][pos])
            );
            ids[v].push(next);
            next += 1;
        }
    }
    let mut e_lines = String::new();
    let mut e_count = 0usize;
    for edge in &inst.edges {
        for pu in 0..inst.allowed[edge.u].len() {
            for pv in 0..inst.allowed[edge.v].len() {
                let cost = edge.table[pu * inst.allowed[edge.v].len() + pv];
                if cost != 0.0 {
                    let _ = writeln!(
                        e_lines,
                        "e {} {} {}",
                        ids[edge.u][pu],
                        ids[edge.v][pv],
                        fmt_float(cost)
                    );
                    e_count += 1;
                }
            }
        }
    }
    let _ = writeln!(
        out,
        "p {} {} {} {}",
        inst.num_nodes, inst.num_labels, next, e_count
    );
    out.push_str(&a_lines);
    out.push_str(&e_lines);
    out
}

/// Which solver produced a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Proximal bundle with multi-plane block-coordinate Frank-Wolfe.
    Fwmap,
    /// Projected supergradient ascent with adaptive Polyak steps.
    Sa,
}

impl SolverKind {
    /// The tag written to the CSV `solver` column.
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Fwmap => "fwmap",
            SolverKind::Sa => "sa",
        }
    }
}

/// One logged dual evaluation.
///
/// The subgradient baseline has no proximal objective or primal iterate, so
/// it records `NaN` for the gap and `f_prox` columns; the `solver` column
/// tells the rows apart.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Seconds since solver start (work-clock runs report virtual seconds).
    pub time_s: f64,
    /// Outer iteration (or subgradient step) of the evaluation.
    pub iter: u64,
    /// Dual bound `h(λ)` at this evaluation.
    pub h: f64,
    /// Best bound so far (non-decreasing down the file).
    pub h_best: f64,
    /// Vertex-suboptimality gap `A ≥ 0`.
    pub a_gap: f64,
    /// Per-variable disagreement gap `B ≥ 0`.
    pub b_gap: f64,
    /// Proximal-dual objective `f_{μ,c}(y)` at the evaluation.
    pub f_prox: f64,
    /// Producing solver.
    pub solver: SolverKind,
}

/// CSV header for trace files.
pub const TRACE_HEADER: &str = "time_s,iter,h,h_best,A,B,f_prox,solver";

/// Format a float with 17 significant digits, enough to reconstruct the
/// exact `f64` on re-parse.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn join_floats(vs: &[f64]) -> String {
    vs.iter()
        .map(|&v| fmt_float(v))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Render trace records as CSV (header plus one line per record, `\n`
/// endings).  An empty slice yields a header-only file.
pub fn write_trace(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_float(r.time_s),
            r.iter,
            fmt_float(r.h),
            fmt_float(r.h_best),
            fmt_float(r.a_gap),
            fmt_float(r.b_gap),
            fmt_float(r.f_prox),
            r.solver.as_str()
        );
    }
    out
}

/// Parse a trace CSV produced by [`write_trace`].
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, IoError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        Some((_, h)) => return perr(1, format!("bad trace header {h:?}")),
        None => return perr(1, "empty trace file"),
    }
    let mut records = Vec::new();
    for (ln, line) in lines {
        let line_no = ln + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return perr(line_no, format!("expected 8 columns, found {}", cols.len()));
        }
        let f = |idx: usize| -> Result<f64, IoError> {
            cols[idx].parse().map_err(|_| IoError::Parse {
                line: line_no,
                msg: format!("bad float {:?}", cols[idx]),
            })
        };
        let solver = match cols[7] {
            "fwmap" => SolverKind::Fwmap,
            "sa" => SolverKind::Sa,
            other => return perr(line_no, format!("unknown solver tag {other:?}")),
        };
        records.push(TraceRecord {
            time_s: f(0)?,
            iter: cols[1].parse().map_err(|_| IoError::Parse {
                line: line_no,
                msg: format!("bad iteration {:?}", cols[1]),
            })?,
            h: f(2)?,
            h_best: f(3)?,
            a_gap: f(4)?,
            b_gap: f(5)?,
            f_prox: f(6)?,
            solver,
        });
    }
    Ok(records)
}
