//! Outer proximal bundle loop: the main solver.
//!
//! The dual bound `h(λ)` is maximized through a sequence of proximal
//! subproblems `max_λ h(λ) − ‖λ−μ‖²/(2c)`, each handled approximately by
//! multi-plane Frank-Wolfe iterations ([`crate::bcfw`]).  The driver owns
//! the schedule: it seeds the iterate from one vertex per term, runs
//! [`mp_bcfw_iteration`] until a budget or iteration cap binds, evaluates
//! `h` at the extracted multiplier every few iterations (feeding the argmin
//! vertices back into the plane caches), tracks the best bound, and
//! periodically re-centers the proximal term on the best multiplier so far.
//!
//! Every `h` evaluation appends one [`TraceRecord`], including the two gap
//! measures of [`compute_gaps`] that certify how far the bound can still
//! move; see [`gap_bound`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bcfw::{
    eval_prox_dual, extract_lambda, mp_bcfw_iteration, FwError, PassStats, PlaneCache, ProxParams,
    DEFAULT_PLANE_HORIZON,
};
use crate::clock::ClockKind;
use crate::io::{SolverKind, TraceRecord};
use crate::model::{
    eval_dual, Decomposition, ModelError, MultiplierVector, PrimalIterate,
};

/// Default proximal weight for a decomposition with `num_terms` terms:
/// `1.5·10⁶ / (|T| + 22)²`.
pub fn default_prox_weight(num_terms: usize) -> f64 {
    let n = num_terms as f64 + 22.0;
    1_500_000.0 / (n * n)
}

/// The two residuals reported with every dual evaluation.
///
/// `a` measures how far the iterate sits from the best vertices at the
/// current multiplier (`Σ_t ⟨y^t, [λ^t 1]⟩ − h(λ) ≥ 0`); `b` sums each
/// variable's disagreement spread over the terms covering it.  Both vanish
/// exactly at a dual optimum with consistent minimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    /// Vertex-suboptimality gap `A`.
    pub a: f64,
    /// Coordinate-disagreement gap `B`.
    pub b: f64,
}

/// Compute both gaps for an iterate at a multiplier with known `h(λ)`.
pub fn compute_gaps(
    dec: &Decomposition,
    y: &PrimalIterate,
    lambda: &MultiplierVector,
    h: f64,
) -> GapReport {
    lambda.assert_shape(dec);
    let mut total = 0.0;
    for t in 0..dec.num_terms() {
        let lam = lambda.block(t);
        total += y.y_circ[t];
        for (j, &l) in lam.iter().enumerate() {
            total += l * y.y_star[t][j];
        }
    }
    let a = total - h;
    debug_assert!(
        a >= -1e-6 * (1.0 + h.abs()),
        "A gap must be nonnegative, got {a}"
    );
    let mut b = 0.0;
    for i in 0..dec.num_vars() {
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for slot in dec.slots_of(i) {
            let v = y.y_star[slot.term as usize][slot.local as usize];
            max = max.max(v);
            min = min.min(v);
        }
        b += max - min;
    }
    GapReport { a, b }
}

/// Post-hoc optimality bound: for any admissible `other` multiplier,
/// `h(other) − h(lambda) ≤ A + B·‖other − lambda‖_{1,∞}`.
pub fn gap_bound(
    gaps: &GapReport,
    dec: &Decomposition,
    lambda: &MultiplierVector,
    other: &MultiplierVector,
) -> f64 {
    gaps.a + gaps.b * other.sub(lambda).norm_1_inf(dec)
}

/// Stop once both gaps fall to these thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapThresholds {
    /// Bound on the `A` gap.
    pub a: f64,
    /// Bound on the `B` gap.
    pub b: f64,
}

impl Default for GapThresholds {
    fn default() -> Self {
        GapThresholds { a: 1e-6, b: 1e-6 }
    }
}

/// Which vertex seeds the iterate at `λ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitVertex {
    /// Each term's minimizer (the `h(0)` argmins).
    #[default]
    Min,
    /// Each term's maximizer — requires the oracles to support
    /// [`crate::model::MinOracle::solve_max`].
    Max,
}

/// Knobs of the outer solve; `Default` matches the CLI defaults.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop when this much (clock) time has elapsed.
    pub budget_seconds: Option<f64>,
    /// Stop after this many multi-plane iterations.
    pub max_iterations: Option<u64>,
    /// Proximal weight `c`; default derives from the term count.
    pub prox_weight: Option<f64>,
    /// Seed of the pass-order shuffles.
    pub seed: u64,
    /// Vertex used to seed the iterate.
    pub init_vertex: InitVertex,
    /// Optional gap-based stopping rule.
    pub gap_stop: Option<GapThresholds>,
    /// Plane-cache retention horizon, in multi-plane iterations.
    pub plane_horizon: u64,
    /// Evaluate `h` every this many iterations.
    pub h_eval_period: u64,
    /// Move the proximal center to the best multiplier every this many
    /// iterations (must be a multiple of the evaluation period to observe
    /// fresh bounds).
    pub center_update_period: u64,
    /// Wall clock or deterministic work clock.
    pub clock: ClockKind,
    /// Keep per-iteration pass statistics in the result.
    pub record_passes: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            budget_seconds: None,
            max_iterations: Some(1000),
            prox_weight: None,
            seed: 0,
            init_vertex: InitVertex::Min,
            gap_stop: None,
            plane_horizon: DEFAULT_PLANE_HORIZON,
            h_eval_period: 5,
            center_update_period: 10,
            clock: ClockKind::Wall,
            record_passes: false,
        }
    }
}

/// Why the solve returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The time budget elapsed.
    Budget,
    /// The iteration cap was reached.
    IterationCap,
    /// Both gaps fell below the configured thresholds.
    Gap,
}

/// Errors of the outer solve.
#[derive(Debug, Error)]
pub enum SolveError {
    /// A Frank-Wolfe pass failed.
    #[error(transparent)]
    Fw(#[from] FwError),
    /// An oracle evaluation failed.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Everything the solver hands back.
#[derive(Debug)]
pub struct SolveResult {
    /// Best dual bound found.
    pub best_bound: f64,
    /// Multiplier achieving the best bound.
    pub best_multiplier: MultiplierVector,
    /// One row per dual evaluation, iteration 0 first.
    pub trace: Vec<TraceRecord>,
    /// Per-iteration pass statistics (empty unless requested).
    pub passes: Vec<PassStats>,
    /// Multi-plane iterations completed.
    pub iterations: u64,
    /// Why the solve stopped.
    pub stop: StopReason,
    /// Proximal weight used.
    pub prox_weight: f64,
    /// Final fractional iterate.
    pub iterate: PrimalIterate,
    /// Final proximal center.
    pub center: MultiplierVector,
}

/// Maximize the dual bound of a decomposition.
///
/// Runs until the budget, the iteration cap, or (when configured) the gap
/// thresholds bind — at least one of the three must be set.
pub fn solve(dec: &Decomposition, options: &SolveOptions) -> Result<SolveResult, SolveError> {
    assert!(
        options.budget_seconds.is_some()
            || options.max_iterations.is_some()
            || options.gap_stop.is_some(),
        "no stopping rule configured"
    );
    assert!(
        options.h_eval_period > 0
            && options.center_update_period > 0
            && options.center_update_period % options.h_eval_period == 0,
        "the center update period must be a multiple of the evaluation period"
    );
    let weight = options
        .prox_weight
        .unwrap_or_else(|| default_prox_weight(dec.num_terms()));
    let mut prox = ProxParams::new(MultiplierVector::zeros(dec), weight);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut clock = options.clock.make();
    let t0 = clock.now();

    // Seed from one vertex per term at λ = 0; the minimizing sweep doubles
    // as the iteration-0 evaluation of h(0).
    let mut vertices = Vec::with_capacity(dec.num_terms());
    let mut h0 = 0.0;
    for (t, term) in dec.terms().iter().enumerate() {
        let zero = vec![0.0; term.arity()];
        let result = match options.init_vertex {
            InitVertex::Min => term.oracle().solve(&zero),
            InitVertex::Max => term.oracle().solve_max(&zero),
        };
        let (s, cost) = result.map_err(|source| ModelError::OracleFailure { term: t, source })?;
        if options.init_vertex == InitVertex::Min {
            h0 += cost; // at λ = 0 the vertex cost is the term's minimum
        } else {
            let (_, min_cost) = term
                .oracle()
                .solve(&zero)
                .map_err(|source| ModelError::OracleFailure { term: t, source })?;
            h0 += min_cost;
        }
        vertices.push((s, cost));
    }
    clock.charge(dec.sweep_work());
    if options.init_vertex == InitVertex::Max {
        clock.charge(dec.sweep_work());
    }
    let mut y = PrimalIterate::from_vertices(dec, &vertices, &prox.center, weight);
    let mut cache = PlaneCache::new(dec, options.plane_horizon);
    for (t, (s, cost)) in vertices.into_iter().enumerate() {
        cache.insert(t, s, cost);
    }

    let lambda0 = MultiplierVector::zeros(dec);
    let mut h_best = h0;
    let mut best_multiplier = lambda0.clone();
    let mut trace = Vec::new();
    let mut passes = Vec::new();
    let gaps0 = compute_gaps(dec, &y, &lambda0, h0);
    trace.push(TraceRecord {
        time_s: clock.now() - t0,
        iter: 0,
        h: h0,
        h_best,
        a_gap: gaps0.a,
        b_gap: gaps0.b,
        f_prox: eval_prox_dual(&y, &prox, dec),
        solver: SolverKind::Fwmap,
    });

    let converged = |g: &GapReport| -> bool {
        options
            .gap_stop
            .map_or(false, |th| g.a <= th.a && g.b <= th.b)
    };

    if converged(&gaps0) {
        return Ok(SolveResult {
            best_bound: h_best,
            best_multiplier,
            trace,
            passes,
            iterations: 0,
            stop: StopReason::Gap,
            prox_weight: weight,
            iterate: y,
            center: prox.center,
        });
    }

    let mut iterations = 0u64;
    let stop = loop {
        if let Some(cap) = options.max_iterations {
            if iterations >= cap {
                break StopReason::IterationCap;
            }
        }
        if let Some(budget) = options.budget_seconds {
            if clock.now() - t0 >= budget {
                break StopReason::Budget;
            }
        }

        let stats = mp_bcfw_iteration(&mut y, &prox, dec, &mut cache, clock.as_mut(), &mut rng)?;
        if options.record_passes {
            passes.push(stats);
        }
        iterations += 1;

        if iterations % options.h_eval_period == 0 {
            let lambda = extract_lambda(&y, &prox, dec);
            let eval = eval_dual(dec, &lambda)?;
            clock.charge(dec.sweep_work());
            for (t, (s, cost)) in eval.argmins.into_iter().enumerate() {
                cache.insert(t, s, cost);
            }
            if eval.value > h_best {
                h_best = eval.value;
                best_multiplier = lambda.clone();
            }
            let gaps = compute_gaps(dec, &y, &lambda, eval.value);
            trace.push(TraceRecord {
                time_s: clock.now() - t0,
                iter: iterations,
                h: eval.value,
                h_best,
                a_gap: gaps.a,
                b_gap: gaps.b,
                f_prox: eval_prox_dual(&y, &prox, dec),
                solver: SolverKind::Fwmap,
            });
            if converged(&gaps) {
                break StopReason::Gap;
            }
            if iterations % options.center_update_period == 0 {
                prox.center = best_multiplier.clone();
                y.recompute_nu(dec, &prox.center, weight);
            }
        }
    };

    Ok(SolveResult {
        best_bound: h_best,
        best_multiplier,
        trace,
        passes,
        iterations,
        stop,
        prox_weight: weight,
        iterate: y,
        center: prox.center,
    })
}
