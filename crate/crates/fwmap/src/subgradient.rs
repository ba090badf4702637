//! Projected supergradient baseline with adaptive Polyak steps.
//!
//! A reference maximizer for the same dual bound `h(λ)`: each step evaluates
//! `h` exactly, takes the supergradient obtained by projecting the
//! concatenated argmin indicators onto the admissible subspace `Λ`, and
//! moves by the Polyak rule `α = (U − h(λ)) / ‖g‖²` where `U` estimates the
//! optimal value.  `U` starts from (and is refreshed by) the energy of a
//! majority-vote primal labeling; when the bound stalls, `U` shrinks toward
//! the best bound so the steps stay useful.
//!
//! One [`TraceRecord`] per step, tagged [`SolverKind::Sa`]; the gap and
//! proximal columns are `NaN` since this solver tracks neither.

use thiserror::Error;

use crate::clock::ClockKind;
use crate::io::{SolverKind, TraceRecord};
use crate::model::{
    eval_dual, CompactLabeling, Decomposition, ModelError, MultiplierVector,
};

/// Supergradient of `h` at the multiplier whose per-term argmins are given:
/// the orthogonal projection of the concatenated indicator vertices onto `Λ`.
pub fn supergradient(
    dec: &Decomposition,
    argmins: &[(CompactLabeling, f64)],
) -> MultiplierVector {
    assert_eq!(argmins.len(), dec.num_terms());
    let mut blocks = Vec::with_capacity(dec.num_terms());
    for (t, term) in dec.terms().iter().enumerate() {
        let mut block = vec![0.0; term.arity()];
        term.oracle().decode(&argmins[t].0, &mut block);
        blocks.push(block);
    }
    let mut g = MultiplierVector::from_blocks(blocks);
    g.project(dec);
    g
}

/// Polyak step length toward the estimate `U ≥ h(λ)`.
///
/// The caller must rule out `‖g‖² = 0` (an exactly zero supergradient
/// certifies optimality, see [`SaStop::ZeroGradient`]).
pub fn polyak_step(upper: f64, h: f64, grad_norm_sq: f64) -> f64 {
    debug_assert!(grad_norm_sq > 0.0);
    ((upper - h) / grad_norm_sq).max(0.0)
}

/// Majority-vote rounding of the per-term argmins into one global labeling.
///
/// Each variable takes the bit most of its covering terms agree on; exact
/// ties fall back to the bit of the lowest-indexed covering term.
pub fn majority_vote(dec: &Decomposition, argmins: &[(CompactLabeling, f64)]) -> Vec<bool> {
    let mut decoded = Vec::with_capacity(dec.num_terms());
    for (t, term) in dec.terms().iter().enumerate() {
        let mut block = vec![0.0; term.arity()];
        term.oracle().decode(&argmins[t].0, &mut block);
        decoded.push(block);
    }
    (0..dec.num_vars())
        .map(|i| {
            let slots = dec.slots_of(i);
            let ones = slots
                .iter()
                .filter(|s| decoded[s.term as usize][s.local as usize] > 0.5)
                .count();
            let zeros = slots.len() - ones;
            match ones.cmp(&zeros) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => {
                    let first = slots[0];
                    decoded[first.term as usize][first.local as usize] > 0.5
                }
            }
        })
        .collect()
}

/// Price a global labeling through the term oracles: `Σ_t f_t(x_{A_t})`,
/// or `None` if any term finds its restriction infeasible (or cannot price).
pub fn price_primal(dec: &Decomposition, x: &[bool]) -> Option<f64> {
    assert_eq!(x.len(), dec.num_vars());
    let mut total = 0.0;
    for term in dec.terms() {
        let local: Vec<bool> = term.map().iter().map(|&g| x[g]).collect();
        total += term.oracle().energy(&local)?;
    }
    Some(total)
}

/// Knobs of the baseline solver.
#[derive(Debug, Clone)]
pub struct SaOptions {
    /// Supergradient steps to take (one dual evaluation each, plus the
    /// final evaluation of the last iterate).
    pub max_steps: u64,
    /// Stop when this much (clock) time has elapsed.
    pub budget_seconds: Option<f64>,
    /// Wall clock or deterministic work clock.
    pub clock: ClockKind,
    /// Steps without a `stall_tol` improvement before `U` shrinks.
    pub stall_window: u64,
    /// Minimum improvement of the best bound that resets the stall count.
    pub stall_tol: f64,
    /// Optional initial upper estimate `U` (otherwise primal pricing or the
    /// `h + |h|/2 + 1` fallback provides one).
    pub upper_bound: Option<f64>,
}

impl Default for SaOptions {
    fn default() -> Self {
        SaOptions {
            max_steps: 10_000,
            budget_seconds: None,
            clock: ClockKind::Wall,
            stall_window: 50,
            stall_tol: 1e-9,
            upper_bound: None,
        }
    }
}

/// Why the baseline returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaStop {
    /// All steps were taken.
    MaxSteps,
    /// The time budget elapsed.
    Budget,
    /// The supergradient vanished exactly: the bound is optimal.
    ZeroGradient,
}

/// Errors of the baseline solver.
#[derive(Debug, Error)]
pub enum SaError {
    /// An oracle evaluation failed.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Baseline result.
#[derive(Debug)]
pub struct SaResult {
    /// Best dual bound found.
    pub best_bound: f64,
    /// Multiplier achieving the best bound.
    pub best_multiplier: MultiplierVector,
    /// One row per dual evaluation, step 0 first.
    pub trace: Vec<TraceRecord>,
    /// Supergradient steps taken.
    pub steps: u64,
    /// Why the solve stopped.
    pub stop: SaStop,
    /// Final upper estimate `U`.
    pub upper_bound: f64,
}

/// Maximize the dual bound by projected supergradient ascent.
pub fn solve_sa(dec: &Decomposition, options: &SaOptions) -> Result<SaResult, SaError> {
    let mut clock = options.clock.make();
    let t0 = clock.now();
    let mut lambda = MultiplierVector::zeros(dec);
    let mut h_best = f64::NEG_INFINITY;
    let mut best_multiplier = lambda.clone();
    let mut upper = options.upper_bound;
    let mut trace = Vec::new();
    let mut stall = 0u64;
    let mut steps = 0u64;

    let stop = loop {
        if let Some(budget) = options.budget_seconds {
            if steps > 0 && clock.now() - t0 >= budget {
                break SaStop::Budget;
            }
        }

        let eval = eval_dual(dec, &lambda)?;
        clock.charge(dec.sweep_work());
        let h = eval.value;
        if h > h_best + options.stall_tol {
            stall = 0;
        } else {
            stall += 1;
        }
        if h > h_best {
            h_best = h;
            best_multiplier = lambda.clone();
        }

        // Refresh the upper estimate from the majority-vote labeling; fall
        // back to a crude offset if no term can price it.
        let vote = majority_vote(dec, &eval.argmins);
        if let Some(priced) = price_primal(dec, &vote) {
            upper = Some(upper.map_or(priced, |u: f64| u.min(priced)));
        } else if upper.is_none() {
            upper = Some(h + 0.5 * h.abs() + 1.0);
        }
        let mut u = upper.expect("initialized above");
        if stall >= options.stall_window {
            // The bound stopped moving: U is likely too optimistic, so
            // shrink it halfway toward the best bound.
            u = h_best + 0.5 * (u - h_best);
            stall = 0;
        }
        u = u.max(h_best);
        upper = Some(u);

        trace.push(TraceRecord {
            time_s: clock.now() - t0,
            iter: steps,
            h,
            h_best,
            a_gap: f64::NAN,
            b_gap: f64::NAN,
            f_prox: f64::NAN,
            solver: SolverKind::Sa,
        });

        let g = supergradient(dec, &eval.argmins);
        let norm_sq = g.norm_sq();
        if norm_sq == 0.0 {
            break SaStop::ZeroGradient;
        }
        if steps >= options.max_steps {
            break SaStop::MaxSteps;
        }
        let alpha = polyak_step(u, h, norm_sq);
        lambda.axpy(alpha, &g);
        steps += 1;
    };

    Ok(SaResult {
        best_bound: h_best,
        best_multiplier,
        trace,
        steps,
        stop,
        upper_bound: upper.unwrap_or(h_best),
    })
}
