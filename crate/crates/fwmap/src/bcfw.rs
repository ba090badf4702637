//! Block-coordinate Frank-Wolfe passes over the proximal dual.
//!
//! The proximal subproblem `max_{λ∈Λ} h(λ) − ‖λ−μ‖²/(2c)` is attacked
//! through its dual: minimize
//!
//! ```text
//! f_{μ,c}(y) = Σ_t [ (c/2)‖y*_t‖² + ⟨y^t, [μ^t 1]⟩ ] − Σ_i |T_i|/(2c)·ν_i²,
//! ν_i = (1/|T_i|) Σ_{t∋i} (c·y^t_i + μ^t_i),
//! ```
//!
//! over the product of local polytopes `Y = Π_t Y_t`.  Any `y` yields an
//! admissible multiplier `λ^t = c·y*^t + μ^t − ν_{A_t}`, which is also the
//! indicator part of the gradient `∇_t f_{μ,c}(y) = [λ^t 1]`, so one
//! Frank-Wolfe direction per term costs exactly one min-oracle call.
//!
//! A pass visits the terms in random order and moves each block toward its
//! oracle vertex with the closed-form optimal step.  *Multi-plane* iterations
//! ([`mp_bcfw_iteration`]) run one exact pass followed by approximate passes
//! that replace the oracle by the best plane in a small per-term cache
//! ([`PlaneCache`]); approximate passes continue while the objective decrease
//! per unit time keeps up, and the cache evicts planes that go unused.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clock::Clock;
use crate::model::{CompactLabeling, Decomposition, ModelError, MultiplierVector, PrimalIterate};

/// Default plane-cache horizon: planes unused for this many multi-plane
/// iterations are evicted.
pub const DEFAULT_PLANE_HORIZON: u64 = 10;

/// Smallest elapsed time used in a rate computation, guarding against clocks
/// too coarse to see a fast pass.
const MIN_ELAPSED: f64 = 1e-9;

/// Errors from the Frank-Wolfe passes.
#[derive(Debug, Error)]
pub enum FwError {
    /// An approximate pass found a term with an empty plane cache.
    #[error("term {term}: plane cache is empty, no approximate oracle available")]
    EmptyCache { term: usize },
    /// An exact oracle call failed.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Proximal subproblem parameters: center `μ` and weight `c > 0`.
///
/// Larger `c` weakens the proximal pull toward `μ` (the penalty is
/// `‖λ−μ‖²/(2c)`), so the subproblem tracks the raw dual more closely.
pub struct ProxParams {
    /// Proximal center `μ` (admissible multiplier).
    pub center: MultiplierVector,
    /// Proximal weight `c`.
    pub weight: f64,
}

impl ProxParams {
    /// Bundle a center and weight; `weight` must be positive and finite.
    pub fn new(center: MultiplierVector, weight: f64) -> Self {
        assert!(
            weight.is_finite() && weight > 0.0,
            "proximal weight must be positive and finite"
        );
        ProxParams { center, weight }
    }
}

/// Evaluate the proximal-dual objective `f_{μ,c}(y)` in closed form.
///
/// Requires `y.nu` to be consistent with `(y, μ, c)`; the passes maintain it
/// incrementally and this is debug-asserted.
pub fn eval_prox_dual(y: &PrimalIterate, p: &ProxParams, dec: &Decomposition) -> f64 {
    debug_assert!(
        y.nu_drift(dec, &p.center, p.weight) <= 1e-8,
        "ν inconsistent with the iterate"
    );
    let c = p.weight;
    let mut v = 0.0;
    for (t, term) in dec.terms().iter().enumerate() {
        let mu = p.center.block(t);
        let ys = &y.y_star[t];
        let mut sq = 0.0;
        let mut dot = 0.0;
        for j in 0..term.arity() {
            sq += ys[j] * ys[j];
            dot += ys[j] * mu[j];
        }
        v += 0.5 * c * sq + dot + y.y_circ[t];
    }
    for i in 0..dec.num_vars() {
        v -= dec.cover_count(i) as f64 / (2.0 * c) * y.nu[i] * y.nu[i];
    }
    v
}

/// Evaluate the proximal *primal* objective `h_{μ,c}(λ) = h(λ) − ‖λ−μ‖²/(2c)`.
///
/// Useful for the duality bracket `h_{μ,c}(λ) ≤ f_{μ,c}(y)`; one exact oracle
/// sweep per call.
pub fn eval_prox_primal(
    lambda: &MultiplierVector,
    p: &ProxParams,
    dec: &Decomposition,
) -> Result<f64, ModelError> {
    let h = crate::model::eval_dual(dec, lambda)?.value;
    Ok(h - lambda.sub(&p.center).norm_sq() / (2.0 * p.weight))
}

/// Multiplier induced by an iterate: `λ^t = c·y*^t + μ^t − ν_{A_t}`.
///
/// The result lies in `Λ` up to rounding (the per-variable column sums
/// telescope to zero by the definition of `ν`).
pub fn extract_lambda(y: &PrimalIterate, p: &ProxParams, dec: &Decomposition) -> MultiplierVector {
    let c = p.weight;
    let mut blocks = Vec::with_capacity(dec.num_terms());
    for (t, term) in dec.terms().iter().enumerate() {
        let mu = p.center.block(t);
        let block = term
            .map()
            .iter()
            .enumerate()
            .map(|(j, &i)| c * y.y_star[t][j] + mu[j] - y.nu[i])
            .collect();
        blocks.push(block);
    }
    MultiplierVector::from_blocks(blocks)
}

/// Exact line-search step toward vertex `z` for one block:
///
/// ```text
/// γ = ⟨[λ^t 1], y^t − z^t⟩ / (c·‖y*^t − z*^t‖²),  clipped to [0,1].
/// ```
///
/// When the denominator vanishes (`z* = y*`) the objective is linear in `γ`
/// with slope `z° − y°`, so the step is `1` exactly when the vertex cost
/// improves and `0` otherwise.
pub fn step_size(
    y_star: &[f64],
    y_circ: f64,
    z_star: &[f64],
    z_circ: f64,
    lambda: &[f64],
    c: f64,
) -> f64 {
    debug_assert_eq!(y_star.len(), z_star.len());
    debug_assert_eq!(y_star.len(), lambda.len());
    let mut num = y_circ - z_circ;
    let mut den = 0.0;
    for j in 0..y_star.len() {
        let d = y_star[j] - z_star[j];
        num += lambda[j] * d;
        den += d * d;
    }
    den *= c;
    if den == 0.0 {
        return if z_circ < y_circ { 1.0 } else { 0.0 };
    }
    (num / den).clamp(0.0, 1.0)
}

/// One cached plane: a compact vertex and its raw term cost, plus the last
/// multi-plane iteration that used it.
#[derive(Debug, Clone)]
pub struct CachedPlane {
    /// Compact vertex encoding.
    pub labeling: CompactLabeling,
    /// Raw term cost `f_t(σ(s))`.
    pub cost: f64,
    /// Iteration stamp of the last insertion or selection.
    pub last_used: u64,
}

/// Per-term vertex caches with usage-based eviction.
///
/// The cache answers *approximate* oracle calls: minimize
/// `cost + ⟨λ, σ(s)⟩` over the cached planes only, which never beats the
/// exact oracle (`h̃_t(λ) ≥ h_t(λ)`).  Insertions deduplicate on the compact
/// encoding; planes not used for [`horizon`](Self::horizon) whole iterations
/// are dropped at the end of each iteration.
pub struct PlaneCache {
    horizon: u64,
    iteration: u64,
    planes: Vec<Vec<CachedPlane>>,
}

impl PlaneCache {
    /// Empty caches for every term with the given eviction horizon.
    pub fn new(dec: &Decomposition, horizon: u64) -> Self {
        assert!(horizon >= 1, "plane horizon must be at least 1");
        PlaneCache {
            horizon,
            iteration: 0,
            planes: vec![Vec::new(); dec.num_terms()],
        }
    }

    /// Eviction horizon in multi-plane iterations.
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Multi-plane iterations started so far.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Cached planes of term `t`.
    pub fn planes(&self, t: usize) -> &[CachedPlane] {
        &self.planes[t]
    }

    /// Number of planes cached for term `t`.
    pub fn len(&self, t: usize) -> usize {
        self.planes[t].len()
    }

    /// Whether term `t` has no cached planes.
    pub fn is_empty(&self, t: usize) -> bool {
        self.planes[t].is_empty()
    }

    /// Total planes across all terms.
    pub fn total_planes(&self) -> usize {
        self.planes.iter().map(Vec::len).sum()
    }

    /// Insert a plane for term `t`, deduplicating on the compact encoding.
    /// A duplicate refreshes the usage stamp instead of growing the cache.
    pub fn insert(&mut self, t: usize, labeling: CompactLabeling, cost: f64) {
        let stamp = self.iteration;
        let list = &mut self.planes[t];
        if let Some(existing) = list.iter_mut().find(|p| p.labeling == labeling) {
            existing.last_used = stamp;
            debug_assert_eq!(
                existing.cost, cost,
                "same compact vertex reported with two different costs"
            );
            return;
        }
        list.push(CachedPlane {
            labeling,
            cost,
            last_used: stamp,
        });
    }

    /// Best cached plane of term `t` against `lambda`:
    /// `min over planes of cost + ⟨λ, σ(s)⟩`, ties to the earliest insertion.
    /// Read-only (no usage stamp); returns the plane index and its value.
    pub fn best_value(&self, t: usize, lambda: &[f64], dec: &Decomposition) -> Option<(usize, f64)> {
        let oracle = dec.term(t).oracle();
        let mut best: Option<(usize, f64)> = None;
        for (idx, plane) in self.planes[t].iter().enumerate() {
            let v = plane.cost + oracle.inner_product(lambda, &plane.labeling);
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((idx, v));
            }
        }
        best
    }

    /// Like [`best_value`](Self::best_value) but marks the winner as used in
    /// the current iteration, as the approximate pass does.
    pub fn select(
        &mut self,
        t: usize,
        lambda: &[f64],
        dec: &Decomposition,
    ) -> Option<(CompactLabeling, f64)> {
        let (idx, _) = self.best_value(t, lambda, dec)?;
        let stamp = self.iteration;
        let plane = &mut self.planes[t][idx];
        plane.last_used = stamp;
        Some((plane.labeling.clone(), plane.cost))
    }

    /// Begin a multi-plane iteration; returns the new iteration number.
    pub fn begin_iteration(&mut self) -> u64 {
        self.iteration += 1;
        self.iteration
    }

    /// Drop planes whose last use lies a full horizon in the past.
    pub fn evict_stale(&mut self) {
        let horizon = self.horizon;
        let now = self.iteration;
        for list in &mut self.planes {
            list.retain(|p| now - p.last_used < horizon);
        }
    }

    /// Work units of one approximate sweep at current cache occupancy: each
    /// cached plane costs one compact inner product.
    pub fn sweep_work(&self, dec: &Decomposition) -> u64 {
        self.planes
            .iter()
            .enumerate()
            .map(|(t, list)| (list.len() * (dec.term(t).oracle().compact_len() + 1)) as u64)
            .sum::<u64>()
            + 1
    }
}

/// How one block-coordinate pass obtains its per-term vertex.
enum PassOracle<'a> {
    Exact,
    Cached(&'a mut PlaneCache),
}

/// Shared body of the exact and approximate passes.  Visits terms in a
/// freshly shuffled order; for each term extracts `λ^t`, obtains a candidate
/// vertex, takes the clipped optimal step and updates `ν` incrementally.
fn bcfw_pass(
    y: &mut PrimalIterate,
    p: &ProxParams,
    dec: &Decomposition,
    mut oracle: PassOracle<'_>,
    insert_into: Option<&mut PlaneCache>,
    rng: &mut ChaCha8Rng,
) -> Result<(), FwError> {
    let c = p.weight;
    let mut order: Vec<usize> = (0..dec.num_terms()).collect();
    order.shuffle(rng);
    let max_arity = dec
        .terms()
        .iter()
        .map(crate::model::Term::arity)
        .max()
        .unwrap_or(0);
    let mut lambda = vec![0.0f64; max_arity];
    let mut z = vec![0.0f64; max_arity];
    let mut cache_sink = insert_into;
    for &t in &order {
        let term = dec.term(t);
        let arity = term.arity();
        let mu = p.center.block(t);
        let map = term.map();
        let lam = &mut lambda[..arity];
        for j in 0..arity {
            lam[j] = c * y.y_star[t][j] + mu[j] - y.nu[map[j]];
        }
        let (s, cost) = match &mut oracle {
            PassOracle::Exact => term
                .oracle()
                .solve(lam)
                .map_err(|source| ModelError::OracleFailure { term: t, source })?,
            PassOracle::Cached(cache) => cache
                .select(t, lam, dec)
                .ok_or(FwError::EmptyCache { term: t })?,
        };
        if let Some(cache) = cache_sink.as_deref_mut() {
            cache.insert(t, s.clone(), cost);
        }
        let zs = &mut z[..arity];
        term.oracle().decode(&s, zs);
        let gamma = step_size(&y.y_star[t], y.y_circ[t], zs, cost, lam, c);
        if gamma > 0.0 {
            let ys = &mut y.y_star[t];
            for j in 0..arity {
                let delta = gamma * (zs[j] - ys[j]);
                if delta != 0.0 {
                    ys[j] += delta;
                    let i = map[j];
                    y.nu[i] += c / dec.cover_count(i) as f64 * delta;
                }
            }
            y.y_circ[t] += gamma * (cost - y.y_circ[t]);
        }
    }
    Ok(())
}

/// One exact block-coordinate pass: every term calls its exact min-oracle
/// once; returned vertices are inserted into the plane cache.
pub fn bcfw_exact_pass(
    y: &mut PrimalIterate,
    p: &ProxParams,
    dec: &Decomposition,
    cache: &mut PlaneCache,
    rng: &mut ChaCha8Rng,
) -> Result<(), FwError> {
    bcfw_pass(y, p, dec, PassOracle::Exact, Some(cache), rng)
}

/// One approximate pass: vertices come from the plane caches only (errors
/// with [`FwError::EmptyCache`] if some term has none).
pub fn bcfw_approx_pass(
    y: &mut PrimalIterate,
    p: &ProxParams,
    dec: &Decomposition,
    cache: &mut PlaneCache,
    rng: &mut ChaCha8Rng,
) -> Result<(), FwError> {
    // Split the borrow: selection stamps the cache, so it owns it for the
    // duration of the pass; vertices selected from the cache are already in
    // it, so no insertion sink is needed.
    bcfw_pass(y, p, dec, PassOracle::Cached(cache), None, rng)
}

/// Statistics of one multi-plane iteration: the objective before any pass,
/// then one entry per pass (exact first) with the objective after it, the
/// cumulative elapsed time, and the decrease rate `(f₀ − f_k)/Δt_k`.
#[derive(Debug, Clone)]
pub struct PassStats {
    /// Iteration number (1-based, as stamped by the cache).
    pub iteration: u64,
    /// Objective `f_{μ,c}` at the start of the iteration.
    pub start_objective: f64,
    /// Objective after each pass; index 0 is the exact pass.
    pub objectives: Vec<f64>,
    /// Cumulative seconds since iteration start, per pass (always > 0).
    pub elapsed: Vec<f64>,
    /// Decrease rate per pass: `(start − objective) / elapsed`.
    pub ratios: Vec<f64>,
    /// Planes cached after eviction.
    pub cached_planes: usize,
}

impl PassStats {
    /// Number of passes run (exact + approximate).
    pub fn num_passes(&self) -> usize {
        self.objectives.len()
    }

    /// Objective after the last pass.
    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("at least the exact pass runs")
    }
}

/// One multi-plane iteration: an exact pass, then approximate passes while
/// the objective decrease per unit time does not drop, then cache eviction.
///
/// The first strict drop of the rate `(f₀ − f_k)/Δt_k` below the previous
/// pass's rate ends the iteration (the work of the final pass is kept — the
/// line search never increases the objective).  A pass that achieves no
/// decrease at all ends the iteration too: its rate can only stay at zero.
pub fn mp_bcfw_iteration(
    y: &mut PrimalIterate,
    p: &ProxParams,
    dec: &Decomposition,
    cache: &mut PlaneCache,
    clock: &mut dyn Clock,
    rng: &mut ChaCha8Rng,
) -> Result<PassStats, FwError> {
    let iteration = cache.begin_iteration();
    let t0 = clock.now();
    let start_objective = eval_prox_dual(y, p, dec);
    let mut objectives = Vec::new();
    let mut elapsed = Vec::new();
    let mut ratios = Vec::new();

    bcfw_exact_pass(y, p, dec, cache, rng)?;
    clock.charge(dec.sweep_work());
    let mut f = eval_prox_dual(y, p, dec);
    let mut dt = (clock.now() - t0).max(MIN_ELAPSED);
    let mut prev_ratio = (start_objective - f) / dt;
    objectives.push(f);
    elapsed.push(dt);
    ratios.push(prev_ratio);

    loop {
        bcfw_approx_pass(y, p, dec, cache, rng)?;
        clock.charge(cache.sweep_work(dec));
        f = eval_prox_dual(y, p, dec);
        dt = (clock.now() - t0).max(MIN_ELAPSED);
        let ratio = (start_objective - f) / dt;
        objectives.push(f);
        elapsed.push(dt);
        ratios.push(ratio);
        if !ratio.is_finite() || ratio < prev_ratio || ratio <= 0.0 {
            break;
        }
        prev_ratio = ratio;
    }

    cache.evict_stale();
    Ok(PassStats {
        iteration,
        start_objective,
        objectives,
        elapsed,
        ratios,
        cached_planes: cache.total_planes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{WallClock, WorkClock};
    use crate::explicit::ExplicitOracle;
    use crate::model::{eval_dual, Decomposition, Term};
    use rand::{Rng, SeedableRng};

    /// Single Boolean variable with costs f(0)=0, f(1)=-3.
    fn one_var_dec() -> Decomposition {
        let oracle =
            ExplicitOracle::from_labelings(1, vec![(vec![false], 0.0), (vec![true], -3.0)]);
        Decomposition::build(1, vec![Term::new(vec![0], Box::new(oracle))]).unwrap()
    }

    /// Two single-variable terms sharing variable 0, costs as given.
    fn shared_var_dec(costs0: [f64; 2], costs1: [f64; 2]) -> Decomposition {
        let mk = |c: [f64; 2]| {
            ExplicitOracle::from_labelings(1, vec![(vec![false], c[0]), (vec![true], c[1])])
        };
        Decomposition::build(
            1,
            vec![
                Term::new(vec![0], Box::new(mk(costs0))),
                Term::new(vec![0], Box::new(mk(costs1))),
            ],
        )
        .unwrap()
    }

    fn iterate(dec: &Decomposition, y_star: Vec<Vec<f64>>, y_circ: Vec<f64>, p: &ProxParams) -> PrimalIterate {
        let mut it = PrimalIterate {
            y_star,
            y_circ,
            nu: Vec::new(),
        };
        it.recompute_nu(dec, &p.center, p.weight);
        it
    }

    #[test]
    fn prox_dual_closed_form_single_term_halfway() {
        // y = (0.5, 2), c = 2, μ = 0:  ν = 1, f = 0.25·2 + 2 − 0.25 = 2.
        let dec = one_var_dec();
        let p = ProxParams::new(MultiplierVector::zeros(&dec), 2.0);
        let y = iterate(&dec, vec![vec![0.5]], vec![2.0], &p);
        assert_eq!(y.nu, vec![1.0]);
        assert_eq!(eval_prox_dual(&y, &p, &dec), 2.0);
    }

    #[test]
    fn prox_dual_closed_form_single_term_vertex() {
        // y = (1, -3), c = 1, μ = 0:  f = 0.5 − 3 − 0.5 = −3, and the
        // extracted multiplier is exactly 0.
        let dec = one_var_dec();
        let p = ProxParams::new(MultiplierVector::zeros(&dec), 1.0);
        let y = iterate(&dec, vec![vec![1.0]], vec![-3.0], &p);
        assert_eq!(eval_prox_dual(&y, &p, &dec), -3.0);
        let lam = extract_lambda(&y, &p, &dec);
        assert_eq!(lam.blocks(), &[vec![0.0]]);
    }

    #[test]
    fn extract_lambda_splits_disagreement() {
        // Two terms share the variable with y* = (1, 0), c = 1, μ = 0:
        // ν = 0.5 and λ = (+0.5, −0.5) ∈ Λ.
        let dec = shared_var_dec([0.0, -3.0], [0.0, -3.0]);
        let p = ProxParams::new(MultiplierVector::zeros(&dec), 1.0);
        let y = iterate(&dec, vec![vec![1.0], vec![0.0]], vec![-3.0, 0.0], &p);
        let lam = extract_lambda(&y, &p, &dec);
        assert_eq!(lam.blocks(), &[vec![0.5], vec![-0.5]]);
        assert!(lam.is_admissible(&dec));
    }

    #[test]
    fn step_size_clips_at_one() {
        // y = ([1,0],5), z = ([0,1],3), λ = (2,−1), c = 1:
        // raw γ = (2+1+2)/2 = 2.5 → clipped to 1.
        let g = step_size(&[1.0, 0.0], 5.0, &[0.0, 1.0], 3.0, &[2.0, -1.0], 1.0);
        assert_eq!(g, 1.0);
    }

    #[test]
    fn step_size_zero_when_already_at_the_vertex() {
        let g = step_size(&[1.0, 0.0], 5.0, &[1.0, 0.0], 5.0, &[2.0, -1.0], 1.0);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn step_size_degenerate_denominator_takes_cheaper_cost() {
        // Same indicator part, strictly cheaper cost: jump all the way.
        let g = step_size(&[1.0, 0.0], 5.0, &[1.0, 0.0], 3.0, &[2.0, -1.0], 1.0);
        assert_eq!(g, 1.0);
        let g = step_size(&[1.0, 0.0], 3.0, &[1.0, 0.0], 5.0, &[2.0, -1.0], 1.0);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn step_size_matches_grid_line_search_on_examples() {
        // Dense scan of f_{μ,c}(y(γ)) over a γ-grid confirms the closed form
        // on a handful of hand-picked block configurations.
        let dec = one_var_dec();
        for &(ys, yc, zs, zc, c) in &[
            (0.25f64, 1.0f64, 1.0f64, -3.0f64, 2.0f64),
            (0.9, -2.0, 0.0, 0.0, 0.5),
            (0.5, 2.0, 1.0, -3.0, 1.0),
        ] {
            let p = ProxParams::new(MultiplierVector::zeros(&dec), c);
            let y = iterate(&dec, vec![vec![ys]], vec![yc], &p);
            let lam = extract_lambda(&y, &p, &dec);
            let gamma = step_size(&[ys], yc, &[zs], zc, lam.block(0), c);
            let mut best = (f64::INFINITY, 0.0);
            let n = 100_000;
            for k in 0..=n {
                let g = k as f64 / n as f64;
                let yg = iterate(
                    &dec,
                    vec![vec![ys + g * (zs - ys)]],
                    vec![yc + g * (zc - yc)],
                    &p,
                );
                let f = eval_prox_dual(&yg, &p, &dec);
                if f < best.0 {
                    best = (f, g);
                }
            }
            assert!(
                (gamma - best.1).abs() <= 1e-5,
                "closed-form γ={gamma} vs grid minimizer {}",
                best.1
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // ∇f = [λ 1] blockwise: central differences on the closed form, with
        // ν recomputed at each probe, agree to 1e-5 relative error.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dec = shared_var_dec([0.0, -3.0], [1.0, 2.0]);
        for _ in 0..100 {
            let c: f64 = rng.gen_range(0.5..5.0);
            let mut center = MultiplierVector::from_blocks(vec![
                vec![rng.gen_range(-2.0..2.0)],
                vec![rng.gen_range(-2.0..2.0)],
            ]);
            center.project(&dec);
            let p = ProxParams::new(center, c);
            let y = iterate(
                &dec,
                vec![vec![rng.gen_range(0.0..1.0)], vec![rng.gen_range(0.0..1.0)]],
                vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
                &p,
            );
            let lam = extract_lambda(&y, &p, &dec);
            let eps = 1e-6;
            for t in 0..2 {
                for (probe, expected) in [(0usize, lam.block(t)[0]), (1, 1.0)] {
                    let mut up = y.clone();
                    let mut dn = y.clone();
                    if probe == 0 {
                        up.y_star[t][0] += eps;
                        dn.y_star[t][0] -= eps;
                    } else {
                        up.y_circ[t] += eps;
                        dn.y_circ[t] -= eps;
                    }
                    up.recompute_nu(&dec, &p.center, c);
                    dn.recompute_nu(&dec, &p.center, c);
                    let fd = (eval_prox_dual(&up, &p, &dec) - eval_prox_dual(&dn, &p, &dec))
                        / (2.0 * eps);
                    assert!(
                        (fd - expected).abs() <= 1e-5 * (1.0 + expected.abs()),
                        "finite difference {fd} vs analytic {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn duality_bracket_holds_and_tightens() {
        // h_{μ,c}(extracted λ) ≤ f_{μ,c}(y) always; after enough passes the
        // two meet at the proximal saddle value.
        let dec = shared_var_dec([0.0, -3.0], [1.0, 2.0]);
        let p = ProxParams::new(MultiplierVector::zeros(&dec), 1.0);
        let ev = eval_dual(&dec, &MultiplierVector::zeros(&dec)).unwrap();
        let mut y = PrimalIterate::from_vertices(&dec, &ev.argmins, &p.center, p.weight);
        let mut cache = PlaneCache::new(&dec, DEFAULT_PLANE_HORIZON);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut clock = WallClock::new();
        for _ in 0..400 {
            mp_bcfw_iteration(&mut y, &p, &dec, &mut cache, &mut clock, &mut rng).unwrap();
            let f = eval_prox_dual(&y, &p, &dec);
            let lam = extract_lambda(&y, &p, &dec);
            let hp = eval_prox_primal(&lam, &p, &dec).unwrap();
            assert!(
                hp <= f + 1e-9,
                "duality bracket violated: h_prox={hp} > f={f}"
            );
        }
        let f = eval_prox_dual(&y, &p, &dec);
        let lam = extract_lambda(&y, &p, &dec);
        let hp = eval_prox_primal(&lam, &p, &dec).unwrap();
        assert!(
            f - hp <= 1e-6,
            "bracket did not close: f={f}, h_prox={hp}"
        );
    }

    #[test]
    fn exact_pass_follows_the_worked_sequence() {
        // Start at the x=0 vertex with c=1, μ=0: λ = 0, the oracle proposes
        // x=1 (cost −3), the step clips to 1, and the objective drops to −3.
        let dec = one_var_dec();
        let p = ProxParams::new(MultiplierVector::zeros(&dec), 1.0);
        let mut y = iterate(&dec, vec![vec![0.0]], vec![0.0], &p);
        let mut cache = PlaneCache::new(&dec, DEFAULT_PLANE_HORIZON);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        bcfw_exact_pass(&mut y, &p, &dec, &mut cache, &mut rng).unwrap();
        assert_eq!(y.y_star[0], vec![1.0]);
        assert_eq!(y.y_circ[0], -3.0);
        assert_eq!(y.nu, vec![1.0]);
        assert_eq!(eval_prox_dual(&y, &p, &dec), -3.0);
        assert_eq!(cache.len(0), 1);
    }

    #[test]
    fn passes_never_increase_the_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let dec = shared_var_dec(
                [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
                [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
            );
            let p = ProxParams::new(MultiplierVector::zeros(&dec), rng.gen_range(0.2..4.0));
            let ev = eval_dual(&dec, &MultiplierVector::zeros(&dec)).unwrap();
            let mut y = PrimalIterate::from_vertices(&dec, &ev.argmins, &p.center, p.weight);
            let mut cache = PlaneCache::new(&dec, DEFAULT_PLANE_HORIZON);
            let mut clock = WorkClock::new();
            let mut prev = eval_prox_dual(&y, &p, &dec);
            for _ in 0..30 {
                let stats =
                    mp_bcfw_iteration(&mut y, &p, &dec, &mut cache, &mut clock, &mut rng).unwrap();
                assert!(
                    stats.start_objective <= prev + 1e-9 * (1.0 + prev.abs()),
                    "trial {trial}: objective jumped between iterations"
                );
                let mut last = stats.start_objective;
                for &f in &stats.objectives {
                    assert!(
                        f <= last + 1e-9 * (1.0 + last.abs()),
                        "trial {trial}: pass increased f from {last} to {f}"
                    );
                    last = f;
                }
                prev = stats.final_objective();
            }
            // ν stays consistent to 1e-8 relative after all the increments.
            assert!(y.nu_drift(&dec, &p.center, p.weight) <= 1e-8);
        }
    }

    #[test]
    fn approx_pass_errors_on_empty_cache() {
        let dec = one_var_dec();
        let p = ProxParams::new(MultiplierVector::zeros(&dec), 1.0);
        let mut y = iterate(&dec, vec![vec![0.0]], vec![0.0], &p);
        let mut cache = PlaneCache::new(&dec, DEFAULT_PLANE_HORIZON);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match bcfw_approx_pass(&mut y, &p, &dec, &mut cache, &mut rng) {
            Err(FwError::EmptyCache { term: 0 }) => {}
            other => panic!("expected EmptyCache, got {:?}", other.err()),
        }
    }

    #[test]
    fn approx_value_dominates_exact_minimum() {
        // h̃_t(λ) ≥ h_t(λ) for any cache contents and multiplier.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dec = one_var_dec();
        let mut cache = PlaneCache::new(&dec, DEFAULT_PLANE_HORIZON);
        cache.insert(0, vec![0], 0.0);
        for _ in 0..1000 {
            let lam = [rng.gen_range(-10.0f64..10.0)];
            let (_, approx) = cache.best_value(0, &lam, &dec).unwrap();
            let oracle = dec.term(0).oracle();
            let (s, cost) = oracle.solve(&lam).unwrap();
            let exact = cost + oracle.inner_product(&lam, &s);
            assert!(approx >= exact - 1e-12);
        }
    }

    #[test]
    fn cache_dedupes_and_evicts_after_horizon() {
        let dec = one_var_dec();
        let mut cache = PlaneCache::new(&dec, 10);
        cache.insert(0, vec![0], 0.0);
        cache.insert(0, vec![0], 0.0);
        assert_eq!(cache.len(0), 1, "duplicate insert must not grow the cache");
        cache.insert(0, vec![1], -3.0);
        assert_eq!(cache.len(0), 2);
        // Ten idle iterations age both planes out; a fresh insert survives.
        for _ in 0..10 {
            cache.begin_iteration();
        }
        cache.insert(0, vec![1], -3.0); // refreshed at iteration 10
        cache.evict_stale();
        assert_eq!(cache.len(0), 1, "stale plane must be evicted at the horizon");
        assert_eq!(cache.planes(0)[0].labeling, vec![1]);
    }

    #[test]
    fn iteration_stops_when_the_rate_drops() {
        // The cache jumps straight to its best plane on the first approximate
        // pass; the second approximate pass finds nothing more, its rate
        // drops, and the iteration ends with exactly one or two approximate
        // passes recorded under the deterministic clock.
        let dec = shared_var_dec([0.0, -3.0], [1.0, 2.0]);
        let p = ProxParams::new(MultiplierVector::zeros(&dec), 1.0);
        let ev = eval_dual(&dec, &MultiplierVector::zeros(&dec)).unwrap();
        let mut y = PrimalIterate::from_vertices(&dec, &ev.argmins, &p.center, p.weight);
        let mut cache = PlaneCache::new(&dec, DEFAULT_PLANE_HORIZON);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut clock = WorkClock::new();
        let stats =
            mp_bcfw_iteration(&mut y, &p, &dec, &mut cache, &mut clock, &mut rng).unwrap();
        assert!(stats.num_passes() >= 2, "at least one approximate pass runs");
        let n = stats.num_passes();
        assert!(
            stats.ratios[n - 1] < stats.ratios[n - 2] || stats.ratios[n - 1] <= 0.0,
            "iteration must end on a rate drop: {:?}",
            stats.ratios
        );
        for k in 1..n - 1 {
            assert!(
                stats.ratios[k] >= stats.ratios[k - 1],
                "intermediate passes kept the rate up: {:?}",
                stats.ratios
            );
        }
        assert!(stats.elapsed.iter().all(|&dt| dt > 0.0));
    }

    #[test]
    fn stationary_iterate_terminates_after_one_approx_pass() {
        // y already the unique minimizer: the exact pass leaves f unchanged,
        // the first approximate pass cannot move either, and the zero rate
        // ends the iteration immediately.
        let dec = one_var_dec();
        let p = ProxParams::new(MultiplierVector::zeros(&dec), 1.0);
        let ev = eval_dual(&dec, &MultiplierVector::zeros(&dec)).unwrap();
        let mut y = PrimalIterate::from_vertices(&dec, &ev.argmins, &p.center, p.weight);
        // Drive to the proximal optimum first.
        let mut cache = PlaneCache::new(&dec, DEFAULT_PLANE_HORIZON);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut clock = WorkClock::new();
        for _ in 0..200 {
            mp_bcfw_iteration(&mut y, &p, &dec, &mut cache, &mut clock, &mut rng).unwrap();
        }
        let stats =
            mp_bcfw_iteration(&mut y, &p, &dec, &mut cache, &mut clock, &mut rng).unwrap();
        assert_eq!(
            stats.num_passes(),
            2,
            "converged iterate: exact pass + one zero-progress approximate pass"
        );
        let drop = stats.start_objective - stats.final_objective();
        assert!(drop.abs() <= 1e-12 * (1.0 + stats.start_objective.abs()));
    }
}
