//! MAP inference for decomposable energies.
//!
//! This crate minimizes Boolean energies of the form `f(x) = Σ_t f_t(x_{A_t})`
//! by maximizing the Lagrangean-decomposition dual bound.  The main solver
//! ([`proximal::solve`]) is a proximal bundle method whose subproblems are
//! solved by multi-plane block-coordinate Frank-Wolfe passes ([`bcfw`]); a
//! projected-supergradient baseline ([`subgradient::solve_sa`]) shares the
//! same problem representation and trace format.
//!
//! Terms are accessed only through exact minimization oracles
//! ([`model::MinOracle`]); the crate ships three structured ones — tree MRFs
//! ([`mrf`]), projection-row constraints for discrete tomography
//! ([`tomography`]) and injective matchings ([`matching`]) — plus an
//! enumerated fallback ([`explicit`]).  Instance parsers, the trace writer
//! and the CLI run configuration live in [`io`].
//!
//! See the crate examples for end-to-end usage:
//! `cargo run --example solve_mrf` is a good starting point.

pub mod bcfw;
pub mod clock;
pub mod explicit;
pub mod io;
pub mod matching;
pub mod model;
pub mod mrf;
pub mod proximal;
pub mod subgradient;
pub mod tomography;

pub use bcfw::{
    bcfw_approx_pass, bcfw_exact_pass, eval_prox_dual, eval_prox_primal, extract_lambda,
    mp_bcfw_iteration, step_size, FwError, PassStats, PlaneCache, ProxParams,
    DEFAULT_PLANE_HORIZON,
};
pub use clock::{Clock, ClockKind, WallClock, WorkClock};
pub use model::{
    eval_dual, CompactLabeling, Decomposition, DualEval, MinOracle, ModelError, MultiplierVector,
    OracleError, PrimalIterate, Term, TermSlot,
};
