//! Command-line front end: `fwmap solve <instance> --type mrf --budget-s 10`.
//!
//! Thin wrapper over the library: parse an instance file, build its
//! decomposition, run one solver, print a short summary and optionally
//! write the evaluation trace as CSV.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fwmap::clock::ClockKind;
use fwmap::io;
use fwmap::matching::build_matching_decomposition;
use fwmap::model::Decomposition;
use fwmap::mrf::build_mrf_decomposition;
use fwmap::proximal::{self, GapThresholds, InitVertex, SolveOptions};
use fwmap::subgradient::{self, SaOptions};
use fwmap::tomography::{build_tomography_decomposition, ConvKind};

#[derive(Parser)]
#[command(
    name = "fwmap",
    version,
    about = "Dual bounds for decomposable MAP problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the dual lower bound of an instance.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InstanceKind {
    /// Pairwise MRF in UAI MARKOV format.
    Mrf,
    /// Discrete tomography (TOMO header plus ROW lines).
    Tomo,
    /// Graph matching (p/a/e lines).
    Gm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    /// Proximal bundle with multi-plane block-coordinate Frank-Wolfe.
    Fwmap,
    /// Projected supergradient baseline with Polyak steps.
    Sa,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitVertexArg {
    /// Seed each term with its minimizer at zero multipliers.
    Min,
    /// Seed each term with its maximizer instead.
    Max,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file.
    instance: PathBuf,
    /// Instance format.
    #[arg(long = "type", value_enum)]
    kind: InstanceKind,
    /// Solver to run.
    #[arg(long, value_enum, default_value_t = Solver::Fwmap)]
    solver: Solver,
    /// Time budget in seconds.
    #[arg(long = "budget-s")]
    budget_s: Option<f64>,
    /// Iteration cap (fwmap) or step cap (sa); defaults to 1000 iterations
    /// or 10000 steps when no budget is given.
    #[arg(long = "max-iters")]
    max_iters: Option<u64>,
    /// Seed of the pass-order shuffles (fwmap).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Proximal weight c; defaults to 1.5e6/(T+22)² for T terms (fwmap).
    #[arg(long = "prox-weight")]
    prox_weight: Option<f64>,
    /// Vertex seeding the fractional iterate (fwmap).
    #[arg(long = "init-vertex", value_enum, default_value_t = InitVertexArg::Min)]
    init_vertex: InitVertexArg,
    /// Pruned min-convolutions in the tomography row oracles.
    #[arg(long = "fast-conv")]
    fast_conv: bool,
    /// Stop once both gaps fall to this threshold (fwmap).
    #[arg(long = "gap-eps")]
    gap_eps: Option<f64>,
    /// Deterministic work-unit clock instead of wall time.
    #[arg(long = "work-clock")]
    work_clock: bool,
    /// Write the evaluation trace to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Solve(args) = cli.command;
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn build(args: &SolveArgs, text: &str) -> Result<(Decomposition, &'static str), String> {
    match args.kind {
        InstanceKind::Mrf => {
            let inst = io::parse_mrf(text).map_err(|e| e.to_string())?;
            let (dec, _) = build_mrf_decomposition(&inst).map_err(|e| e.to_string())?;
            Ok((dec, "mrf"))
        }
        InstanceKind::Tomo => {
            let inst = io::parse_tomography(text).map_err(|e| e.to_string())?;
            let conv = if args.fast_conv {
                ConvKind::Pruned
            } else {
                ConvKind::Naive
            };
            let (dec, _) = build_tomography_decomposition(&inst, conv).map_err(|e| e.to_string())?;
            Ok((dec, "tomo"))
        }
        InstanceKind::Gm => {
            let inst = io::parse_graph_matching(text).map_err(|e| e.to_string())?;
            let (dec, _) = build_matching_decomposition(&inst).map_err(|e| e.to_string())?;
            Ok((dec, "gm"))
        }
    }
}

fn run(args: &SolveArgs) -> Result<(), String> {
    let text = fs::read_to_string(&args.instance)
        .map_err(|e| format!("{}: {e}", args.instance.display()))?;
    let (dec, kind) = build(args, &text)?;
    println!(
        "instance: {} ({kind}, {} terms, {} variables)",
        args.instance.display(),
        dec.num_terms(),
        dec.num_vars()
    );

    let clock = if args.work_clock {
        ClockKind::Work
    } else {
        ClockKind::Wall
    };
    let trace = match args.solver {
        Solver::Fwmap => {
            let options = SolveOptions {
                budget_seconds: args.budget_s,
                max_iterations: match (args.max_iters, args.budget_s) {
                    (Some(m), _) => Some(m),
                    (None, Some(_)) => None,
                    (None, None) => Some(1000),
                },
                prox_weight: args.prox_weight,
                seed: args.seed,
                init_vertex: match args.init_vertex {
                    InitVertexArg::Min => InitVertex::Min,
                    InitVertexArg::Max => InitVertex::Max,
                },
                gap_stop: args.gap_eps.map(|eps| GapThresholds { a: eps, b: eps }),
                clock,
                ..SolveOptions::default()
            };
            let result = proximal::solve(&dec, &options).map_err(|e| e.to_string())?;
            println!("solver: fwmap (prox weight {:.6e})", result.prox_weight);
            println!("h_best: {:.12}", result.best_bound);
            if let Some(last) = result.trace.last() {
                println!("gaps: A {:.3e}, B {:.3e}", last.a_gap, last.b_gap);
            }
            println!(
                "iterations: {} ({})",
                result.iterations,
                match result.stop {
                    proximal::StopReason::Budget => "budget",
                    proximal::StopReason::IterationCap => "iteration cap",
                    proximal::StopReason::Gap => "gap converged",
                }
            );
            result.trace
        }
        Solver::Sa => {
            let options = SaOptions {
                max_steps: args.max_iters.unwrap_or(10_000),
                budget_seconds: args.budget_s,
                clock,
                ..SaOptions::default()
            };
            let result = subgradient::solve_sa(&dec, &options).map_err(|e| e.to_string())?;
            println!("solver: sa");
            println!("h_best: {:.12}", result.best_bound);
            println!(
                "steps: {} ({})",
                result.steps,
                match result.stop {
                    subgradient::SaStop::MaxSteps => "step cap",
                    subgradient::SaStop::Budget => "budget",
                    subgradient::SaStop::ZeroGradient => "zero supergradient",
                }
            );
            result.trace
        }
    };

    if let Some(path) = &args.trace {
        fs::write(path, io::write_trace(&trace)).map_err(|e| format!("{}: {e}", path.display()))?;
        println!("trace: {} ({} records)", path.display(), trace.len());
    }
    Ok(())
}
