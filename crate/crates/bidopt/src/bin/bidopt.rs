//! Command-line front end: build targeting groups, solve, construct mixed
//! strategies, verify, run the brute-force oracle and the auction simulator.

use bidopt::error::{Error, Result};
use bidopt::io::{self, Strategy};
use bidopt::market::{self, ProblemInstance};
use bidopt::oracle::{grid_pure_optimum, GridSpec};
use bidopt::single_group;
use bidopt::solver::{self, B1Choice};
use clap::{Parser, Subcommand};
use serde_json::json;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "bidopt", about = "Bidding strategy optimizer for second-price auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition request types into targeting groups and write a normalized instance.
    BuildGroups {
        /// Criteria-form instance JSON (campaigns with criteria, per-type curves).
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the decomposition solver; writes components, allocation and bounds.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the two-bid mixed strategy from the solver's decomposition.
    Mixed {
        #[arg(long)]
        instance: PathBuf,
        /// Pick, per group, the flat-region left endpoint (exact floor on step curves).
        #[arg(long, conflicts_with = "delta")]
        auto_b1: bool,
        /// Use b1 = price − delta per component.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form solution for a one-campaign one-group instance.
    Single {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-cost a solution or strategy, check feasibility and sufficient conditions.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        /// Solution JSON from `solve`, or a strategy JSON.
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force grid search over pure allocations.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 20)]
        gamma_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a strategy against synthetic auction streams.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        replications: u64,
        /// Draw request counts from a Poisson with the curve's max volume as mean.
        #[arg(long)]
        poisson: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, payload: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, payload)
            .map_err(|e| Error::Domain(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{payload}");
            Ok(())
        }
    }
}

fn load_instance(path: &PathBuf) -> Result<ProblemInstance> {
    io::parse_instance(&read(path)?)
}

fn solve_to_dto(instance: &ProblemInstance) -> Result<(io::SolutionDto, solver::Decomposition)> {
    let decomposition = solver::decompose(instance)?;
    let allocation = solver::build_allocation(&decomposition);
    let lower = solver::lower_bound(&decomposition, instance);
    let cost = market::pure_cost(instance, &allocation)?;
    let gap = solver::gap_bound(&decomposition, instance);
    Ok((io::solution_to_dto(&decomposition, &allocation, lower, cost, gap), decomposition))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildGroups { instance, out } => {
            let inst = load_instance(&instance)?;
            emit(&out, &io::instance_to_json(&inst))
        }
        Command::Solve { instance, out } => {
            let inst = load_instance(&instance)?;
            let (dto, _) = solve_to_dto(&inst)?;
            emit(&out, &serde_json::to_string_pretty(&dto).unwrap())
        }
        Command::Mixed { instance, auto_b1, delta, out } => {
            let inst = load_instance(&instance)?;
            let (_, decomposition) = solve_to_dto(&inst)?;
            let choice = match (auto_b1, delta) {
                (_, Some(d)) => B1Choice::Delta(d),
                _ => B1Choice::Auto,
            };
            let strategy = solver::build_mixed(&decomposition, &inst, &choice)?;
            let cost = market::mixed_cost(&inst, &strategy)?;
            let payload = json!({
                "cost": cost,
                "lower_bound": solver::lower_bound(&decomposition, &inst),
                "strategy": io::strategy_to_dto(&Strategy::Mixed(strategy)),
            });
            emit(&out, &serde_json::to_string_pretty(&payload).unwrap())
        }
        Command::Single { instance, out } => {
            let inst = load_instance(&instance)?;
            if inst.campaigns.len() != 1 || inst.groups.len() != 1 {
                return Err(Error::Schema(
                    "single expects exactly one campaign and one group".into(),
                ));
            }
            let solution =
                single_group::solve_single(&inst.groups[0].curve, inst.campaigns[0].impressions)?;
            emit(&out, &serde_json::to_string_pretty(&solution).unwrap())
        }
        Command::Verify { instance, strategy, out } => {
            let inst = load_instance(&instance)?;
            let text = read(&strategy)?;
            let parsed = match io::parse_solution(&text) {
                Ok(solution) => io::strategy_from_dto(solution.allocation)?,
                Err(_) => io::parse_strategy(&text)?,
            };
            let mixed = parsed.as_mixed();
            let feasibility = market::check_feasible(&inst, &mixed)?;
            let cost = market::mixed_cost(&inst, &mixed)?;
            let verification = match &parsed {
                Strategy::Pure(alloc) => Some(solver::verify_sufficient(&inst, alloc)?),
                Strategy::Mixed(_) => None,
            };
            let payload = json!({
                "pure_cost": cost,
                "feasible": feasibility.pass,
                "campaigns": feasibility.campaigns,
                "groups": feasibility.groups,
                "verification": verification,
            });
            emit(&out, &serde_json::to_string_pretty(&payload).unwrap())
        }
        Command::Oracle { instance, gamma_steps, out } => {
            let inst = load_instance(&instance)?;
            let spec = GridSpec { gamma_steps, ..Default::default() };
            let result = grid_pure_optimum(&inst, &spec)?;
            let payload = json!({
                "cost": result.cost,
                "allocation": io::strategy_to_dto(&Strategy::Pure(result.allocation)),
                "states_searched": result.states_searched,
                "slack": result.slack,
            });
            emit(&out, &serde_json::to_string_pretty(&payload).unwrap())
        }
        Command::Simulate { instance, strategy, seed, replications, poisson, out } => {
            let inst = load_instance(&instance)?;
            let parsed = io::parse_strategy(&read(&strategy)?)?;
            let report =
                bidopt::auction_sim::run(&inst, &parsed.as_mixed(), seed, replications, poisson)?;
            emit(&out, &serde_json::to_string_pretty(&report).unwrap())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
