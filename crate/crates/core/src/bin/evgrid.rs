use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use evgrid::analysis::{balance_report, efficiency_report, social_optimum, SolveMode};
use evgrid::costs::{potential, social_cost};
use evgrid::equilibrium::{enumerate_ne, random_profile, run_best_response_dynamics, DynamicsOptions, DEFAULT_BUDGET};
use evgrid::experiment::{run_experiment, ExperimentConfig, Mode, SweepAxes};
use evgrid::{Error, Result, Scenario};

/// Worker-count override; never changes results.
const WORKERS_VAR: &str = "EVGRID_WORKERS";

#[derive(Parser)]
#[command(name = "evgrid", version, about = "Routing and charging game for electric vehicles")]
struct Cli {
    /// Seed for multistart and stochastic modes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Assignment budget for enumeration and the optimum.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Minimum improvement that counts as a move in best-response dynamics.
    #[arg(long, global = true, default_value_t = 1e-6)]
    eps: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario.
    Validate { scenario: PathBuf },
    /// Run best-response dynamics to an equilibrium.
    Solve {
        scenario: PathBuf,
        /// Start from the k-th seeded random profile instead of the default one.
        #[arg(long)]
        start: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        max_rounds: usize,
    },
    /// List every pure equilibrium.
    Enumerate { scenario: PathBuf },
    /// Social optimum.
    Optimum { scenario: PathBuf },
    /// Optimum, equilibria, efficiency ratios and their bounds.
    Report {
        scenario: PathBuf,
        /// Use multistart dynamics even when enumeration is possible.
        #[arg(long)]
        approximate: bool,
        #[arg(long, default_value_t = 64)]
        starts: usize,
    },
    /// Parameter sweep.
    Sweep {
        scenario: PathBuf,
        /// ne, enumerate, optimum, poa, pos, balance or pt.
        #[arg(long, default_value = "poa")]
        mode: String,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Fleet size that guarantees the efficiency bound with high probability.
    Hoeffding {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        probability: f64,
    },
    /// Monte Carlo check of the sufficient event behind the fleet-size guarantee.
    Montecarlo {
        scenario: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Fleet size; defaults to the sized fleet.
        #[arg(long)]
        fleet: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        probability: f64,
    },
    /// Prospect-theoretic equilibria across parameter presets.
    Pt {
        scenario: PathBuf,
        #[command(flatten)]
        sweep: SweepArgs,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Fleet sizes, e.g. `2..9` or `2,4,6`.
    #[arg(long)]
    fleet: Option<String>,
    /// Pricing exponents, fractions allowed, e.g. `2/3,4/3,2,8/3`.
    #[arg(long)]
    pricing: Option<String>,
    /// Congestion exponents, e.g. `1,2`.
    #[arg(long)]
    latency: Option<String>,
    /// Prospect presets, e.g. `A,B,C,D,E,RN`.
    #[arg(long)]
    presets: Option<String>,
    /// Prospect distortion overrides.
    #[arg(long)]
    distortions: Option<String>,
    #[arg(long, default_value_t = 64)]
    starts: usize,
    #[arg(long, default_value_t = 10_000)]
    max_rounds: usize,
    #[arg(long, default_value_t = 10_000)]
    max_cells: usize,
}

fn parse_number(s: &str) -> Result<f64> {
    let bad = || Error::validation("axis", format!("cannot parse number `{s}`"));
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_number).collect()
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::validation("fleet", format!("cannot parse fleet sizes `{s}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: usize = a.parse().map_err(|_| bad())?;
                let b: usize = b.trim_start_matches('=').parse().map_err(|_| bad())?;
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

impl SweepArgs {
    fn axes(&self) -> Result<SweepAxes> {
        let list = |s: &Option<String>| s.as_deref().map_or(Ok(Vec::new()), parse_numbers);
        Ok(SweepAxes {
            fleet_sizes: self.fleet.as_deref().map_or(Ok(Vec::new()), parse_sizes)?,
            pricing_exponents: list(&self.pricing)?,
            latency_exponents: list(&self.latency)?,
            presets: self
                .presets
                .as_deref()
                .map(|s| s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect())
                .unwrap_or_default(),
            distortions: list(&self.distortions)?,
        })
    }
}

fn emit(out: Option<&Path>, name: &str, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{name}.json")), text + "\n")?;
    }
    Ok(())
}

fn experiment(cli: &Cli, scenario: &Path, mode: Mode, sweep: Option<&SweepArgs>) -> Result<i32> {
    let s = Scenario::load(scenario)?;
    let mut cfg = ExperimentConfig::new(mode, cli.out.clone().unwrap_or_else(|| PathBuf::from("evgrid-out")));
    cfg.seed = cli.seed;
    cfg.solver.budget = cli.budget;
    cfg.solver.eps = cli.eps;
    if let Some(a) = sweep {
        cfg.axes = a.axes()?;
        cfg.solver.starts = a.starts;
        cfg.solver.max_rounds = a.max_rounds;
        cfg.solver.max_cells = a.max_cells;
    }
    match &cli.command {
        Command::Hoeffding { probability, .. } => cfg.probability = *probability,
        Command::Montecarlo { trials, fleet, probability, .. } => {
            cfg.trials = *trials;
            cfg.fleet = *fleet;
            cfg.probability = *probability;
        }
        _ => {}
    }
    let outcome = run_experiment(&s, &cfg)?;
    println!("{}", outcome.results.header.join(","));
    for r in &outcome.results.rows {
        println!("{}", r.join(","));
    }
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    if outcome.failures > 0 {
        eprintln!("{} cell(s) failed", outcome.failures);
        return Ok(4);
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<i32> {
    let out = cli.out.as_deref();
    let dynamics = |max_rounds: usize| DynamicsOptions { eps: cli.eps, max_rounds, ..DynamicsOptions::default() };
    match &cli.command {
        Command::Validate { scenario } => {
            let s = Scenario::load(scenario)?;
            println!(
                "ok: {} vehicles, {} stations, {} routes, {} assignments",
                s.n(),
                s.real_station_count(),
                s.routes.len(),
                s.assignment_count()
            );
        }
        Command::Solve { scenario, start, max_rounds } => {
            let s = Scenario::load(scenario)?;
            let initial = match start {
                Some(k) => random_profile(&s, cli.seed.unwrap_or(0), *k),
                None => s.default_profile(),
            };
            let trace = run_best_response_dynamics(&s, &initial, &dynamics(*max_rounds))?;
            let value = json!({
                "converged": trace.converged,
                "rounds": trace.rounds,
                "moves": trace.moves.len(),
                "social_cost": social_cost(&s, &trace.terminal),
                "potential": potential(&s, &trace.terminal),
                "balance": balance_report(&s, &trace.terminal)?,
                "terminal": trace.terminal,
            });
            emit(out, "solve", &value)?;
        }
        Command::Enumerate { scenario } => {
            let s = Scenario::load(scenario)?;
            emit(out, "enumerate", &enumerate_ne(&s, cli.budget)?)?;
        }
        Command::Optimum { scenario } => {
            let s = Scenario::load(scenario)?;
            emit(out, "optimum", &social_optimum(&s, cli.budget)?)?;
        }
        Command::Report { scenario, approximate, starts } => {
            let s = Scenario::load(scenario)?;
            let seed = cli.seed.unwrap_or(0);
            let mode = if *approximate {
                SolveMode::Approximate { budget: cli.budget, starts: *starts, seed, dynamics: dynamics(10_000) }
            } else {
                SolveMode::Auto { budget: cli.budget, starts: *starts, seed, dynamics: dynamics(10_000) }
            };
            let r = efficiency_report(&s, &mode)?;
            let value = json!({
                "bounds": r.bounds,
                "poa_label": if r.bounds.exact { "exact" } else { "lower bound on PoA" },
                "optimum": r.optimum,
                "worst": r.worst,
                "best": r.best,
                "worst_balance": balance_report(&s, &r.worst.profile)?,
            });
            emit(out, "report", &value)?;
        }
        Command::Sweep { scenario, mode, sweep } => {
            let m = Mode::parse(mode).ok_or_else(|| Error::validation("mode", format!("unknown mode `{mode}`")))?;
            return experiment(cli, scenario, m, Some(sweep));
        }
        Command::Hoeffding { scenario, .. } => return experiment(cli, scenario, Mode::Hoeffding, None),
        Command::Montecarlo { scenario, .. } => return experiment(cli, scenario, Mode::MonteCarlo, None),
        Command::Pt { scenario, sweep } => return experiment(cli, scenario, Mode::Pt, Some(sweep)),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var(WORKERS_VAR).ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
