//! Sweep orchestration and result files.
//!
//! A sweep is the cross product of its axes. Cells run one after another in
//! sorted key order (each cell parallelizes internally), so result files do
//! not depend on the worker count. Wall-clock time is written to a separate
//! file so that result files stay byte-identical across reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::analysis::{balance_report, efficiency_report, social_optimum, SolveMode};
use crate::costs::social_cost;
use crate::equilibrium::{enumerate_ne, random_profile, run_best_response_dynamics, DynamicsOptions, DEFAULT_BUDGET, DEFAULT_STARTS};
use crate::error::{Error, Result};
use crate::model::{Profile, Scenario};
use crate::prospect::{pt_best_response_dynamics, PtModel, PtParams};
use crate::stochastic::{hoeffding_fleet_size, monte_carlo_guarantee, GroundModel, DEFAULT_SUPPORT_BOUND};

/// What each sweep cell computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Dynamics from the default profile, with balance figures.
    Ne,
    Enumerate,
    Optimum,
    Poa,
    Pos,
    Balance,
    Hoeffding,
    MonteCarlo,
    Pt,
}

impl Mode {
    pub fn parse(name: &str) -> Option<Mode> {
        Some(match name {
            "ne" => Mode::Ne,
            "enumerate" => Mode::Enumerate,
            "optimum" => Mode::Optimum,
            "poa" => Mode::Poa,
            "pos" => Mode::Pos,
            "balance" => Mode::Balance,
            "hoeffding" => Mode::Hoeffding,
            "monte-carlo" | "montecarlo" => Mode::MonteCarlo,
            "pt" => Mode::Pt,
            _ => return None,
        })
    }

    /// Modes whose output depends on the seed.
    pub fn needs_seed(self) -> bool {
        matches!(self, Mode::Ne | Mode::Poa | Mode::Pos | Mode::Balance | Mode::MonteCarlo | Mode::Pt)
    }
}

/// Sweep axes; an empty axis means "keep the scenario's value".
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepAxes {
    pub fleet_sizes: Vec<usize>,
    pub pricing_exponents: Vec<f64>,
    pub latency_exponents: Vec<f64>,
    /// Named prospect parameter sets (prospect mode only).
    pub presets: Vec<String>,
    /// Overrides of the presets' distortion `c` (prospect mode only).
    pub distortions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    pub eps: f64,
    pub max_rounds: usize,
    pub starts: usize,
    /// Assignment budget for enumeration and the optimum.
    pub budget: u64,
    /// Maximum number of sweep cells.
    pub max_cells: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let d = DynamicsOptions::default();
        SolverOptions { eps: d.eps, max_rounds: d.max_rounds, starts: DEFAULT_STARTS, budget: DEFAULT_BUDGET, max_cells: 10_000 }
    }
}

impl SolverOptions {
    fn dynamics(&self) -> DynamicsOptions {
        DynamicsOptions { eps: self.eps, max_rounds: self.max_rounds, ..DynamicsOptions::default() }
    }

    fn solve_mode(&self, seed: u64) -> SolveMode {
        SolveMode::Auto { budget: self.budget, starts: self.starts, seed, dynamics: self.dynamics() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub axes: SweepAxes,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub solver: SolverOptions,
    /// Failure probability for fleet sizing.
    pub probability: f64,
    pub trials: usize,
    /// Fleet size for Monte Carlo; defaults to the sized fleet.
    pub fleet: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            mode,
            axes: SweepAxes::default(),
            seed: None,
            out: out.into(),
            solver: SolverOptions::default(),
            probability: 0.05,
            trials: 10_000,
            fleet: None,
        }
    }
}

/// Key of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub pricing_k: f64,
    pub latency_d: f64,
    pub preset: Option<String>,
    pub distortion: Option<f64>,
}

impl Cell {
    fn key(&self) -> Vec<String> {
        let mut key = vec![self.n.to_string(), fmt_num(self.pricing_k), fmt_num(self.latency_d)];
        if let Some(p) = &self.preset {
            key.push(p.clone());
            key.push(self.distortion.map_or(String::new(), fmt_num));
        }
        key
    }
}

/// One result table: header and formatted rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    /// Index of column `name`.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn write(&self, path: &Path, comments: &[&str]) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        for c in comments {
            buf.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header).map_err(csv_err)?;
            for r in &self.rows {
                w.write_record(r).map_err(csv_err)?;
            }
            w.flush()?;
        }
        fs::write(path, buf)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Formats with 12 significant digits, without trailing zeros.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or(String::new(), fmt_num)
}

/// Result of a run: the tables written and the number of failed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub results: Table,
    pub failures: usize,
    pub files: Vec<PathBuf>,
}

const FLEET_HEADER: &[&str] = &[
    "n",
    "pricing_k",
    "latency_d",
    "status",
    "exact",
    "ne_count",
    "dyn_rounds",
    "dyn_converged",
    "dyn_social_cost",
    "worst_ne_cost",
    "best_ne_cost",
    "opt",
    "poa",
    "poa_bound",
    "pos",
    "pos_bound",
    "bounds_apply",
    "v0_all",
    "vne_all",
    "v0_bad",
    "vne_bad",
    "improvement_percent",
    "total_abs_load",
];

const PT_HEADER: &[&str] = &[
    "n",
    "pricing_k",
    "latency_d",
    "preset",
    "c",
    "status",
    "ne_count",
    "max_rounds_used",
    "worst_ne_cost",
    "opt",
    "poa_lower_bound",
    "total_induced_load",
    "total_abs_load",
];

fn cells(base: &Scenario, cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let axes = &cfg.axes;
    let scenario_k = base.real_stations().first().and_then(|st| st.pricing.exponent()).unwrap_or(2.0);
    let scenario_d = base.network.edges.first().map_or(1.0, |e| e.latency.d);
    let fleet = if axes.fleet_sizes.is_empty() { vec![base.n()] } else { axes.fleet_sizes.clone() };
    let ks = if axes.pricing_exponents.is_empty() { vec![scenario_k] } else { axes.pricing_exponents.clone() };
    let ds = if axes.latency_exponents.is_empty() { vec![scenario_d] } else { axes.latency_exponents.clone() };
    let presets: Vec<Option<String>> = if cfg.mode == Mode::Pt {
        if axes.presets.is_empty() {
            vec![None]
        } else {
            axes.presets.iter().cloned().map(Some).collect()
        }
    } else {
        vec![None]
    };
    let distortions: Vec<Option<f64>> =
        if cfg.mode == Mode::Pt && !axes.distortions.is_empty() { axes.distortions.iter().copied().map(Some).collect() } else { vec![None] };
    let size = fleet.len() * ks.len() * ds.len() * presets.len() * distortions.len();
    if size > cfg.solver.max_cells {
        return Err(Error::BudgetExceeded { needed: size as f64, budget: cfg.solver.max_cells as u64 });
    }
    let mut out = Vec::with_capacity(size);
    for &n in &fleet {
        for &k in &ks {
            for &d in &ds {
                for p in &presets {
                    for &c in &distortions {
                        out.push(Cell { n, pricing_k: k, latency_d: d, preset: p.clone(), distortion: c });
                    }
                }
            }
        }
    }
    let by = |a: f64, b: f64| a.total_cmp(&b);
    out.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then(by(a.pricing_k, b.pricing_k))
            .then(by(a.latency_d, b.latency_d))
            .then(a.preset.cmp(&b.preset))
            .then(a.distortion.unwrap_or(f64::NAN).total_cmp(&b.distortion.unwrap_or(f64::NAN)))
    });
    Ok(out)
}

fn cell_scenario(base: &Scenario, cell: &Cell) -> Result<Scenario> {
    base.with_fleet_size(cell.n)?.with_pricing_exponent(cell.pricing_k)?.with_latency_exponent(cell.latency_d)
}

fn fleet_row(base: &Scenario, cell: &Cell, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<String>> {
    let s = cell_scenario(base, cell)?;
    let mut v: Vec<String> = vec![String::new(); FLEET_HEADER.len()];
    let set = |v: &mut Vec<String>, name: &str, val: String| {
        let i = FLEET_HEADER.iter().position(|h| *h == name).expect("known column");
        v[i] = val;
    };
    set(&mut v, "n", cell.n.to_string());
    set(&mut v, "pricing_k", fmt_num(cell.pricing_k));
    set(&mut v, "latency_d", fmt_num(cell.latency_d));
    set(&mut v, "status", "ok".into());
    let dyn_needed = matches!(cfg.mode, Mode::Ne | Mode::Balance | Mode::Poa | Mode::Pos);
    if dyn_needed {
        let trace = run_best_response_dynamics(&s, &s.default_profile(), &cfg.solver.dynamics())?;
        let b = balance_report(&s, &trace.terminal)?;
        set(&mut v, "dyn_rounds", trace.rounds.to_string());
        set(&mut v, "dyn_converged", trace.converged.to_string());
        set(&mut v, "dyn_social_cost", fmt_num(social_cost(&s, &trace.terminal)));
        set(&mut v, "v0_all", fmt_num(b.v0_all));
        set(&mut v, "vne_all", fmt_num(b.vne_all));
        set(&mut v, "v0_bad", fmt_num(b.v0_bad));
        set(&mut v, "vne_bad", fmt_num(b.vne_bad));
        set(&mut v, "improvement_percent", fmt_num(b.improvement_percent));
        set(&mut v, "total_abs_load", fmt_num(b.total_abs_load));
    }
    match cfg.mode {
        Mode::Enumerate => {
            let ne = enumerate_ne(&s, cfg.solver.budget)?;
            let costs: Vec<f64> = ne.iter().map(|e| e.social_cost).collect();
            set(&mut v, "exact", "true".into());
            set(&mut v, "ne_count", ne.len().to_string());
            set(&mut v, "worst_ne_cost", opt_num(costs.iter().copied().reduce(f64::max)));
            set(&mut v, "best_ne_cost", opt_num(costs.iter().copied().reduce(f64::min)));
        }
        Mode::Optimum => set(&mut v, "opt", fmt_num(social_optimum(&s, cfg.solver.budget)?.value)),
        Mode::Poa | Mode::Pos => {
            let r = efficiency_report(&s, &cfg.solver.solve_mode(seed))?.bounds;
            set(&mut v, "exact", r.exact.to_string());
            set(&mut v, "ne_count", r.ne_count.to_string());
            set(&mut v, "worst_ne_cost", fmt_num(r.worst_ne_cost));
            set(&mut v, "best_ne_cost", fmt_num(r.best_ne_cost));
            set(&mut v, "opt", fmt_num(r.opt));
            set(&mut v, "poa", fmt_num(r.poa_empirical));
            set(&mut v, "poa_bound", fmt_num(r.poa_bound));
            set(&mut v, "pos", fmt_num(r.pos_empirical));
            set(&mut v, "pos_bound", fmt_num(r.pos_bound));
            set(&mut v, "bounds_apply", r.bounds_apply.to_string());
        }
        _ => {}
    }
    Ok(v)
}

/// Worst prospect equilibrium found by multistart dynamics, priced by the
/// classical social cost at the mean ground load, against the optimum there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtSummary {
    pub terminals: Vec<Profile>,
    pub max_rounds_used: usize,
    pub worst_ne_cost: f64,
    pub worst: Profile,
    pub opt: f64,
    /// Worst found over optimum; a lower bound on the true ratio.
    pub poa_lower_bound: f64,
    /// Sum of squared residuals `(mean g_j - L_j)^2` at the worst profile.
    pub total_induced_load: f64,
    pub total_abs_load: f64,
}

pub fn pt_summary(s: &Scenario, model: &PtModel, starts: usize, seed: u64, opts: &DynamicsOptions, budget: u64) -> Result<PtSummary> {
    use rayon::prelude::*;
    let traces: Vec<Option<(Profile, usize)>> = (0..starts as u64)
        .into_par_iter()
        .map(|k| match pt_best_response_dynamics(model, s, &random_profile(s, seed, k), opts) {
            Ok(t) => Ok(Some((t.terminal, t.rounds))),
            Err(Error::NotConverged(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut terminals: Vec<Profile> = Vec::new();
    let mut max_rounds_used = 0;
    for (p, rounds) in traces.into_iter().flatten() {
        max_rounds_used = max_rounds_used.max(rounds);
        if terminals.iter().all(|t| t.assignment() != p.assignment()) {
            terminals.push(p);
        }
    }
    if terminals.is_empty() {
        return Err(Error::NoNeFound);
    }
    let mean = s.with_ground(&model.mean_ground(s))?;
    let (worst, worst_ne_cost) = terminals
        .iter()
        .map(|p| (p, social_cost(&mean, p)))
        .fold(None::<(&Profile, f64)>, |acc, (p, c)| match acc {
            Some((_, w)) if w >= c => acc,
            _ => Some((p, c)),
        })
        .expect("nonempty");
    let worst = worst.clone();
    let opt = social_optimum(&mean, budget)?.value;
    let b = balance_report(&mean, &worst)?;
    Ok(PtSummary {
        terminals,
        max_rounds_used,
        worst_ne_cost,
        worst,
        opt,
        poa_lower_bound: worst_ne_cost / opt,
        total_induced_load: b.vne_all,
        total_abs_load: b.total_abs_load,
    })
}

fn pt_row(base: &Scenario, cell: &Cell, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<String>> {
    let s = cell_scenario(base, cell)?;
    let mut params = match &cell.preset {
        Some(name) => Some(
            PtParams::preset(name).ok_or_else(|| Error::validation("presets", format!("unknown preset {name}")))?,
        ),
        None => None,
    };
    if let Some(c) = cell.distortion {
        let p = params.or(s.prospect.as_ref().map(|o| o.params)).unwrap_or(PtParams::RISK_NEUTRAL);
        params = Some(p.with_distortion(c).map_err(|m| Error::validation("distortions", m))?);
    }
    let model = PtModel::from_scenario(&s, params)?;
    let r = pt_summary(&s, &model, cfg.solver.starts, seed, &cfg.solver.dynamics(), cfg.solver.budget)?;
    Ok(vec![
        cell.n.to_string(),
        fmt_num(cell.pricing_k),
        fmt_num(cell.latency_d),
        cell.preset.clone().unwrap_or_default(),
        fmt_num(model.params[0].c),
        "ok".into(),
        r.terminals.len().to_string(),
        r.max_rounds_used.to_string(),
        fmt_num(r.worst_ne_cost),
        fmt_num(r.opt),
        fmt_num(r.poa_lower_bound),
        fmt_num(r.total_induced_load),
        fmt_num(r.total_abs_load),
    ])
}

fn status_of(e: &Error) -> String {
    let kind = match e {
        Error::Validation { .. } | Error::Json(_) => "validation",
        Error::BudgetExceeded { .. } | Error::PathExplosion { .. } => "budget",
        Error::NotConverged(_) => "not_converged",
        Error::UnsupportedPricing { .. } => "unsupported_pricing",
        _ => "error",
    };
    format!("{kind}: {e}").replace(['\n', ','], " ")
}

fn failure_row(header: &[&str], cell: &Cell, e: &Error) -> Vec<String> {
    let mut v = vec![String::new(); header.len()];
    let key = cell.key();
    for (slot, value) in v.iter_mut().zip(key.iter().take(3)) {
        *slot = value.clone();
    }
    if let Some(i) = header.iter().position(|h| *h == "preset") {
        v[i] = cell.preset.clone().unwrap_or_default();
    }
    if let Some(i) = header.iter().position(|h| *h == "c") {
        v[i] = opt_num(cell.distortion);
    }
    let i = header.iter().position(|h| *h == "status").expect("status column");
    v[i] = status_of(e);
    v
}

fn require_seed(cfg: &ExperimentConfig) -> Result<u64> {
    match cfg.seed {
        Some(s) => Ok(s),
        None if cfg.mode.needs_seed() => Err(Error::validation("seed", "this mode needs an explicit seed")),
        None => Ok(0),
    }
}

/// Runs `cfg` on `base` and writes `results.csv`, `timing.csv` and the plot
/// files of the mode into `cfg.out`.
pub fn run_experiment(base: &Scenario, cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let seed = require_seed(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    let mut timing = Table::new(&["cell", "wall_seconds"]);
    let (results, failures) = match cfg.mode {
        Mode::Hoeffding | Mode::MonteCarlo => (stochastic_table(base, cfg, seed)?, 0),
        mode => {
            let header = if mode == Mode::Pt { PT_HEADER } else { FLEET_HEADER };
            let mut table = Table::new(header);
            let mut failures = 0;
            for cell in cells(base, cfg)? {
                let start = Instant::now();
                let row = if mode == Mode::Pt { pt_row(base, &cell, cfg, seed) } else { fleet_row(base, &cell, cfg, seed) };
                let row = row.unwrap_or_else(|e| {
                    failures += 1;
                    failure_row(header, &cell, &e)
                });
                timing.rows.push(vec![cell.key().join("/"), format!("{:.3}", start.elapsed().as_secs_f64())]);
                table.rows.push(row);
            }
            (table, failures)
        }
    };
    let mut files = Vec::new();
    let results_path = cfg.out.join("results.csv");
    results.write(&results_path, &[])?;
    files.push(results_path);
    for (name, table, comments) in plot_tables(cfg.mode, &results) {
        let path = cfg.out.join(name);
        let comments: Vec<&str> = comments.iter().map(String::as_str).collect();
        table.write(&path, &comments)?;
        files.push(path);
    }
    let timing_path = cfg.out.join("timing.csv");
    timing.write(&timing_path, &[])?;
    files.push(timing_path);
    Ok(ExperimentOutcome { results, failures, files })
}

fn stochastic_table(base: &Scenario, cfg: &ExperimentConfig, seed: u64) -> Result<Table> {
    let model = GroundModel::from_scenario(base);
    let bound = model.support_bound().unwrap_or(DEFAULT_SUPPORT_BOUND);
    if !(cfg.probability > 0.0 && cfg.probability < 1.0) {
        return Err(Error::validation("probability", "must lie in (0, 1)"));
    }
    let n = hoeffding_fleet_size(&model.moments(), bound, cfg.probability);
    if cfg.mode == Mode::Hoeffding {
        let mut t = Table::new(&["stations", "support_bound", "probability", "fleet_size"]);
        t.rows.push(vec![model.stations.len().to_string(), fmt_num(bound), fmt_num(cfg.probability), n.to_string()]);
        return Ok(t);
    }
    if cfg.trials < 100 {
        return Err(Error::validation("trials", "at least 100 trials are required"));
    }
    let fleet = cfg.fleet.unwrap_or(n as usize);
    let r = monte_carlo_guarantee(&model, fleet, cfg.trials, seed);
    let mut t = Table::new(&["fleet_size", "trials", "seed", "exceed_count", "exceed_fraction", "probability"]);
    t.rows.push(vec![
        fleet.to_string(),
        r.trials.to_string(),
        seed.to_string(),
        r.exceed_count.to_string(),
        fmt_num(r.exceed_fraction),
        fmt_num(cfg.probability),
    ]);
    Ok(t)
}

/// Projects result rows onto the tidy per-plot files of `mode`; failed
/// cells are skipped.
fn plot_tables(mode: Mode, results: &Table) -> Vec<(&'static str, Table, Vec<String>)> {
    let ok: Vec<&Vec<String>> = match results.column("status") {
        Some(i) => results.rows.iter().filter(|r| r[i] == "ok").collect(),
        None => return Vec::new(),
    };
    let project = |cols: &[&str]| -> Table {
        let idx: Vec<usize> = cols.iter().map(|c| results.column(c).expect("known column")).collect();
        Table {
            header: cols.iter().map(|c| c.to_string()).collect(),
            rows: ok.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect(),
        }
    };
    let mut out = Vec::new();
    match mode {
        Mode::Poa | Mode::Pos => {
            let mut t = project(&["n", "pricing_k", "latency_d", "poa", "pos"]);
            t.header[2] = "latency".into();
            out.push(("poa.csv", t, vec!["price of anarchy and stability against fleet size".into(), "series key: pricing_k, latency (congestion exponent)".into()]));
            out.push(balance_plot(&project));
        }
        Mode::Ne | Mode::Balance => out.push(balance_plot(&project)),
        Mode::Pt => {
            let mut t = project(&["preset", "c", "n", "poa_lower_bound", "total_induced_load", "total_abs_load"]);
            t.header[3] = "poa".into();
            out.push(("pt.csv", t, vec![
                "prospect equilibria: worst found over optimum at the mean ground load (lower bound)".into(),
                "total_induced_load: sum of squared residual ground loads; total_abs_load: sum of absolute station loads".into(),
            ]));
        }
        _ => {}
    }
    out
}

fn balance_plot(project: &dyn Fn(&[&str]) -> Table) -> (&'static str, Table, Vec<String>) {
    let mut t = project(&["n", "pricing_k", "latency_d", "improvement_percent"]);
    t.header[2] = "latency".into();
    ("balance.csv", t, vec!["improvement_percent = 100 (V0 - VNE) / V0 at the dynamics terminal".into()])
}
