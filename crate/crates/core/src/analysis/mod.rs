//! Social optimum, price of anarchy and stability against their analytic
//! bounds, and station load-balance reports.

mod balance;
mod optimum;

pub use balance::{balance_report, BalanceReport};
pub use optimum::{optimal_station_loads, social_optimum, Optimum, OPT_STARTS};

use rayon::prelude::*;
use serde::Serialize;

use crate::costs::social_cost;
use crate::equilibrium::{
    enumerate_ne, random_profile, run_best_response_dynamics, DynamicsOptions, Equilibrium, DEFAULT_BUDGET,
    DEFAULT_STARTS,
};
use crate::error::{Error, Result};
use crate::model::{Profile, Scenario};

/// How the equilibrium set is obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SolveMode {
    /// Exhaustive enumeration; quadratic pricing only.
    Exact { budget: u64 },
    /// Terminal profiles of seeded multi-start dynamics. The worst one found
    /// only bounds the price of anarchy from below.
    Approximate { budget: u64, starts: usize, seed: u64, dynamics: DynamicsOptions },
    /// Exact when pricing is quadratic and the assignment space fits the
    /// budget, approximate otherwise.
    Auto { budget: u64, starts: usize, seed: u64, dynamics: DynamicsOptions },
}

impl SolveMode {
    pub fn exact() -> Self {
        SolveMode::Exact { budget: DEFAULT_BUDGET }
    }

    pub fn auto(seed: u64) -> Self {
        SolveMode::Auto { budget: DEFAULT_BUDGET, starts: DEFAULT_STARTS, seed, dynamics: DynamicsOptions::default() }
    }

    fn budget(&self) -> u64 {
        match self {
            SolveMode::Exact { budget } | SolveMode::Approximate { budget, .. } | SolveMode::Auto { budget, .. } => {
                *budget
            }
        }
    }
}

/// Distinct terminal profiles (by discrete assignment) of `starts` seeded
/// dynamics runs, in order of first discovery. Runs that hit the round limit
/// are dropped.
pub fn multistart_equilibria(
    s: &Scenario,
    starts: usize,
    seed: u64,
    dynamics: &DynamicsOptions,
) -> Result<Vec<Equilibrium>> {
    let runs: Vec<Option<Profile>> = (0..starts as u64)
        .into_par_iter()
        .map(|k| match run_best_response_dynamics(s, &random_profile(s, seed, k), dynamics) {
            Ok(trace) => Ok(Some(trace.terminal)),
            Err(Error::NotConverged(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<Equilibrium> = Vec::new();
    for p in runs.into_iter().flatten() {
        let assignment = p.assignment();
        if out.iter().all(|e| e.profile.assignment() != assignment) {
            out.push(Equilibrium { assignment: out.len() as u64, social_cost: social_cost(s, &p), profile: p });
        }
    }
    if out.is_empty() {
        return Err(Error::NoNeFound);
    }
    Ok(out)
}

/// Equilibria under `mode`, plus whether the set is exhaustive.
pub fn equilibria(s: &Scenario, mode: &SolveMode) -> Result<(Vec<Equilibrium>, bool)> {
    let approximate = |starts: usize, seed: u64, dynamics: &DynamicsOptions| {
        multistart_equilibria(s, starts, seed, dynamics).map(|e| (e, false))
    };
    match mode {
        SolveMode::Exact { budget } => Ok((enumerate_ne(s, *budget)?, true)),
        SolveMode::Approximate { starts, seed, dynamics, .. } => approximate(*starts, *seed, dynamics),
        SolveMode::Auto { budget, starts, seed, dynamics } => {
            if s.all_pricing_quadratic() && s.assignment_count() <= *budget as f64 {
                Ok((enumerate_ne(s, *budget)?, true))
            } else {
                approximate(*starts, *seed, dynamics)
            }
        }
    }
}

/// Analytic bounds next to the measured ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    /// `sum_j g_j^2` over real stations.
    pub ground_energy: f64,
    pub b_max: f64,
    pub opt: f64,
    pub worst_ne_cost: f64,
    pub best_ne_cost: f64,
    pub ne_count: usize,
    /// False when the equilibria come from multi-start dynamics, in which case
    /// `poa_empirical` is a lower bound.
    pub exact: bool,
    pub poa_empirical: f64,
    /// `3 + 12 b_max^2 + 4.5 sum g^2 / n`.
    pub poa_bound: f64,
    pub pos_empirical: f64,
    /// `2 (1 + b_max^2) + 2 sum g^2 / n`.
    pub pos_bound: f64,
    /// Optimal cost at least one unit per vehicle.
    pub unit_cost_assumption_holds: bool,
    /// Linear latency, quadratic pricing and the unit-cost assumption: the
    /// setting in which both bounds are guaranteed.
    pub bounds_apply: bool,
    pub poa_within_bound: bool,
    pub pos_within_bound: bool,
}

/// `(poa_bound, pos_bound)` from scenario constants only.
pub fn analytic_bounds(s: &Scenario) -> (f64, f64) {
    let n = s.n() as f64;
    let b2 = s.b_max().powi(2);
    let g2 = s.ground_energy();
    (3.0 + 12.0 * b2 + 4.5 * g2 / n, 2.0 * (1.0 + b2) + 2.0 * g2 / n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub optimum: Optimum,
    pub worst: Equilibrium,
    pub best: Equilibrium,
    pub equilibria: Vec<Equilibrium>,
    pub bounds: BoundReport,
}

/// Optimum, equilibrium set, and price of anarchy and stability.
pub fn efficiency_report(s: &Scenario, mode: &SolveMode) -> Result<EfficiencyReport> {
    if s.n() == 0 {
        return Err(Error::validation("evs", "efficiency needs at least one vehicle"));
    }
    let optimum = social_optimum(s, mode.budget())?;
    let (equilibria, exact) = equilibria(s, mode)?;
    let worst = equilibria
        .iter()
        .fold(None::<&Equilibrium>, |w, e| match w {
            Some(w) if w.social_cost >= e.social_cost => Some(w),
            _ => Some(e),
        })
        .ok_or(Error::NoNeFound)?
        .clone();
    let best = equilibria
        .iter()
        .fold(None::<&Equilibrium>, |b, e| match b {
            Some(b) if b.social_cost <= e.social_cost => Some(b),
            _ => Some(e),
        })
        .expect("nonempty")
        .clone();
    let (poa_bound, pos_bound) = analytic_bounds(s);
    let opt = optimum.value;
    let poa = worst.social_cost / opt;
    let pos = best.social_cost / opt;
    let unit = opt >= s.n() as f64;
    let bounds = BoundReport {
        n: s.n(),
        ground_energy: s.ground_energy(),
        b_max: s.b_max(),
        opt,
        worst_ne_cost: worst.social_cost,
        best_ne_cost: best.social_cost,
        ne_count: equilibria.len(),
        exact,
        poa_empirical: poa,
        poa_bound,
        pos_empirical: pos,
        pos_bound,
        unit_cost_assumption_holds: unit,
        bounds_apply: unit && s.all_latency_linear() && s.all_pricing_quadratic(),
        poa_within_bound: poa <= poa_bound,
        pos_within_bound: pos <= pos_bound,
    };
    Ok(EfficiencyReport { optimum, worst, best, equilibria, bounds })
}

/// Worst equilibrium cost over the optimum, with its bound.
pub fn price_of_anarchy(s: &Scenario, mode: &SolveMode) -> Result<BoundReport> {
    Ok(efficiency_report(s, mode)?.bounds)
}

/// Best equilibrium cost over the optimum, with its bound.
pub fn price_of_stability(s: &Scenario, mode: &SolveMode) -> Result<BoundReport> {
    price_of_anarchy(s, mode)
}
