use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::restricted::equilibrium_loads;
use super::{is_nash_occ, Classical};
use crate::costs::social_cost_with;
use crate::error::{Error, Result};
use crate::model::{derive_occupancy, Action, Choice, Ev, Profile, Scenario};

/// Default cap on the number of discrete assignments examined.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Loads memoized by station and the sorted parameters of its members.
pub(crate) type LoadCache = HashMap<(usize, Vec<[u64; 3]>), Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    /// Mixed-radix index of the discrete assignment (vehicle 0 most significant).
    pub assignment: u64,
    pub profile: Profile,
    pub social_cost: f64,
}

/// Number of assignments, failing if it exceeds `budget`.
pub(crate) fn assignment_total(s: &Scenario, budget: u64) -> Result<u64> {
    let needed = s.assignment_count();
    if needed > budget as f64 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(needed as u64)
}

/// The discrete choices encoded by `index`.
pub fn decode_assignment(s: &Scenario, mut index: u64) -> Vec<Choice> {
    let mut out = vec![Choice { route: 0, station: 0 }; s.n()];
    for i in (0..s.n()).rev() {
        let radix = s.choices[i].len() as u64;
        out[i] = s.choices[i][(index % radix) as usize];
        index /= radix;
    }
    out
}

/// Members of each station under `choices`, in vehicle order.
pub(crate) fn station_members(s: &Scenario, choices: &[Choice]) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); s.stations.len()];
    for (i, c) in choices.iter().enumerate() {
        members[c.station].push(i);
    }
    members
}

/// Applies a per-station solver to every occupied real station, memoizing by
/// station and member parameters. `solve` receives members sorted by their
/// parameters and returns loads in that order.
pub(crate) fn station_loads(
    s: &Scenario,
    members: &[Vec<usize>],
    cache: &mut LoadCache,
    solve: impl Fn(usize, &[&Ev]) -> Vec<f64>,
) -> Vec<f64> {
    let mut loads = vec![0.0; s.n()];
    for (j, m) in members.iter().enumerate() {
        if m.is_empty() || s.stations[j].is_virtual {
            continue;
        }
        let mut sorted = m.clone();
        sorted.sort_by_key(|&i| s.evs[i].signature());
        let key = (j, sorted.iter().map(|&i| s.evs[i].signature()).collect::<Vec<_>>());
        let solved = cache.entry(key).or_insert_with(|| {
            let evs: Vec<&Ev> = sorted.iter().map(|&i| &s.evs[i]).collect();
            solve(j, &evs)
        });
        for (&i, &l) in sorted.iter().zip(solved.iter()) {
            loads[i] = l;
        }
    }
    loads
}

pub(crate) fn require_quadratic(s: &Scenario) -> Result<()> {
    match s.real_stations().iter().find(|st| !st.pricing.is_quadratic()) {
        Some(st) => Err(Error::UnsupportedPricing { exponent: st.pricing.exponent().unwrap_or(0.0) }),
        None => Ok(()),
    }
}

/// Relative slack used when accepting an enumerated equilibrium.
pub(crate) fn nash_tol(cost: f64) -> f64 {
    1e-9 * cost.abs().max(1.0)
}

/// Every pure Nash equilibrium, one per discrete assignment, in assignment
/// order. Each assignment gets the unique equilibrium loads of its stations'
/// load games and is kept iff no vehicle gains from any deviation.
pub fn enumerate_ne(s: &Scenario, budget: u64) -> Result<Vec<Equilibrium>> {
    require_quadratic(s)?;
    let total = assignment_total(s, budget)?;
    let found = (0..total)
        .into_par_iter()
        .map_init(LoadCache::new, |cache, index| {
            let choices = decode_assignment(s, index);
            let members = station_members(s, &choices);
            let loads = station_loads(s, &members, cache, |j, evs| equilibrium_loads(s.stations[j].ground, evs));
            let profile =
                Profile::new(choices.iter().zip(&loads).map(|(&c, &l)| Action::new(c, l)).collect());
            let occ = derive_occupancy(s, &profile);
            is_nash_occ(&Classical, s, &profile, &occ, nash_tol).is_nash.then(|| Equilibrium {
                assignment: index,
                social_cost: social_cost_with(s, &profile, &occ),
                profile,
            })
        })
        .flatten()
        .collect();
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{is_nash, run_best_response_dynamics, DynamicsOptions};
    use crate::model::ScenarioDoc;

    fn corridor() -> Scenario {
        Scenario::from_json(include_str!("../../../../scenarios/corridor.json")).unwrap()
    }

    #[test]
    fn single_vehicle_has_one_equilibrium() {
        let s = corridor().with_fleet_size(1).unwrap();
        let ne = enumerate_ne(&s, DEFAULT_BUDGET).unwrap();
        assert_eq!(ne.len(), 1);
        assert!(is_nash(&s, &ne[0].profile, 1e-9).is_nash);
    }

    #[test]
    fn budget_and_pricing_are_enforced() {
        let s = corridor();
        assert!(matches!(enumerate_ne(&s, 100), Err(Error::BudgetExceeded { .. })));
        let cubic = s.with_pricing_exponent(3.0).unwrap();
        assert!(matches!(enumerate_ne(&cubic, DEFAULT_BUDGET), Err(Error::UnsupportedPricing { .. })));
    }

    #[test]
    fn decode_is_mixed_radix() {
        let s = corridor().with_fleet_size(2).unwrap();
        assert_eq!(decode_assignment(&s, 0), vec![s.choices[0][0], s.choices[1][0]]);
        assert_eq!(decode_assignment(&s, 1), vec![s.choices[0][0], s.choices[1][1]]);
        assert_eq!(decode_assignment(&s, 3), vec![s.choices[0][1], s.choices[1][0]]);
    }

    #[test]
    fn symmetric_instance_yields_symmetric_set() {
        let s = ScenarioDoc::from_json(
            r#"{
              "nodes": ["s", "t"],
              "edges": [
                {"id": "e1", "tail": "s", "head": "t", "a": 1, "b": 2},
                {"id": "e2", "tail": "s", "head": "t", "a": 1, "b": 2}
              ],
              "stations": [
                {"id": "q1", "edge": "e1", "sigma": 1, "k": 2, "g": 1.5},
                {"id": "q2", "edge": "e2", "sigma": 1, "k": 2, "g": 1.5}
              ],
              "evs": [
                {"id": "a", "s": "s", "t": "t", "b": 2, "b_lo": 0.5, "b_hi": 4},
                {"id": "b", "s": "s", "t": "t", "b": 2, "b_lo": 0.5, "b_hi": 4}
              ]
            }"#,
        )
        .unwrap()
        .validate()
        .unwrap();
        let ne = enumerate_ne(&s, DEFAULT_BUDGET).unwrap();
        let set: Vec<Vec<usize>> =
            ne.iter().map(|e| e.profile.actions.iter().map(|a| a.station).collect()).collect();
        assert!(!set.is_empty());
        for a in &set {
            let swapped_evs = vec![a[1], a[0]];
            let swapped_edges: Vec<usize> = a.iter().map(|&j| 1 - j).collect();
            assert!(set.contains(&swapped_evs));
            assert!(set.contains(&swapped_edges));
        }
    }

    #[test]
    fn dynamics_terminal_is_enumerated() {
        let s = corridor();
        let ne = enumerate_ne(&s, DEFAULT_BUDGET).unwrap();
        let trace = run_best_response_dynamics(&s, &s.default_profile(), &DynamicsOptions::default()).unwrap();
        let assignment = trace.terminal.assignment();
        assert!(ne.iter().any(|e| e.profile.assignment() == assignment));
    }
}
