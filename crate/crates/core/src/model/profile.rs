use serde::{Deserialize, Serialize};

use super::{Choice, Scenario};
use crate::error::{Error, Result};

/// One vehicle's strategy: a route, a station on it, and a signed load
/// (positive charges the battery, negative sells energy back).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub route: usize,
    pub station: usize,
    pub load: f64,
}

impl Action {
    pub fn new(choice: Choice, load: f64) -> Self {
        Action { route: choice.route, station: choice.station, load }
    }

    pub fn choice(&self) -> Choice {
        Choice { route: self.route, station: self.station }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub actions: Vec<Action>,
}

impl Profile {
    pub fn new(actions: Vec<Action>) -> Self {
        Profile { actions }
    }

    pub fn with_action(&self, i: usize, action: Action) -> Profile {
        let mut p = self.clone();
        p.actions[i] = action;
        p
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Discrete part of the profile, used to match equilibria across solvers.
    pub fn assignment(&self) -> Vec<Choice> {
        self.actions.iter().map(Action::choice).collect()
    }
}

/// Quantities derived from a profile: vehicles per road, members per station
/// and each station's aggregate load.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub edge_counts: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub loads: Vec<f64>,
}

impl Occupancy {
    pub fn empty(scenario: &Scenario) -> Self {
        Occupancy {
            edge_counts: vec![0; scenario.network.edges.len()],
            members: vec![Vec::new(); scenario.stations.len()],
            loads: vec![0.0; scenario.stations.len()],
        }
    }

    pub fn queue_len(&self, station: usize) -> usize {
        self.members[station].len()
    }

    /// Aggregate load at `station` excluding vehicle `i`, summed in member
    /// order so it matches a fresh derivation without `i`.
    pub fn load_without(&self, station: usize, i: usize, profile: &Profile) -> f64 {
        self.members[station].iter().filter(|&&k| k != i).map(|&k| profile.actions[k].load).sum()
    }
}

/// Counts and sums derived from scratch; a pure function of the action vector.
pub fn derive_occupancy(scenario: &Scenario, profile: &Profile) -> Occupancy {
    let mut occ = Occupancy::empty(scenario);
    for (i, a) in profile.actions.iter().enumerate() {
        for &e in scenario.route(a.route) {
            occ.edge_counts[e] += 1;
        }
        occ.members[a.station].push(i);
    }
    for (j, members) in occ.members.iter().enumerate() {
        occ.loads[j] = members.iter().map(|&k| profile.actions[k].load).sum();
    }
    occ
}

impl Scenario {
    /// Checks the action invariants for vehicle `i`.
    pub fn check_action(&self, i: usize, a: &Action) -> Result<()> {
        let path = |f: &str| format!("actions[{i}].{f}");
        let ev = self.evs.get(i).ok_or_else(|| Error::validation(format!("actions[{i}]"), "no such vehicle"))?;
        if self.choice_index(i, a.route, a.station).is_none() {
            return Err(Error::validation(path("station"), "station does not lie on a feasible route of this vehicle"));
        }
        let (lo, hi) = ev.load_bounds();
        if !(a.load >= lo && a.load <= hi) {
            return Err(Error::validation(path("load"), format!("load {} outside [{lo}, {hi}]", a.load)));
        }
        if self.stations[a.station].is_virtual && a.load != 0.0 {
            return Err(Error::validation(path("load"), "load must be zero at a virtual station"));
        }
        Ok(())
    }

    pub fn check_profile(&self, p: &Profile) -> Result<()> {
        if p.len() != self.n() {
            return Err(Error::validation("actions", format!("expected {} actions, got {}", self.n(), p.len())));
        }
        p.actions.iter().enumerate().try_for_each(|(i, a)| self.check_action(i, a))
    }

    /// Every vehicle takes its first option with zero load.
    pub fn default_profile(&self) -> Profile {
        Profile::new(self.choices.iter().map(|c| Action::new(c[0], 0.0)).collect())
    }
}
