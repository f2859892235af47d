//! Game instance: road network, charging stations, fleet, and per-profile
//! occupancy.

mod document;
mod network;
mod profile;

pub use document::{
    EdgeDoc, EvDoc, GroundDoc, OptionsDoc, PmfPointDoc, ProspectDoc, ScenarioDoc, StationDoc, DEFAULT_PATH_CAP,
};
pub use network::{enumerate_paths, Edge, Latency, Network};
pub use profile::{derive_occupancy, Action, Occupancy, Profile};

use crate::prospect::PtParams;
use crate::stochastic::GroundDist;

/// Station energy price `|x|^k` of the station's net imbalance `x`; virtual
/// stations price nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pricing {
    Power { k: f64 },
    Zero,
}

impl Pricing {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Pricing::Zero => 0.0,
            Pricing::Power { k } if k == 2.0 => x * x,
            Pricing::Power { k } if k == 1.0 => x.abs(),
            Pricing::Power { k } => x.abs().powf(k),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Pricing::Power { k } if *k == 2.0)
    }

    pub fn exponent(&self) -> Option<f64> {
        match *self {
            Pricing::Power { k } => Some(k),
            Pricing::Zero => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    /// Host road.
    pub edge: usize,
    /// Service rate in vehicles per time unit; infinite for virtual stations.
    pub sigma: f64,
    pub pricing: Pricing,
    /// Signed ground load: positive means surplus energy for sale.
    pub ground: f64,
    /// Distribution of the ground load for stochastic experiments.
    pub ground_model: Option<GroundDist>,
    pub is_virtual: bool,
}

impl Station {
    pub fn virtual_on(edge: usize, edge_id: &str) -> Self {
        Station {
            id: format!("~{edge_id}"),
            edge,
            sigma: f64::INFINITY,
            pricing: Pricing::Zero,
            ground: 0.0,
            ground_model: None,
            is_virtual: true,
        }
    }

    /// Waiting cost for a station holding `count` vehicles.
    pub fn queue_cost(&self, count: usize) -> f64 {
        if self.is_virtual {
            0.0
        } else {
            count as f64 / self.sigma
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ev {
    pub id: String,
    pub origin: usize,
    pub destination: usize,
    /// Current battery level.
    pub battery: f64,
    /// Minimum operating level, strictly positive.
    pub floor: f64,
    /// Battery capacity.
    pub capacity: f64,
}

impl Ev {
    /// Feasible load interval `[floor - battery, capacity - battery]`.
    pub fn load_bounds(&self) -> (f64, f64) {
        (self.floor - self.battery, self.capacity - self.battery)
    }

    pub(crate) fn signature(&self) -> [u64; 3] {
        [self.battery.to_bits(), self.floor.to_bits(), self.capacity.to_bits()]
    }
}

/// One discrete option of a vehicle: a route and a station on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Choice {
    pub route: usize,
    pub station: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProspectOptions {
    pub params: PtParams,
    /// Explicit ground-load pmf shared by all stations, as `(theta, p)`.
    pub pmf: Option<Vec<(f64, f64)>>,
}

/// A validated game instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: Network,
    /// Real stations in document order, followed by virtual stations.
    pub stations: Vec<Station>,
    pub evs: Vec<Ev>,
    /// Distinct simple paths referenced by [`Action::route`].
    pub routes: Vec<Vec<usize>>,
    /// Per vehicle, its feasible `(route, station)` pairs in tie-break order
    /// (route edge sequence, then station index).
    pub choices: Vec<Vec<Choice>>,
    pub skip_charging: bool,
    pub path_cap: usize,
    pub prospect: Option<ProspectOptions>,
    pub(crate) real_stations: usize,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.evs.len()
    }

    /// Real (non-virtual) stations.
    pub fn real_stations(&self) -> &[Station] {
        &self.stations[..self.real_stations]
    }

    pub fn real_station_count(&self) -> usize {
        self.real_stations
    }

    pub fn route(&self, r: usize) -> &[usize] {
        &self.routes[r]
    }

    /// Smallest battery floor across the fleet.
    pub fn b_min(&self) -> f64 {
        self.evs.iter().map(|e| e.floor).fold(f64::INFINITY, f64::min)
    }

    /// Largest battery capacity across the fleet.
    pub fn b_max(&self) -> f64 {
        self.evs.iter().map(|e| e.capacity).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum of squared ground loads over real stations.
    pub fn ground_energy(&self) -> f64 {
        self.real_stations().iter().map(|s| s.ground * s.ground).sum()
    }

    pub fn all_latency_linear(&self) -> bool {
        self.network.edges.iter().all(|e| e.latency.is_linear())
    }

    pub fn all_pricing_quadratic(&self) -> bool {
        self.real_stations().iter().all(|s| s.pricing.is_quadratic())
    }

    /// True when every vehicle has the same battery level, floor and capacity.
    pub fn identical_batteries(&self) -> bool {
        self.evs.windows(2).all(|w| w[0].signature() == w[1].signature())
    }

    pub fn choice_index(&self, ev: usize, route: usize, station: usize) -> Option<usize> {
        self.choices[ev].iter().position(|c| c.route == route && c.station == station)
    }

    /// Product of per-vehicle option counts, as a float to avoid overflow.
    pub fn assignment_count(&self) -> f64 {
        self.choices.iter().map(|c| c.len() as f64).product()
    }

    /// Re-validates a modified copy of this scenario's document.
    pub fn modified(&self, edit: impl FnOnce(&mut ScenarioDoc)) -> crate::Result<Scenario> {
        let mut doc = self.to_document();
        edit(&mut doc);
        doc.validate()
    }
}

impl Scenario {
    /// Copy with the real stations' fixed ground loads replaced by `g`.
    pub fn with_ground(&self, g: &[f64]) -> crate::Result<Scenario> {
        if g.len() != self.real_stations {
            return Err(crate::Error::validation(
                "stations",
                format!("expected {} ground loads, got {}", self.real_stations, g.len()),
            ));
        }
        if let Some(j) = g.iter().position(|x| !x.is_finite()) {
            return Err(crate::Error::validation(format!("stations[{j}].g"), "ground load must be finite"));
        }
        let mut s = self.clone();
        for (st, &v) in s.stations.iter_mut().zip(g) {
            st.ground = v;
        }
        Ok(s)
    }

    /// Copy whose fleet has `n` vehicles, cycling through the existing ones;
    /// the `k`-th copy of vehicle `id` is named `id#k`.
    pub fn with_fleet_size(&self, n: usize) -> crate::Result<Scenario> {
        if self.evs.is_empty() && n > 0 {
            return Err(crate::Error::validation("evs", "cannot grow an empty fleet"));
        }
        let base = self.n();
        let mut s = self.clone();
        s.evs = (0..n)
            .map(|k| {
                let mut ev = self.evs[k % base].clone();
                if k >= base {
                    ev.id = format!("{}#{}", ev.id, k / base);
                }
                ev
            })
            .collect();
        s.choices = (0..n).map(|k| self.choices[k % base].clone()).collect();
        Ok(s)
    }

    /// Copy with every real station priced by `|x|^k`.
    pub fn with_pricing_exponent(&self, k: f64) -> crate::Result<Scenario> {
        if !(k.is_finite() && k > 0.0) {
            return Err(crate::Error::validation("stations.k", "pricing exponent must be positive"));
        }
        let mut s = self.clone();
        for st in &mut s.stations[..self.real_stations] {
            st.pricing = Pricing::Power { k };
        }
        Ok(s)
    }

    /// Copy with every road's congestion exponent set to `d`.
    pub fn with_latency_exponent(&self, d: f64) -> crate::Result<Scenario> {
        if !(d.is_finite() && d >= 1.0) {
            return Err(crate::Error::validation("edges.d", "congestion exponent must be at least 1"));
        }
        let mut s = self.clone();
        for e in &mut s.network.edges {
            e.latency.d = d;
        }
        Ok(s)
    }
}
