//! Per-vehicle cost, the exact potential, and the social cost.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{derive_occupancy, Edge, Ev, Occupancy, Profile, Scenario, Station};

/// `a x^d + b` for `x` vehicles on `edge`.
pub fn latency(edge: &Edge, x: usize) -> f64 {
    edge.latency.eval(x)
}

/// Price `|x|^k` of a station imbalance `x`; zero at virtual stations.
pub fn pricing(station: &Station, x: f64) -> f64 {
    station.pricing.eval(x)
}

/// Price change at `station` when a vehicle adds `load` on top of `others`.
pub fn marginal_price(station: &Station, others: f64, load: f64) -> f64 {
    if station.is_virtual {
        return 0.0;
    }
    let base = -station.ground + others;
    pricing(station, base + load) - pricing(station, base)
}

/// `ln(capacity / (battery + load))`; the risk of leaving with a low battery.
pub fn battery_risk(ev: &Ev, load: f64) -> f64 {
    (ev.capacity / (ev.battery + load)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub congestion: f64,
    pub queueing: f64,
    pub battery_risk: f64,
    pub energy_price: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(congestion: f64, queueing: f64, battery_risk: f64, energy_price: f64) -> Self {
        CostBreakdown {
            congestion,
            queueing,
            battery_risk,
            energy_price,
            total: congestion + queueing + battery_risk + energy_price,
        }
    }
}

/// Travel time of vehicle `i` along its route under the given occupancy.
pub(crate) fn congestion_of(s: &Scenario, occ: &Occupancy, route: usize) -> f64 {
    s.route(route).iter().map(|&e| latency(&s.network.edges[e], occ.edge_counts[e])).sum()
}

/// Marginal energy price of vehicle `i`: its station's price with and
/// without its own load.
pub fn marginal_energy_price(s: &Scenario, p: &Profile, occ: &Occupancy, i: usize) -> f64 {
    let a = &p.actions[i];
    let st = &s.stations[a.station];
    if st.is_virtual {
        return 0.0;
    }
    pricing(st, -st.ground + occ.loads[a.station]) - pricing(st, -st.ground + occ.load_without(a.station, i, p))
}

/// Cost of vehicle `i` given an occupancy derived from `p`.
pub fn ev_cost_with(s: &Scenario, p: &Profile, occ: &Occupancy, i: usize) -> Result<CostBreakdown> {
    let a = &p.actions[i];
    let ev = &s.evs[i];
    if ev.battery + a.load <= 0.0 {
        return Err(Error::Domain(format!("vehicle {} would leave with a non-positive battery", ev.id)));
    }
    Ok(CostBreakdown::new(
        congestion_of(s, occ, a.route),
        s.stations[a.station].queue_cost(occ.queue_len(a.station)),
        battery_risk(ev, a.load),
        marginal_energy_price(s, p, occ, i),
    ))
}

pub fn ev_cost(s: &Scenario, p: &Profile, i: usize) -> Result<CostBreakdown> {
    ev_cost_with(s, p, &derive_occupancy(s, p), i)
}

/// Exact potential: road, queue, station-price and battery terms.
pub fn potential(s: &Scenario, p: &Profile) -> f64 {
    potential_with(s, p, &derive_occupancy(s, p))
}

pub fn potential_with(s: &Scenario, p: &Profile, occ: &Occupancy) -> f64 {
    let roads: f64 = s
        .network
        .edges
        .iter()
        .zip(&occ.edge_counts)
        .map(|(e, &n)| (1..=n).map(|x| latency(e, x)).sum::<f64>())
        .sum();
    let mut queues = 0.0;
    let mut prices = 0.0;
    for (j, st) in s.stations.iter().enumerate() {
        if st.is_virtual {
            continue;
        }
        let q = occ.queue_len(j) as f64;
        queues += q * (q + 1.0) / (2.0 * st.sigma);
        prices += pricing(st, -st.ground + occ.loads[j]);
    }
    let risk: f64 = s.evs.iter().zip(&p.actions).map(|(ev, a)| battery_risk(ev, a.load)).sum();
    roads + queues + prices + risk
}

/// Sum of all vehicles' costs.
pub fn social_cost(s: &Scenario, p: &Profile) -> f64 {
    let occ = derive_occupancy(s, p);
    social_cost_with(s, p, &occ)
}

pub(crate) fn social_cost_with(s: &Scenario, p: &Profile, occ: &Occupancy) -> f64 {
    (0..p.len())
        .map(|i| {
            let a = &p.actions[i];
            congestion_of(s, occ, a.route)
                + s.stations[a.station].queue_cost(occ.queue_len(a.station))
                + battery_risk(&s.evs[i], a.load)
                + marginal_energy_price(s, p, occ, i)
        })
        .sum()
}

/// Closed form of the social cost, valid only for linear latency and
/// quadratic pricing (`None` otherwise):
/// `sum_e (a n^2 + b n) + sum_j |Q|^2/sigma - sum l^2 + 2 sum L^2 - 2 sum g L + sum ln`.
pub fn social_cost_closed_form(s: &Scenario, p: &Profile) -> Option<f64> {
    if !(s.all_latency_linear() && s.all_pricing_quadratic()) {
        return None;
    }
    let occ = derive_occupancy(s, p);
    let roads: f64 = s
        .network
        .edges
        .iter()
        .zip(&occ.edge_counts)
        .map(|(e, &n)| {
            let n = n as f64;
            e.latency.a * n * n + e.latency.b * n
        })
        .sum();
    let mut stations = 0.0;
    for (j, st) in s.stations.iter().enumerate() {
        if st.is_virtual {
            continue;
        }
        let q = occ.queue_len(j) as f64;
        let l = occ.loads[j];
        let squares: f64 = occ.members[j].iter().map(|&k| p.actions[k].load.powi(2)).sum();
        stations += q * q / st.sigma - squares + 2.0 * l * l - 2.0 * st.ground * l;
    }
    let risk: f64 = s.evs.iter().zip(&p.actions).map(|(ev, a)| battery_risk(ev, a.load)).sum();
    Some(roads + stations + risk)
}
