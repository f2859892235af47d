//! Prospect-theoretic variant: Prelec weighting, Tversky valuation around a
//! reference price, the resulting vehicle cost and its exact potential.
//!
//! With quadratic pricing the price realized at ground load `theta` differs
//! from the reference price (the price at zero ground load) by exactly
//! `-2 l theta`, so the prospect term depends only on the vehicle's own load.

use serde::Serialize;

use crate::costs::{battery_risk, latency};
use crate::equilibrium::{is_nash_with, run_dynamics_with, CostModel, DynamicsOptions, DynamicsTrace, NashCheck};
use crate::error::{Error, Result};
use crate::model::{derive_occupancy, Occupancy, Profile, Scenario};
use crate::numeric::grid_golden;
use crate::stochastic::GroundDist;

/// Support points used when a station's ground distribution is discretized.
pub const PMF_POINTS: usize = 21;
const GRID_POINTS: usize = 4096;

/// Probability distortion `c`, gain curvature `c1`, loss aversion `c2` and
/// loss curvature `c3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PtParams {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl PtParams {
    pub const RISK_NEUTRAL: PtParams = PtParams { c: 1.0, c1: 1.0, c2: 1.0, c3: 1.0 };

    /// Named parameter sets from behavioral studies, plus `RN`.
    pub const PRESETS: [(&'static str, PtParams); 6] = [
        ("A", PtParams { c: 0.75, c1: 0.68, c2: 2.54, c3: 0.74 }),
        ("B", PtParams { c: 0.75, c1: 0.81, c2: 1.07, c3: 0.8 }),
        ("C", PtParams { c: 0.75, c1: 0.71, c2: 1.38, c3: 0.72 }),
        ("D", PtParams { c: 0.75, c1: 0.86, c2: 1.61, c3: 1.06 }),
        ("E", PtParams { c: 0.75, c1: 0.88, c2: 2.25, c3: 0.88 }),
        ("RN", PtParams::RISK_NEUTRAL),
    ];

    /// Requires `0 < c <= 1`, `c1, c2, c3 > 0`, and `c1 <= 1` (concave gains).
    pub fn new(c: f64, c1: f64, c2: f64, c3: f64) -> std::result::Result<Self, String> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(format!("distortion c = {c} must lie in (0, 1]"));
        }
        if !(c1 > 0.0 && c1 <= 1.0) {
            return Err(format!("gain curvature c1 = {c1} must lie in (0, 1]"));
        }
        if !(c2 > 0.0 && c2.is_finite()) {
            return Err(format!("loss aversion c2 = {c2} must be positive"));
        }
        if !(c3 > 0.0 && c3.is_finite()) {
            return Err(format!("loss curvature c3 = {c3} must be positive"));
        }
        Ok(PtParams { c, c1, c2, c3 })
    }

    pub fn preset(name: &str) -> Option<PtParams> {
        Self::PRESETS.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|&(_, p)| p)
    }

    /// Same parameters with a different distortion.
    pub fn with_distortion(self, c: f64) -> std::result::Result<Self, String> {
        Self::new(c, self.c1, self.c2, self.c3)
    }
}

/// Prelec weight `exp(-(-ln p)^c)`, with `w(0) = 0`.
pub fn prelec_weight(p: f64, c: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if p >= 1.0 {
        1.0
    } else {
        (-(-p.ln()).powf(c)).exp()
    }
}

fn power(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else {
        x.powf(e)
    }
}

/// Value of a gain (`x >= 0`) or loss (`x < 0`) relative to the reference.
pub fn offset_value(x: f64, params: &PtParams) -> f64 {
    if x >= 0.0 {
        power(x, params.c1)
    } else {
        -params.c2 * power(-x, params.c3)
    }
}

/// Tversky value of outcome `z` against reference `z_r`.
pub fn tversky_value(z: f64, z_r: f64, params: &PtParams) -> f64 {
    offset_value(z - z_r, params)
}

/// Price the vehicle would pay at its station were the ground load zero.
pub fn reference_price(s: &Scenario, p: &Profile, i: usize) -> f64 {
    let occ = derive_occupancy(s, p);
    let a = &p.actions[i];
    let others = occ.load_without(a.station, i, p);
    reference_price_of(s, a.station, others, a.load)
}

fn reference_price_of(s: &Scenario, station: usize, others: f64, load: f64) -> f64 {
    let st = &s.stations[station];
    if st.is_virtual {
        0.0
    } else {
        st.pricing.eval(others + load) - st.pricing.eval(others)
    }
}

/// How the realized price enters the valuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProspectEval {
    /// Computes the realized price `z(theta)` from the pricing function.
    Direct,
    /// Substitutes `z(theta) - z_r = -2 l theta`; quadratic pricing only.
    Reduced,
}

/// Distorted expectation `sum_theta w(h(theta)) v(z(theta), z_r)` for
/// vehicle `i` facing ground pmf `pmf` at its station.
pub fn expected_prospect(
    s: &Scenario,
    p: &Profile,
    i: usize,
    pmf: &[(f64, f64)],
    params: &PtParams,
    eval: ProspectEval,
) -> Result<f64> {
    let occ = derive_occupancy(s, p);
    let a = &p.actions[i];
    let st = &s.stations[a.station];
    if st.is_virtual {
        return Ok(0.0);
    }
    let others = occ.load_without(a.station, i, p);
    let l = a.load;
    let z_r = reference_price_of(s, a.station, others, l);
    match eval {
        ProspectEval::Direct => Ok(pmf
            .iter()
            .map(|&(theta, h)| {
                let base = -theta + others;
                let z = st.pricing.eval(base + l) - st.pricing.eval(base);
                prelec_weight(h, params.c) * tversky_value(z, z_r, params)
            })
            .sum()),
        ProspectEval::Reduced => {
            if !st.pricing.is_quadratic() {
                return Err(Error::UnsupportedPricing { exponent: st.pricing.exponent().unwrap_or(0.0) });
            }
            Ok(pmf.iter().map(|&(theta, h)| prelec_weight(h, params.c) * offset_value(-2.0 * l * theta, params)).sum())
        }
    }
}

/// Road, queue and battery terms plus the reference price and the prospect
/// of the realized price, evaluated directly for any pricing exponent.
pub fn pt_cost(s: &Scenario, p: &Profile, i: usize, pmf: &[(f64, f64)], params: &PtParams) -> Result<f64> {
    let occ = derive_occupancy(s, p);
    let a = &p.actions[i];
    let ev = &s.evs[i];
    if ev.battery + a.load <= 0.0 {
        return Err(Error::Domain(format!("vehicle {} would leave with a non-positive battery", ev.id)));
    }
    let congestion: f64 = s.route(a.route).iter().map(|&e| latency(&s.network.edges[e], occ.edge_counts[e])).sum();
    let queue = s.stations[a.station].queue_cost(occ.queue_len(a.station));
    let others = occ.load_without(a.station, i, p);
    let z_r = reference_price_of(s, a.station, others, a.load);
    let prospect = expected_prospect(s, p, i, pmf, params, ProspectEval::Direct)?;
    Ok(congestion + queue + battery_risk(ev, a.load) + z_r + prospect)
}

/// Coefficients of the separable prospect term `E(l)` of one vehicle at one
/// station: for `l > 0`, `E = gain_pos l^c1 - c2 loss_pos l^c3`, and mirrored
/// for `l < 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Separable {
    gain_pos: f64,
    loss_pos: f64,
    gain_neg: f64,
    loss_neg: f64,
}

impl Separable {
    fn new(pmf: &[(f64, f64)], params: &PtParams) -> Self {
        let mut out = Separable::default();
        for &(theta, h) in pmf {
            let w = prelec_weight(h, params.c);
            let m = 2.0 * theta.abs();
            if theta < 0.0 {
                // Charging (l > 0) against a deficit realization is a gain.
                out.gain_pos += w * power(m, params.c1);
                out.loss_neg += w * power(m, params.c3);
            } else if theta > 0.0 {
                out.loss_pos += w * power(m, params.c3);
                out.gain_neg += w * power(m, params.c1);
            }
        }
        out
    }

    fn eval(&self, l: f64, params: &PtParams) -> f64 {
        if l > 0.0 {
            self.gain_pos * power(l, params.c1) - params.c2 * self.loss_pos * power(l, params.c3)
        } else if l < 0.0 {
            let m = -l;
            self.gain_neg * power(m, params.c1) - params.c2 * self.loss_neg * power(m, params.c3)
        } else {
            0.0
        }
    }
}

/// The prospect-theoretic game with quadratic pricing: per-station ground
/// pmfs and per-vehicle parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PtModel {
    pub params: Vec<PtParams>,
    /// One pmf per station (virtual stations get a point mass at zero).
    pub pmfs: Vec<Vec<(f64, f64)>>,
    terms: Vec<Vec<Separable>>,
}

impl PtModel {
    /// Fails with [`Error::UnsupportedPricing`] unless all real stations
    /// price quadratically.
    pub fn new(s: &Scenario, params: Vec<PtParams>, real_pmfs: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if let Some(st) = s.real_stations().iter().find(|st| !st.pricing.is_quadratic()) {
            return Err(Error::UnsupportedPricing { exponent: st.pricing.exponent().unwrap_or(0.0) });
        }
        if params.len() != s.n() {
            return Err(Error::validation("options.pt", "one parameter set per vehicle is required"));
        }
        if real_pmfs.len() != s.real_station_count() {
            return Err(Error::validation("options.pt.pmf", "one pmf per station is required"));
        }
        for (j, pmf) in real_pmfs.iter().enumerate() {
            GroundDist::Discrete(pmf.clone())
                .validate()
                .map_err(|m| Error::validation(format!("stations[{j}].ground"), m))?;
        }
        let mut pmfs = real_pmfs;
        pmfs.resize(s.stations.len(), vec![(0.0, 1.0)]);
        let terms = params.iter().map(|pp| pmfs.iter().map(|pmf| Separable::new(pmf, pp)).collect()).collect();
        Ok(PtModel { params, pmfs, terms })
    }

    /// Same parameters and pmf for everyone.
    pub fn uniform(s: &Scenario, params: PtParams, pmf: &[(f64, f64)]) -> Result<Self> {
        Self::new(s, vec![params; s.n()], vec![pmf.to_vec(); s.real_station_count()])
    }

    /// From the scenario's prospect options: the explicit pmf when given,
    /// otherwise each station's ground distribution discretized on
    /// [`PMF_POINTS`] points (a point mass at `g` without one).
    pub fn from_scenario(s: &Scenario, params: Option<PtParams>) -> Result<Self> {
        let opts = s.prospect.as_ref();
        let params = params
            .or(opts.map(|o| o.params))
            .ok_or_else(|| Error::validation("options.pt", "prospect parameters are required"))?;
        let pmfs = match opts.and_then(|o| o.pmf.clone()) {
            Some(pmf) => vec![pmf; s.real_station_count()],
            None => s
                .real_stations()
                .iter()
                .map(|st| st.ground_model.as_ref().map_or(vec![(st.ground, 1.0)], |d| d.discretize(PMF_POINTS)))
                .collect(),
        };
        Self::new(s, vec![params; s.n()], pmfs)
    }

    /// Reduced prospect term of vehicle `i` at `station` with load `l`.
    pub fn prospect_term(&self, i: usize, station: usize, l: f64) -> f64 {
        self.terms[i][station].eval(l, &self.params[i])
    }

    /// Expected ground load at each real station under the model's pmfs.
    pub fn mean_ground(&self, s: &Scenario) -> Vec<f64> {
        self.pmfs[..s.real_station_count()].iter().map(|pmf| pmf.iter().map(|(t, h)| t * h).sum()).collect()
    }
}

impl CostModel for PtModel {
    fn load_cost(&self, s: &Scenario, i: usize, station: usize, others: f64, load: f64) -> f64 {
        battery_risk(&s.evs[i], load) + reference_price_of(s, station, others, load) + self.prospect_term(i, station, load)
    }

    fn best_load(&self, s: &Scenario, i: usize, station: usize, others: f64) -> f64 {
        if s.stations[station].is_virtual {
            return 0.0;
        }
        let (lo, hi) = s.evs[i].load_bounds();
        let f = |l: f64| self.load_cost(s, i, station, others, l);
        let (mut best, mut value) = grid_golden(f, lo, hi, GRID_POINTS, 1e-10);
        // The prospect term has a kink at zero that the grid may straddle.
        if lo < 0.0 && hi > 0.0 && f(0.0) < value {
            best = 0.0;
            value = f(0.0);
        }
        let _ = value;
        best
    }

    fn potential(&self, s: &Scenario, p: &Profile, occ: &Occupancy) -> f64 {
        let roads: f64 = s
            .network
            .edges
            .iter()
            .zip(&occ.edge_counts)
            .map(|(e, &n)| (1..=n).map(|x| latency(e, x)).sum::<f64>())
            .sum();
        let mut stations = 0.0;
        for (j, st) in s.stations.iter().enumerate() {
            if st.is_virtual {
                continue;
            }
            let q = occ.queue_len(j) as f64;
            stations += q * (q + 1.0) / (2.0 * st.sigma) + st.pricing.eval(occ.loads[j]);
        }
        let own: f64 = p
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| battery_risk(&s.evs[i], a.load) + self.prospect_term(i, a.station, a.load))
            .sum();
        roads + stations + own
    }
}

/// Prospect cost via the reduced prospect term, cheap enough for dynamics.
pub fn pt_cost_reduced(model: &PtModel, s: &Scenario, p: &Profile, i: usize) -> f64 {
    let occ = derive_occupancy(s, p);
    let a = &p.actions[i];
    let congestion: f64 = s.route(a.route).iter().map(|&e| latency(&s.network.edges[e], occ.edge_counts[e])).sum();
    congestion
        + s.stations[a.station].queue_cost(occ.queue_len(a.station))
        + model.load_cost(s, i, a.station, occ.load_without(a.station, i, p), a.load)
}

/// Exact potential of the prospect game.
pub fn pt_potential(model: &PtModel, s: &Scenario, p: &Profile) -> f64 {
    model.potential(s, p, &derive_occupancy(s, p))
}

/// Best-response dynamics on prospect costs; same contract as the classical
/// dynamics. Loads are chosen on a dense grid with golden refinement because
/// the prospect term is not convex.
pub fn pt_best_response_dynamics(
    model: &PtModel,
    s: &Scenario,
    initial: &Profile,
    opts: &DynamicsOptions,
) -> Result<DynamicsTrace> {
    run_dynamics_with(model, s, initial, opts)
}

pub fn pt_is_nash(model: &PtModel, s: &Scenario, p: &Profile, tol: f64) -> NashCheck {
    is_nash_with(model, s, p, tol)
}
