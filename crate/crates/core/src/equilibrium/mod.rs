//! Best responses, best-response dynamics, Nash verification, the per-station
//! restricted load game, and exact equilibrium enumeration.

pub(crate) mod enumerate;
pub(crate) mod restricted;

pub use enumerate::{decode_assignment, enumerate_ne, Equilibrium, DEFAULT_BUDGET};
pub use restricted::{restricted_station_ne, symmetric_minimizer_load, RestrictedRule};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::costs::{battery_risk, latency, marginal_price, potential_with};
use crate::error::{Error, Result};
use crate::model::{derive_occupancy, Action, Choice, Ev, Occupancy, Pricing, Profile, Scenario};
use crate::numeric::grid_golden;

/// Grid resolution for non-quadratic load minimization.
pub const LOAD_GRID_POINTS: usize = 4096;
const LOAD_TOL: f64 = 1e-10;

/// Everything the load choice of one vehicle at one station depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadContext {
    pub ground: f64,
    /// Aggregate load of the station's other members.
    pub others: f64,
    pub pricing: Pricing,
    pub battery: f64,
    pub floor: f64,
    pub capacity: f64,
}

impl LoadContext {
    pub fn new(ev: &Ev, ground: f64, others: f64, pricing: Pricing) -> Self {
        LoadContext { ground, others, pricing, battery: ev.battery, floor: ev.floor, capacity: ev.capacity }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.floor - self.battery, self.capacity - self.battery)
    }

    /// Load-dependent part of the vehicle cost.
    pub fn objective(&self, l: f64) -> f64 {
        let base = -self.ground + self.others;
        (self.capacity / (self.battery + l)).ln() + self.pricing.eval(base + l) - self.pricing.eval(base)
    }
}

/// Minimizer over `[lo, hi]` of `l^2 + 2 shift l - ln(b + l)`, from the
/// positive root of `2u^2 + 2(shift - b)u - 1 = 0` with `u = b + l`.
pub(crate) fn quadratic_load(shift: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let beta = shift - b;
    let root = beta.mul_add(beta, 2.0).sqrt();
    // The two algebraically equal forms avoid cancellation on either sign.
    let u = if beta > 0.0 { 1.0 / (beta + root) } else { (root - beta) / 2.0 };
    (u - b).clamp(lo, hi)
}

/// Best load for one vehicle at one station. Quadratic pricing uses the exact
/// stationarity root; other exponents a dense grid plus golden refinement;
/// virtual stations force zero.
pub fn optimize_load_1d(ctx: &LoadContext) -> f64 {
    let (lo, hi) = ctx.bounds();
    match ctx.pricing {
        Pricing::Zero => 0.0,
        p if p.is_quadratic() => quadratic_load(ctx.others - ctx.ground, ctx.battery, lo, hi),
        _ => grid_golden(|l| ctx.objective(l), lo, hi, LOAD_GRID_POINTS, LOAD_TOL).0,
    }
}

/// A cost structure players best-respond to. Road and queue terms are shared;
/// models differ in the load-dependent part.
pub trait CostModel: Sync {
    /// Load-dependent cost of vehicle `i` at `station` next to `others`.
    fn load_cost(&self, s: &Scenario, i: usize, station: usize, others: f64, load: f64) -> f64;
    fn best_load(&self, s: &Scenario, i: usize, station: usize, others: f64) -> f64;
    fn potential(&self, s: &Scenario, p: &Profile, occ: &Occupancy) -> f64;

    /// Moves the loads of `members` of `station` to a fixed point of load
    /// best responses, in place. Each update is a best response, so the
    /// potential never rises. The default iterates Gauss-Seidel sweeps.
    fn settle(&self, s: &Scenario, station: usize, members: &[usize], loads: &mut [f64]) {
        gauss_seidel_loads(self, s, station, members, loads);
    }
}

const SETTLE_SWEEPS: usize = 500;
const SETTLE_TOL: f64 = 1e-10;

fn gauss_seidel_loads(
    model: &(impl CostModel + ?Sized),
    s: &Scenario,
    station: usize,
    members: &[usize],
    loads: &mut [f64],
) {
    for _ in 0..SETTLE_SWEEPS {
        let mut change: f64 = 0.0;
        for k in 0..members.len() {
            let others: f64 = loads.iter().enumerate().filter(|&(o, _)| o != k).map(|(_, l)| l).sum();
            let i = members[k];
            let next = model.best_load(s, i, station, others);
            if model.load_cost(s, i, station, others, next) < model.load_cost(s, i, station, others, loads[k]) {
                change = change.max((next - loads[k]).abs());
                loads[k] = next;
            }
        }
        if change < SETTLE_TOL {
            break;
        }
    }
}

/// The deterministic cost of the base game.
#[derive(Debug, Clone, Copy, Default)]
pub struct Classical;

impl CostModel for Classical {
    fn load_cost(&self, s: &Scenario, i: usize, station: usize, others: f64, load: f64) -> f64 {
        battery_risk(&s.evs[i], load) + marginal_price(&s.stations[station], others, load)
    }

    fn best_load(&self, s: &Scenario, i: usize, station: usize, others: f64) -> f64 {
        let st = &s.stations[station];
        optimize_load_1d(&LoadContext::new(&s.evs[i], st.ground, others, st.pricing))
    }

    fn potential(&self, s: &Scenario, p: &Profile, occ: &Occupancy) -> f64 {
        potential_with(s, p, occ)
    }

    fn settle(&self, s: &Scenario, station: usize, members: &[usize], loads: &mut [f64]) {
        let st = &s.stations[station];
        if st.pricing.is_quadratic() {
            let evs: Vec<&Ev> = members.iter().map(|&i| &s.evs[i]).collect();
            loads.copy_from_slice(&restricted::equilibrium_loads(st.ground, &evs));
        } else {
            gauss_seidel_loads(self, s, station, members, loads);
        }
    }
}

/// Costs of unilateral deviations of vehicle `i`, with everyone else fixed.
pub(crate) struct Deviations<'a> {
    s: &'a Scenario,
    p: &'a Profile,
    occ: &'a Occupancy,
    i: usize,
}

impl<'a> Deviations<'a> {
    pub(crate) fn new(s: &'a Scenario, p: &'a Profile, occ: &'a Occupancy, i: usize) -> Self {
        Deviations { s, p, occ, i }
    }

    /// Aggregate load of the other members of `station`.
    pub(crate) fn others(&self, station: usize) -> f64 {
        self.occ.load_without(station, self.i, self.p)
    }

    /// Road and queue cost of taking `c` after leaving the current choice.
    fn fixed_cost(&self, c: Choice) -> f64 {
        let own = &self.p.actions[self.i];
        let own_route = self.s.route(own.route);
        let congestion: f64 = self
            .s
            .route(c.route)
            .iter()
            .map(|&e| {
                let n = self.occ.edge_counts[e] - usize::from(own_route.contains(&e)) + 1;
                latency(&self.s.network.edges[e], n)
            })
            .sum();
        let members = self.occ.queue_len(c.station) - usize::from(own.station == c.station) + 1;
        congestion + self.s.stations[c.station].queue_cost(members)
    }

    pub(crate) fn cost(&self, model: &impl CostModel, a: &Action) -> f64 {
        self.fixed_cost(a.choice()) + model.load_cost(self.s, self.i, a.station, self.others(a.station), a.load)
    }

    /// Cheapest option with its optimal load. Ties go to the earlier option.
    pub(crate) fn best(&self, model: &impl CostModel) -> (Action, f64) {
        let mut best: Option<(Action, f64)> = None;
        for &c in &self.s.choices[self.i] {
            let others = self.others(c.station);
            let load = model.best_load(self.s, self.i, c.station, others);
            let cost = self.fixed_cost(c) + model.load_cost(self.s, self.i, c.station, others, load);
            let better = match best {
                None => true,
                Some((_, b)) => cost < b - 1e-12 * b.abs().max(1.0),
            };
            if better {
                best = Some((Action::new(c, load), cost));
            }
        }
        best.expect("every vehicle has at least one option")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse {
    pub action: Action,
    pub cost: f64,
}

pub fn best_response_with(model: &impl CostModel, s: &Scenario, p: &Profile, i: usize) -> BestResponse {
    let occ = derive_occupancy(s, p);
    let (action, cost) = Deviations::new(s, p, &occ, i).best(model);
    BestResponse { action, cost }
}

/// Best action of vehicle `i` against the rest of `p`.
pub fn best_response(s: &Scenario, p: &Profile, i: usize) -> BestResponse {
    best_response_with(&Classical, s, p, i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UpdateOrder {
    RoundRobin,
    /// A fresh seeded permutation of the vehicles every round.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsOptions {
    pub eps: f64,
    pub max_rounds: usize,
    pub order: UpdateOrder,
    /// Once no vehicle gains more than `eps`, move every station's loads to
    /// the fixed point of load best responses and resume. Without this the
    /// continuous loads stop about `sqrt(eps)` short of equilibrium.
    pub settle_loads: bool,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        DynamicsOptions { eps: 1e-6, max_rounds: 10_000, order: UpdateOrder::RoundRobin, settle_loads: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Move {
    pub mover: usize,
    /// Load-only update from the settling pass, whose gain may be below `eps`.
    pub settle: bool,
    pub old: Action,
    pub new: Action,
    pub phi_before: f64,
    pub phi_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsTrace {
    pub moves: Vec<Move>,
    pub terminal: Profile,
    pub converged: bool,
    pub eps: f64,
    /// Rounds started, including the final quiet one.
    pub rounds: usize,
}

/// Round-based best-response dynamics under `model`. A vehicle moves only if
/// that lowers its cost by more than `eps`; the run stops after a round
/// without moves (and, with `settle_loads`, a settling pass that changed
/// nothing). Exceeding `max_rounds` yields [`Error::NotConverged`].
pub fn run_dynamics_with(
    model: &impl CostModel,
    s: &Scenario,
    initial: &Profile,
    opts: &DynamicsOptions,
) -> Result<DynamicsTrace> {
    if !(opts.eps > 0.0 && opts.eps.is_finite()) {
        return Err(Error::validation("eps", "threshold must be positive"));
    }
    s.check_profile(initial)?;
    let mut p = initial.clone();
    let mut occ = derive_occupancy(s, &p);
    let mut phi = model.potential(s, &p, &occ);
    let mut moves = Vec::new();
    let mut order: Vec<usize> = (0..s.n()).collect();
    let mut rng = match opts.order {
        UpdateOrder::Shuffled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        UpdateOrder::RoundRobin => None,
    };
    let mut rounds = 0;
    let mut settled = !opts.settle_loads;
    while rounds < opts.max_rounds {
        rounds += 1;
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let mut moved = false;
        for &i in &order {
            let dev = Deviations::new(s, &p, &occ, i);
            let current = dev.cost(model, &p.actions[i]);
            let (action, cost) = dev.best(model);
            if current - cost > opts.eps {
                let old = p.actions[i];
                p.actions[i] = action;
                occ = derive_occupancy(s, &p);
                let next = model.potential(s, &p, &occ);
                moves.push(Move { mover: i, settle: false, old, new: action, phi_before: phi, phi_after: next });
                phi = next;
                moved = true;
            }
        }
        if moved {
            settled = !opts.settle_loads;
            continue;
        }
        if !settled {
            settled = true;
            let before = p.clone();
            settle_all(model, s, &mut p, &occ);
            for i in (0..s.n()).filter(|&i| p.actions[i] != before.actions[i]) {
                let mut partial = p.clone();
                for k in i + 1..s.n() {
                    partial.actions[k] = before.actions[k];
                }
                let next = model.potential(s, &partial, &derive_occupancy(s, &partial));
                moves.push(Move {
                    mover: i,
                    settle: true,
                    old: before.actions[i],
                    new: p.actions[i],
                    phi_before: phi,
                    phi_after: next,
                });
                phi = next;
            }
            if p != before {
                occ = derive_occupancy(s, &p);
                continue;
            }
        }
        {
            return Ok(DynamicsTrace { moves, terminal: p, converged: true, eps: opts.eps, rounds });
        }
    }
    Err(Error::NotConverged(Box::new(DynamicsTrace { moves, terminal: p, converged: false, eps: opts.eps, rounds })))
}

fn settle_all(model: &impl CostModel, s: &Scenario, p: &mut Profile, occ: &Occupancy) {
    for (j, st) in s.stations.iter().enumerate() {
        if st.is_virtual || occ.queue_len(j) == 0 {
            continue;
        }
        let members: Vec<usize> = (0..s.n()).filter(|&i| p.actions[i].station == j).collect();
        let mut loads: Vec<f64> = members.iter().map(|&i| p.actions[i].load).collect();
        model.settle(s, j, &members, &mut loads);
        for (&i, &l) in members.iter().zip(&loads) {
            p.actions[i].load = l;
        }
    }
}

pub fn run_best_response_dynamics(s: &Scenario, initial: &Profile, opts: &DynamicsOptions) -> Result<DynamicsTrace> {
    run_dynamics_with(&Classical, s, initial, opts)
}

/// Uniform seeded choice of option per vehicle with zero load; start `k` of a
/// multi-start run with seed `seed` uses its own ChaCha stream.
pub fn random_profile(s: &Scenario, seed: u64, k: u64) -> Profile {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    Profile::new(s.choices.iter().map(|c| Action::new(c[rng.random_range(0..c.len())], 0.0)).collect())
}

/// Default number of starts for multi-start dynamics.
pub const DEFAULT_STARTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub ev: usize,
    pub action: Action,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashCheck {
    pub is_nash: bool,
    /// Most profitable unilateral deviation when one beats `tol`.
    pub worst: Option<Deviation>,
    /// Largest gain any vehicle could obtain by deviating.
    pub max_gain: f64,
}

pub fn is_nash_with(model: &impl CostModel, s: &Scenario, p: &Profile, tol: f64) -> NashCheck {
    let occ = derive_occupancy(s, p);
    is_nash_occ(model, s, p, &occ, |_| tol)
}

/// Checks every vehicle against its best response; `tol(cost)` is the slack
/// allowed for a vehicle currently paying `cost`.
pub(crate) fn is_nash_occ(
    model: &impl CostModel,
    s: &Scenario,
    p: &Profile,
    occ: &Occupancy,
    tol: impl Fn(f64) -> f64,
) -> NashCheck {
    let mut worst: Option<Deviation> = None;
    let mut max_gain = f64::NEG_INFINITY;
    let mut ok = true;
    for i in 0..p.len() {
        let dev = Deviations::new(s, p, occ, i);
        let current = dev.cost(model, &p.actions[i]);
        let (action, cost) = dev.best(model);
        let gain = current - cost;
        if gain > tol(current) {
            ok = false;
            if worst.as_ref().is_none_or(|w| gain > w.gain) {
                worst = Some(Deviation { ev: i, action, gain });
            }
        }
        max_gain = max_gain.max(gain);
    }
    NashCheck { is_nash: ok, worst, max_gain: if p.is_empty() { 0.0 } else { max_gain } }
}

/// True iff no vehicle can lower its cost by more than `tol`.
pub fn is_nash(s: &Scenario, p: &Profile, tol: f64) -> NashCheck {
    is_nash_with(&Classical, s, p, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::ev_cost;
    use crate::model::ScenarioDoc;

    fn corridor() -> Scenario {
        Scenario::from_json(include_str!("../../../../scenarios/corridor.json")).unwrap()
    }

    fn ctx(g: f64) -> LoadContext {
        LoadContext {
            ground: g,
            others: 0.0,
            pricing: Pricing::Power { k: 2.0 },
            battery: 3.0,
            floor: 0.1,
            capacity: 5.0,
        }
    }

    #[test]
    fn quadratic_load_examples() {
        let l = optimize_load_1d(&ctx(0.0));
        assert!((l - (11f64.sqrt() - 3.0) / 2.0).abs() < 1e-14);
        assert!((l - 0.158_312).abs() < 1e-6);
        assert_eq!(optimize_load_1d(&ctx(-100.0)), -2.9);
        assert!((optimize_load_1d(&ctx(0.937)) - 1.060148).abs() < 1e-6);
    }

    #[test]
    fn grid_agrees_with_root() {
        for g in [-4.0, -0.5, 0.0, 0.937, 3.0, 50.0] {
            let c = ctx(g);
            let exact = optimize_load_1d(&c);
            let (lo, hi) = c.bounds();
            let (approx, _) = grid_golden(|l| c.objective(l), lo, hi, LOAD_GRID_POINTS, LOAD_TOL);
            // Golden refinement on function values resolves x to about sqrt(machine eps).
            assert!((exact - approx).abs() < 1e-7, "g={g}: {exact} vs {approx}");
        }
    }

    #[test]
    fn non_quadratic_load_beats_dense_samples() {
        for k in [2.0 / 3.0, 4.0 / 3.0, 8.0 / 3.0] {
            let c = LoadContext { pricing: Pricing::Power { k }, others: 0.4, ..ctx(1.7) };
            let best = c.objective(optimize_load_1d(&c));
            let (lo, hi) = c.bounds();
            for s in 0..=20_000 {
                let l = lo + (hi - lo) * s as f64 / 20_000.0;
                assert!(c.objective(l) >= best - 1e-9, "k={k}, l={l}");
            }
        }
    }

    #[test]
    fn virtual_station_forces_zero_load() {
        assert_eq!(optimize_load_1d(&LoadContext { pricing: Pricing::Zero, ..ctx(5.0) }), 0.0);
    }

    #[test]
    fn lone_vehicle_prefers_cheaper_parallel_road() {
        let s = ScenarioDoc::from_json(
            r#"{
              "nodes": ["s", "t"],
              "edges": [
                {"id": "fast", "tail": "s", "head": "t", "a": 5, "b": 10},
                {"id": "slow", "tail": "s", "head": "t", "a": 6, "b": 20}
              ],
              "stations": [],
              "evs": [{"id": "v", "s": "s", "t": "t", "b": 3, "b_lo": 0.1, "b_hi": 5}],
              "options": {"skip_charging": true}
            }"#,
        )
        .unwrap()
        .validate()
        .unwrap();
        let br = best_response(&s, &s.default_profile(), 0);
        assert_eq!(s.routes[br.action.route], vec![0]);
        assert!(s.stations[br.action.station].is_virtual);
        assert_eq!(br.action.load, 0.0);
    }

    #[test]
    fn lone_vehicle_in_corridor_discharges_at_deficit_station() {
        let s = corridor().with_fleet_size(1).unwrap();
        let br = best_response(&s, &s.default_profile(), 0);
        assert_eq!(s.stations[br.action.station].id, "Q2");
        assert!(br.action.load < 0.0);
    }

    #[test]
    fn dynamics_decrease_potential_and_end_at_nash() {
        let s = corridor();
        let trace = run_best_response_dynamics(&s, &s.default_profile(), &DynamicsOptions::default()).unwrap();
        assert!(trace.converged);
        assert!(!trace.moves.is_empty());
        // Settle moves shift a whole station at once, so only each
        // contiguous block of them has to lower the potential.
        let mut block: Option<f64> = None;
        for (k, m) in trace.moves.iter().enumerate() {
            if m.settle {
                let start = *block.get_or_insert(m.phi_before);
                let last = trace.moves.get(k + 1).is_none_or(|n| !n.settle);
                if last {
                    assert!(m.phi_after <= start + 1e-9, "{m:?}");
                    block = None;
                }
            } else {
                assert!(m.phi_before - m.phi_after > trace.eps * 0.999);
            }
        }
        let check = is_nash(&s, &trace.terminal, 10.0 * trace.eps);
        assert!(check.is_nash, "{check:?}");
        let again = run_best_response_dynamics(&s, &trace.terminal, &DynamicsOptions::default()).unwrap();
        assert!(again.moves.is_empty());
        assert_eq!(again.rounds, 1);
    }

    #[test]
    fn best_response_matches_direct_cost() {
        let s = corridor();
        let p = random_profile(&s, 5, 0);
        for i in 0..s.n() {
            let br = best_response(&s, &p, i);
            let moved = p.with_action(i, br.action);
            let direct = ev_cost(&s, &moved, i).unwrap().total;
            assert!((direct - br.cost).abs() < 1e-9 * direct.abs().max(1.0));
            assert!(br.cost <= ev_cost(&s, &p, i).unwrap().total + 1e-12);
        }
    }

    #[test]
    fn non_terminal_profile_is_not_nash() {
        let s = corridor();
        let trace = run_best_response_dynamics(&s, &s.default_profile(), &DynamicsOptions::default()).unwrap();
        let first = &trace.moves[0];
        let check = is_nash(&s, &s.default_profile(), 1e-9);
        assert!(!check.is_nash);
        assert!(check.worst.is_some());
        assert_eq!(first.old, s.default_profile().actions[first.mover]);
    }

    #[test]
    fn shuffled_order_is_reproducible() {
        let s = corridor();
        let opts = DynamicsOptions { order: UpdateOrder::Shuffled { seed: 11 }, ..Default::default() };
        let a = run_best_response_dynamics(&s, &random_profile(&s, 1, 3), &opts).unwrap();
        let b = run_best_response_dynamics(&s, &random_profile(&s, 1, 3), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_round_budget_reports_trace() {
        let s = corridor();
        let opts = DynamicsOptions { max_rounds: 1, ..Default::default() };
        match run_best_response_dynamics(&s, &s.default_profile(), &opts) {
            Err(Error::NotConverged(trace)) => {
                assert!(!trace.converged);
                assert!(!trace.moves.is_empty());
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
