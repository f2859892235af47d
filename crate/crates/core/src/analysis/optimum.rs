use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::costs::{battery_risk, latency, social_cost};
use crate::equilibrium::enumerate::{assignment_total, decode_assignment, station_loads, station_members, LoadCache};
use crate::equilibrium::quadratic_load;
use crate::equilibrium::restricted::equilibrium_loads;
use crate::error::Result;
use crate::model::{Action, Ev, Profile, Scenario, Station};
use crate::numeric::grid_golden;

/// Seeded random starts per station subproblem.
pub const OPT_STARTS: usize = 16;
const START_SEED: u64 = 0x0b7e_5eed;
const GRID_LEVELS: usize = 9;
const GENERAL_GRID_POINTS: usize = 257;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub assignment: u64,
    pub profile: Profile,
    pub value: f64,
}

/// Load-dependent social cost of one station's members:
/// `sum_i ln(cap_i / (b_i + l_i)) + f(-g + L) - f(-g + L - l_i)`.
fn station_value(st: &Station, evs: &[&Ev], loads: &[f64]) -> f64 {
    let total: f64 = loads.iter().sum();
    let base = -st.ground + total;
    let full = st.pricing.eval(base);
    evs.iter()
        .zip(loads)
        .map(|(ev, &l)| battery_risk(ev, l) + full - st.pricing.eval(base - l))
        .sum()
}

/// [`station_value`] with member `i`'s load replaced by `l`.
fn station_value_with(st: &Station, evs: &[&Ev], loads: &[f64], i: usize, l: f64) -> f64 {
    let load = |k: usize| if k == i { l } else { loads[k] };
    let total: f64 = (0..loads.len()).map(load).sum();
    let base = -st.ground + total;
    let full = st.pricing.eval(base);
    (0..evs.len()).map(|k| battery_risk(evs[k], load(k)) + full - st.pricing.eval(base - load(k))).sum()
}

/// Projected coordinate descent from `start`. Each coordinate subproblem is
/// strictly convex for quadratic pricing and solved exactly; otherwise it is
/// solved on a grid with golden refinement.
fn descend(st: &Station, evs: &[&Ev], mut loads: Vec<f64>) -> Vec<f64> {
    let quadratic = st.pricing.is_quadratic();
    let (max_sweeps, tol) = if quadratic { (100_000, 1e-13) } else { (500, 1e-10) };
    for _ in 0..max_sweeps {
        let mut change: f64 = 0.0;
        for i in 0..evs.len() {
            let (lo, hi) = evs[i].load_bounds();
            let rest: f64 = loads.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, l)| l).sum();
            let next = if quadratic {
                // d/dl of the station value: 2l + 4 rest - 2g - 1/(b + l).
                quadratic_load(2.0 * rest - st.ground, evs[i].battery, lo, hi)
            } else {
                let f = |l: f64| station_value_with(st, evs, &loads, i, l);
                grid_golden(f, lo, hi, GENERAL_GRID_POINTS, 1e-10).0
            };
            change = change.max((next - loads[i]).abs());
            loads[i] = next;
        }
        if change < tol {
            break;
        }
    }
    loads
}

/// Minimum of the station's load-dependent social cost over the box of
/// feasible loads, by multistart coordinate descent. Returns loads in member
/// order and the attained value.
pub fn optimal_station_loads(st: &Station, evs: &[&Ev]) -> (Vec<f64>, f64) {
    if evs.is_empty() {
        return (Vec::new(), 0.0);
    }
    if st.is_virtual {
        let zeros = vec![0.0; evs.len()];
        let v = station_value(st, evs, &zeros);
        return (zeros, v);
    }
    let bounds: Vec<(f64, f64)> = evs.iter().map(|e| e.load_bounds()).collect();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    // Splits between floor and capacity, where the concave part of the
    // objective tends to push optima.
    for k in 0..=evs.len() {
        starts.push(bounds.iter().enumerate().map(|(i, b)| if i < k { b.0 } else { b.1 }).collect());
    }
    starts.push(vec![0.0; evs.len()]);
    if st.pricing.is_quadratic() {
        starts.push(equilibrium_loads(st.ground, evs));
    }
    for k in 0..OPT_STARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
        rng.set_stream(k as u64);
        starts.push(
            bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.random_range(0..GRID_LEVELS) as f64 / (GRID_LEVELS - 1) as f64)
                .collect(),
        );
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let loads = descend(st, evs, start);
        let v = station_value(st, evs, &loads);
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((loads, v));
        }
    }
    best.expect("at least one start")
}

/// Minimum social cost over all discrete assignments, each with its
/// best continuous loads.
pub fn social_optimum(s: &Scenario, budget: u64) -> Result<Optimum> {
    let total = assignment_total(s, budget)?;
    let (value, index) = (0..total)
        .into_par_iter()
        .map_init(LoadCache::new, |cache, index| {
            let choices = decode_assignment(s, index);
            let members = station_members(s, &choices);
            let mut counts = vec![0usize; s.network.edges.len()];
            for c in &choices {
                for &e in s.route(c.route) {
                    counts[e] += 1;
                }
            }
            let roads: f64 =
                s.network.edges.iter().zip(&counts).map(|(e, &n)| n as f64 * latency(e, n)).sum();
            let mut value = roads;
            for (j, m) in members.iter().enumerate() {
                value += s.stations[j].queue_cost(m.len()) * m.len() as f64;
            }
            let loads = optimal_loads(s, &members, cache);
            for (j, m) in members.iter().enumerate() {
                if !m.is_empty() {
                    let evs: Vec<&Ev> = m.iter().map(|&i| &s.evs[i]).collect();
                    let l: Vec<f64> = m.iter().map(|&i| loads[i]).collect();
                    value += station_value(&s.stations[j], &evs, &l);
                }
            }
            (value, index)
        })
        .reduce(|| (f64::INFINITY, u64::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let choices = decode_assignment(s, index);
    let members = station_members(s, &choices);
    let loads = optimal_loads(s, &members, &mut LoadCache::new());
    let profile = Profile::new(choices.iter().zip(&loads).map(|(&c, &l)| Action::new(c, l)).collect());
    debug_assert!((social_cost(s, &profile) - value).abs() <= 1e-9 * value.abs().max(1.0));
    Ok(Optimum { assignment: index, value: social_cost(s, &profile), profile })
}

fn optimal_loads(s: &Scenario, members: &[Vec<usize>], cache: &mut LoadCache) -> Vec<f64> {
    station_loads(s, members, cache, |j, evs| optimal_station_loads(&s.stations[j], evs).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{best_response, enumerate_ne, DEFAULT_BUDGET};
    use crate::model::Pricing;

    fn ev() -> Ev {
        Ev { id: "v".into(), origin: 0, destination: 1, battery: 3.0, floor: 0.1, capacity: 5.0 }
    }

    fn station(g: f64, k: f64) -> Station {
        Station {
            id: "q".into(),
            edge: 0,
            sigma: 1.0,
            pricing: Pricing::Power { k },
            ground: g,
            ground_model: None,
            is_virtual: false,
        }
    }

    #[test]
    fn two_members_beat_dense_grid() {
        let e = ev();
        let evs = [&e, &e];
        for (g, k) in [(0.0, 2.0), (3.061, 2.0), (-11.223, 2.0), (1.0, 4.0 / 3.0), (-2.0, 8.0 / 3.0)] {
            let st = station(g, k);
            let (_, v) = optimal_station_loads(&st, &evs);
            let mut grid_best = f64::INFINITY;
            let n = 400;
            for a in 0..=n {
                for b in 0..=n {
                    let la = -2.9 + 4.9 * a as f64 / n as f64;
                    let lb = -2.9 + 4.9 * b as f64 / n as f64;
                    grid_best = grid_best.min(station_value(&st, &evs, &[la, lb]));
                }
            }
            assert!(v <= grid_best + 1e-9, "g={g} k={k}: {v} vs grid {grid_best}");
        }
    }

    #[test]
    fn zero_ground_optimum_is_asymmetric() {
        let e = ev();
        let st = station(0.0, 2.0);
        let (loads, v) = optimal_station_loads(&st, &[&e, &e]);
        let symmetric = equilibrium_loads(0.0, &[&e, &e]);
        assert!(v <= station_value(&st, &[&e, &e], &symmetric) + 1e-12);
        assert!((loads[0] - loads[1]).abs() > 1.0, "{loads:?}");
    }

    fn corridor() -> Scenario {
        Scenario::from_json(include_str!("../../../../scenarios/corridor.json")).unwrap()
    }

    #[test]
    fn single_vehicle_optimum_is_its_best_response() {
        let s = corridor().with_fleet_size(1).unwrap();
        let opt = social_optimum(&s, DEFAULT_BUDGET).unwrap();
        let br = best_response(&s, &s.default_profile(), 0);
        assert!((opt.value - br.cost).abs() < 1e-9);
    }

    #[test]
    fn optimum_is_below_every_equilibrium() {
        let s = corridor().with_fleet_size(5).unwrap();
        let opt = social_optimum(&s, DEFAULT_BUDGET).unwrap();
        for ne in enumerate_ne(&s, DEFAULT_BUDGET).unwrap() {
            assert!(opt.value <= ne.social_cost + 1e-7);
        }
    }
}
