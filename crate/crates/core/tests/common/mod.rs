//! Random instances and profiles shared by the integration tests.
#![allow(dead_code)]

use evgrid::model::ScenarioDoc;
use evgrid::{Action, Profile, Scenario};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn corridor() -> Scenario {
    Scenario::from_json(include_str!("../../../../scenarios/corridor.json")).unwrap()
}

pub fn corridor_fast_service() -> Scenario {
    Scenario::from_json(include_str!("../../../../scenarios/corridor_fast.json")).unwrap()
}

#[derive(Debug, Clone)]
pub struct Shape {
    pub vehicles: (usize, usize),
    pub latency_d: f64,
    pub pricing_k: f64,
    /// Every vehicle shares origin, destination and battery parameters.
    pub identical: bool,
    pub max_assignments: f64,
}

impl Shape {
    pub fn new(vehicles: (usize, usize), latency_d: f64, pricing_k: f64) -> Self {
        Shape { vehicles, latency_d, pricing_k, identical: false, max_assignments: 2e5 }
    }
}

fn round(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// A random layered network with a few stations; retried until the
/// document validates and the assignment space is small enough.
pub fn random_instance(rng: &mut ChaCha8Rng, shape: &Shape) -> Scenario {
    loop {
        if let Some(s) = try_instance(rng, shape) {
            return s;
        }
    }
}

fn try_instance(rng: &mut ChaCha8Rng, shape: &Shape) -> Option<Scenario> {
    let nodes = rng.random_range(2..=4usize);
    let names: Vec<String> = (0..nodes).map(|i| format!("n{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..nodes - 1 {
        // One or two parallel roads between consecutive nodes, plus skips.
        for _ in 0..rng.random_range(1..=2) {
            edges.push((i, i + 1));
        }
        if i + 2 < nodes && rng.random_bool(0.5) {
            edges.push((i, i + 2));
        }
    }
    let edge_docs: Vec<_> = edges
        .iter()
        .enumerate()
        .map(|(k, &(t, h))| {
            json!({"id": format!("e{k}"), "tail": names[t], "head": names[h],
                   "a": round(rng.random_range(0.5..5.0)), "b": round(rng.random_range(0.0..10.0)), "d": shape.latency_d})
        })
        .collect();
    let m = rng.random_range(1..=3usize.min(edges.len()));
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < m {
        let e = rng.random_range(0..edges.len());
        if !chosen.contains(&e) {
            chosen.push(e);
        }
    }
    let stations: Vec<_> = chosen
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let g: f64 = rng.random_range(-6.0..6.0);
            json!({"id": format!("q{j}"), "edge": format!("e{e}"), "sigma": round(rng.random_range(0.3..2.0)),
                   "k": shape.pricing_k, "g": round(g)})
        })
        .collect();
    let n = rng.random_range(shape.vehicles.0..=shape.vehicles.1);
    let battery = |rng: &mut ChaCha8Rng| {
        let lo = round(rng.random_range(0.05..0.5));
        let b = round(rng.random_range(lo + 0.5..lo + 3.0));
        let hi = round(rng.random_range(b + 0.5..b + 3.0));
        (b, lo, hi)
    };
    let shared = battery(rng);
    let evs: Vec<_> = (0..n)
        .map(|i| {
            let (b, lo, hi) = if shape.identical { shared } else { battery(rng) };
            json!({"id": format!("v{i}"), "s": names[0], "t": names[nodes - 1], "b": b, "b_lo": lo, "b_hi": hi})
        })
        .collect();
    let skip = rng.random_bool(0.3);
    let doc = json!({"nodes": names, "edges": edge_docs, "stations": stations, "evs": evs,
                     "options": {"skip_charging": skip}});
    let s = ScenarioDoc::from_json(&doc.to_string()).ok()?.validate().ok()?;
    (s.n() > 0 && s.assignment_count() <= shape.max_assignments).then_some(s)
}

pub fn random_action(rng: &mut ChaCha8Rng, s: &Scenario, i: usize) -> Action {
    let c = s.choices[i][rng.random_range(0..s.choices[i].len())];
    let load = if s.stations[c.station].is_virtual {
        0.0
    } else {
        let (lo, hi) = s.evs[i].load_bounds();
        rng.random_range(lo..=hi)
    };
    Action::new(c, load)
}

pub fn random_loaded_profile(rng: &mut ChaCha8Rng, s: &Scenario) -> Profile {
    Profile::new((0..s.n()).map(|i| random_action(rng, s, i)).collect())
}
