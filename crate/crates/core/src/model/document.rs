//! JSON scenario documents and their validation into a [`Scenario`].

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{enumerate_paths, Choice, Edge, Ev, Latency, Network, Pricing, ProspectOptions, Scenario, Station};
use crate::error::{Error, Result};
use crate::prospect::PtParams;
use crate::stochastic::GroundDist;

pub const DEFAULT_PATH_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeDoc>,
    pub stations: Vec<StationDoc>,
    pub evs: Vec<EvDoc>,
    #[serde(default)]
    pub options: OptionsDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub a: f64,
    pub b: f64,
    #[serde(default = "one")]
    pub d: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationDoc {
    pub id: String,
    pub edge: String,
    pub sigma: f64,
    pub k: f64,
    /// Fixed ground load; defaults to the mean of `ground` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground: Option<GroundDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundDoc {
    Fixed {
        value: f64,
    },
    /// Exactly one of `variance` and `std_dev` must be given.
    Normal {
        mean: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        variance: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        std_dev: Option<f64>,
    },
    TruncatedNormal {
        mean: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        variance: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        std_dev: Option<f64>,
        bound: f64,
    },
    Discrete {
        support: Vec<PmfPointDoc>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfPointDoc {
    pub theta: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvDoc {
    pub id: String,
    pub s: String,
    pub t: String,
    pub b: f64,
    pub b_lo: f64,
    pub b_hi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsDoc {
    #[serde(default)]
    pub skip_charging: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pt: Option<ProspectDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProspectDoc {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<PmfPointDoc>>,
}

fn spread(path: &str, variance: Option<f64>, std_dev: Option<f64>) -> Result<f64> {
    match (variance, std_dev) {
        (Some(v), None) => Ok(v),
        (None, Some(s)) => Ok(s * s),
        _ => Err(Error::validation(path, "give exactly one of variance and std_dev")),
    }
}

fn pmf_pairs(points: &[PmfPointDoc]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.theta, p.p)).collect()
}

fn pmf_docs(pairs: &[(f64, f64)]) -> Vec<PmfPointDoc> {
    pairs.iter().map(|&(theta, p)| PmfPointDoc { theta, p }).collect()
}

impl GroundDoc {
    fn to_dist(&self, path: &str) -> Result<GroundDist> {
        let dist = match self {
            GroundDoc::Fixed { value } => GroundDist::Fixed(*value),
            GroundDoc::Normal { mean, variance, std_dev } => {
                GroundDist::Normal { mean: *mean, variance: spread(path, *variance, *std_dev)? }
            }
            GroundDoc::TruncatedNormal { mean, variance, std_dev, bound } => GroundDist::TruncatedNormal {
                mean: *mean,
                variance: spread(path, *variance, *std_dev)?,
                bound: *bound,
            },
            GroundDoc::Discrete { support } => GroundDist::Discrete(pmf_pairs(support)),
        };
        dist.validate().map_err(|m| Error::validation(path, m))?;
        Ok(dist)
    }

    fn from_dist(dist: &GroundDist) -> Self {
        match dist {
            GroundDist::Fixed(v) => GroundDoc::Fixed { value: *v },
            GroundDist::Normal { mean, variance } => {
                GroundDoc::Normal { mean: *mean, variance: Some(*variance), std_dev: None }
            }
            GroundDist::TruncatedNormal { mean, variance, bound } => {
                GroundDoc::TruncatedNormal { mean: *mean, variance: Some(*variance), std_dev: None, bound: *bound }
            }
            GroundDist::Discrete(points) => GroundDoc::Discrete { support: pmf_docs(points) },
        }
    }
}

impl ScenarioDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario documents always serialize")
    }

    /// Checks every invariant and builds the immutable scenario, synthesizing
    /// one virtual station per road when skip-charging is enabled.
    pub fn validate(&self) -> Result<Scenario> {
        let node = |id: &str, path: String| {
            self.nodes
                .iter()
                .position(|n| n == id)
                .ok_or_else(|| Error::validation(path, format!("unknown node {id:?}")))
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, e) in self.edges.iter().enumerate() {
            edges.push(Edge {
                id: e.id.clone(),
                tail: node(&e.tail, format!("edges[{i}].tail"))?,
                head: node(&e.head, format!("edges[{i}].head"))?,
                latency: Latency { a: e.a, b: e.b, d: e.d },
            });
        }
        let network = Network::new(self.nodes.clone(), edges)?;

        let mut stations = Vec::with_capacity(self.stations.len());
        let mut station_ids = HashMap::new();
        for (i, s) in self.stations.iter().enumerate() {
            let path = |field: &str| format!("stations[{i}].{field}");
            if s.id.starts_with('~') {
                return Err(Error::validation(path("id"), "ids starting with '~' are reserved for virtual stations"));
            }
            if station_ids.insert(s.id.as_str(), i).is_some() {
                return Err(Error::validation(path("id"), format!("duplicate station id {:?}", s.id)));
            }
            let edge = network
                .edge_index(&s.edge)
                .ok_or_else(|| Error::validation(path("edge"), format!("unknown edge {:?}", s.edge)))?;
            if !(s.sigma.is_finite() && s.sigma > 0.0) {
                return Err(Error::validation(path("sigma"), "service rate must be positive and finite"));
            }
            if !(s.k.is_finite() && s.k > 0.0) {
                return Err(Error::validation(path("k"), "pricing exponent must be positive"));
            }
            let ground_model = s.ground.as_ref().map(|g| g.to_dist(&path("ground"))).transpose()?;
            let ground = match (s.g, &ground_model) {
                (Some(g), _) => g,
                (None, Some(m)) => m.mean(),
                (None, None) => return Err(Error::validation(path("g"), "either g or ground is required")),
            };
            if !ground.is_finite() {
                return Err(Error::validation(path("g"), "ground load must be finite"));
            }
            stations.push(Station {
                id: s.id.clone(),
                edge,
                sigma: s.sigma,
                pricing: Pricing::Power { k: s.k },
                ground,
                ground_model,
                is_virtual: false,
            });
        }
        let real_stations = stations.len();
        if self.options.skip_charging {
            for (i, e) in network.edges.iter().enumerate() {
                stations.push(Station::virtual_on(i, &e.id));
            }
        }

        let mut ev_ids = HashMap::new();
        let mut evs = Vec::with_capacity(self.evs.len());
        for (i, e) in self.evs.iter().enumerate() {
            let path = |field: &str| format!("evs[{i}].{field}");
            if ev_ids.insert(e.id.as_str(), i).is_some() {
                return Err(Error::validation(path("id"), format!("duplicate vehicle id {:?}", e.id)));
            }
            for (field, v) in [("b", e.b), ("b_lo", e.b_lo), ("b_hi", e.b_hi)] {
                if !v.is_finite() {
                    return Err(Error::validation(path(field), "must be finite"));
                }
            }
            if e.b_lo <= 0.0 {
                return Err(Error::validation(path("b_lo"), "battery floor must be positive"));
            }
            if e.b_lo >= e.b_hi {
                return Err(Error::validation(path("b_lo"), "battery floor must be below capacity"));
            }
            if e.b < e.b_lo || e.b > e.b_hi {
                return Err(Error::validation(path("b"), "battery level must lie between floor and capacity"));
            }
            evs.push(Ev {
                id: e.id.clone(),
                origin: node(&e.s, path("s"))?,
                destination: node(&e.t, path("t"))?,
                battery: e.b,
                floor: e.b_lo,
                capacity: e.b_hi,
            });
        }

        let path_cap = self.options.path_cap.unwrap_or(DEFAULT_PATH_CAP);
        if path_cap == 0 {
            return Err(Error::validation("options.path_cap", "must be at least 1"));
        }
        let mut routes: Vec<Vec<usize>> = Vec::new();
        let mut route_index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut od_routes: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut choices = Vec::with_capacity(evs.len());
        for (i, ev) in evs.iter().enumerate() {
            let key = (ev.origin, ev.destination);
            if !od_routes.contains_key(&key) {
                let paths = enumerate_paths(&network, ev.origin, ev.destination, path_cap)?;
                let ids = paths
                    .into_iter()
                    .map(|p| {
                        *route_index.entry(p.clone()).or_insert_with(|| {
                            routes.push(p);
                            routes.len() - 1
                        })
                    })
                    .collect();
                od_routes.insert(key, ids);
            }
            let ids = &od_routes[&key];
            if ids.is_empty() {
                return Err(Error::validation(path_of(i, "t"), "destination is unreachable from origin"));
            }
            let mut own: Vec<Choice> = Vec::new();
            for &r in ids {
                for (j, st) in stations.iter().enumerate() {
                    if routes[r].contains(&st.edge) {
                        own.push(Choice { route: r, station: j });
                    }
                }
            }
            if own.is_empty() {
                return Err(Error::validation(
                    path_of(i, "t"),
                    "no charging station lies on any route (enable options.skip_charging)",
                ));
            }
            own.sort_by(|a, b| routes[a.route].cmp(&routes[b.route]).then(a.station.cmp(&b.station)));
            choices.push(own);
        }

        let prospect = match &self.options.pt {
            None => None,
            Some(pt) => {
                let params = PtParams::new(pt.c, pt.c1, pt.c2, pt.c3)
                    .map_err(|m| Error::validation("options.pt", m))?;
                let pmf = match &pt.pmf {
                    None => None,
                    Some(points) => {
                        let pairs = pmf_pairs(points);
                        GroundDist::Discrete(pairs.clone())
                            .validate()
                            .map_err(|m| Error::validation("options.pt.pmf", m))?;
                        Some(pairs)
                    }
                };
                Some(ProspectOptions { params, pmf })
            }
        };

        Ok(Scenario {
            network,
            stations,
            evs,
            routes,
            choices,
            skip_charging: self.options.skip_charging,
            path_cap,
            prospect,
            real_stations,
        })
    }
}

fn path_of(i: usize, field: &str) -> String {
    format!("evs[{i}].{field}")
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        ScenarioDoc::from_json(text)?.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        ScenarioDoc::load(path)?.validate()
    }

    /// The document this scenario validates from; virtual stations are not
    /// written out since validation synthesizes them.
    pub fn to_document(&self) -> ScenarioDoc {
        let net = &self.network;
        ScenarioDoc {
            nodes: net.nodes.clone(),
            edges: net
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    id: e.id.clone(),
                    tail: net.nodes[e.tail].clone(),
                    head: net.nodes[e.head].clone(),
                    a: e.latency.a,
                    b: e.latency.b,
                    d: e.latency.d,
                })
                .collect(),
            stations: self
                .real_stations()
                .iter()
                .map(|s| StationDoc {
                    id: s.id.clone(),
                    edge: net.edges[s.edge].id.clone(),
                    sigma: s.sigma,
                    k: s.pricing.exponent().expect("real stations have a pricing exponent"),
                    g: Some(s.ground),
                    ground: s.ground_model.as_ref().map(GroundDoc::from_dist),
                })
                .collect(),
            evs: self
                .evs
                .iter()
                .map(|e| EvDoc {
                    id: e.id.clone(),
                    s: net.nodes[e.origin].clone(),
                    t: net.nodes[e.destination].clone(),
                    b: e.battery,
                    b_lo: e.floor,
                    b_hi: e.capacity,
                })
                .collect(),
            options: OptionsDoc {
                skip_charging: self.skip_charging,
                path_cap: (self.path_cap != DEFAULT_PATH_CAP).then_some(self.path_cap),
                pt: self.prospect.as_ref().map(|p| ProspectDoc {
                    c: p.params.c,
                    c1: p.params.c1,
                    c2: p.params.c2,
                    c3: p.params.c3,
                    pmf: p.pmf.as_deref().map(pmf_docs),
                }),
            },
        }
    }

    pub fn to_json(&self) -> String {
        self.to_document().to_json()
    }
}
