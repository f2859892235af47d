//! Random ground loads, fleet sizing from a concentration bound, and Monte
//! Carlo checks of the resulting probabilistic efficiency guarantee.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::analysis::{efficiency_report, SolveMode};
use crate::error::Result;
use crate::model::Scenario;

/// Half-width of the support used when an unbounded distribution has to be
/// discretized.
pub const DEFAULT_SUPPORT_BOUND: f64 = 20.0;

/// Distribution of one station's ground load.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundDist {
    Fixed(f64),
    Normal { mean: f64, variance: f64 },
    /// Normal restricted to `[-bound, bound]` by rejection.
    TruncatedNormal { mean: f64, variance: f64, bound: f64 },
    /// Finite support as `(theta, probability)` pairs.
    Discrete(Vec<(f64, f64)>),
}

impl GroundDist {
    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            GroundDist::Fixed(v) if !v.is_finite() => Err("fixed ground load must be finite".into()),
            GroundDist::Fixed(_) => Ok(()),
            GroundDist::Normal { mean, variance } => check_normal(*mean, *variance),
            GroundDist::TruncatedNormal { mean, variance, bound } => {
                check_normal(*mean, *variance)?;
                if !(bound.is_finite() && *bound > 0.0) {
                    return Err("truncation bound must be positive".into());
                }
                if mean.abs() > *bound {
                    return Err("mean must lie inside the truncation bound".into());
                }
                Ok(())
            }
            GroundDist::Discrete(points) => {
                if points.is_empty() {
                    return Err("pmf needs at least one point".into());
                }
                if points.iter().any(|&(t, p)| !t.is_finite() || !(0.0..=1.0).contains(&p)) {
                    return Err("pmf points need finite support and probabilities in [0, 1]".into());
                }
                let total: f64 = points.iter().map(|p| p.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(format!("pmf sums to {total}, not 1"));
                }
                Ok(())
            }
        }
    }

    /// Nominal mean: the location parameter for (truncated) normals.
    pub fn mean(&self) -> f64 {
        match self {
            GroundDist::Fixed(v) => *v,
            GroundDist::Normal { mean, .. } | GroundDist::TruncatedNormal { mean, .. } => *mean,
            GroundDist::Discrete(points) => points.iter().map(|(t, p)| t * p).sum(),
        }
    }

    /// Nominal `(mean, variance)` used by fleet sizing.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            GroundDist::Fixed(v) => (*v, 0.0),
            GroundDist::Normal { mean, variance } | GroundDist::TruncatedNormal { mean, variance, .. } => {
                (*mean, *variance)
            }
            GroundDist::Discrete(points) => {
                let m = self.mean();
                (m, points.iter().map(|(t, p)| p * (t - m) * (t - m)).sum())
            }
        }
    }

    /// Half-width of the support, if bounded.
    pub fn support_bound(&self) -> Option<f64> {
        match self {
            GroundDist::Fixed(v) => Some(v.abs()),
            GroundDist::Normal { .. } => None,
            GroundDist::TruncatedNormal { bound, .. } => Some(*bound),
            GroundDist::Discrete(points) => Some(points.iter().map(|p| p.0.abs()).fold(0.0, f64::max)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            GroundDist::Fixed(v) => *v,
            GroundDist::Normal { mean, variance } => normal(*mean, *variance).sample(rng),
            GroundDist::TruncatedNormal { mean, variance, bound } => {
                let dist = normal(*mean, *variance);
                loop {
                    let x = dist.sample(rng);
                    if x.abs() <= *bound {
                        return x;
                    }
                }
            }
            GroundDist::Discrete(points) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(t, p) in points {
                    acc += p;
                    if u < acc {
                        return t;
                    }
                }
                points.last().expect("validated pmf is nonempty").0
            }
        }
    }

    /// Finite pmf approximating this distribution: `points` equally spaced
    /// values on `[-K, K]` weighted by the density. Discrete and fixed
    /// distributions are returned as they are.
    pub fn discretize(&self, points: usize) -> Vec<(f64, f64)> {
        let (mean, variance, bound) = match self {
            GroundDist::Fixed(v) => return vec![(*v, 1.0)],
            GroundDist::Discrete(p) => return p.clone(),
            GroundDist::Normal { mean, variance } => (*mean, *variance, DEFAULT_SUPPORT_BOUND),
            GroundDist::TruncatedNormal { mean, variance, bound } => (*mean, *variance, *bound),
        };
        if variance == 0.0 || points < 2 {
            return vec![(mean, 1.0)];
        }
        let step = 2.0 * bound / (points - 1) as f64;
        let raw: Vec<(f64, f64)> = (0..points)
            .map(|k| {
                let x = -bound + step * k as f64;
                (x, (-(x - mean) * (x - mean) / (2.0 * variance)).exp())
            })
            .collect();
        let total: f64 = raw.iter().map(|p| p.1).sum();
        raw.into_iter().map(|(x, w)| (x, w / total)).collect()
    }
}

fn check_normal(mean: f64, variance: f64) -> std::result::Result<(), String> {
    if !mean.is_finite() {
        return Err("mean must be finite".into());
    }
    if !(variance.is_finite() && variance >= 0.0) {
        return Err("variance must be nonnegative".into());
    }
    Ok(())
}

fn normal(mean: f64, variance: f64) -> Normal<f64> {
    Normal::new(mean, variance.sqrt()).expect("validated variance")
}

/// Independent ground-load distributions, one per real station.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundModel {
    pub stations: Vec<GroundDist>,
}

impl GroundModel {
    /// Uses each station's own distribution, falling back to its fixed load.
    pub fn from_scenario(s: &Scenario) -> Self {
        GroundModel {
            stations: s
                .real_stations()
                .iter()
                .map(|st| st.ground_model.clone().unwrap_or(GroundDist::Fixed(st.ground)))
                .collect(),
        }
    }

    pub fn iid(dist: GroundDist, m: usize) -> Self {
        GroundModel { stations: vec![dist; m] }
    }

    pub fn moments(&self) -> Vec<(f64, f64)> {
        self.stations.iter().map(GroundDist::moments).collect()
    }

    /// Largest support half-width across stations, if all are bounded.
    pub fn support_bound(&self) -> Option<f64> {
        self.stations.iter().map(GroundDist::support_bound).try_fold(0.0, |acc, b| b.map(|b| f64::max(acc, b)))
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.stations.iter().map(|d| d.sample(rng)).collect()
    }
}

/// Generator for trial `trial` of a run seeded with `seed`; each trial owns a
/// separate ChaCha stream so results do not depend on scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One independent draw per station; deterministic in `seed`.
pub fn sample_ground(model: &GroundModel, seed: u64) -> Vec<f64> {
    model.draw(&mut trial_rng(seed, 0))
}

/// Right-hand side of the fleet-size condition, before rounding up.
pub fn hoeffding_threshold(moments: &[(f64, f64)], bound: f64, eps: f64) -> f64 {
    let second: f64 = moments.iter().map(|(mu, var)| mu * mu + var).sum();
    let m = moments.len() as f64;
    4.5 * second + 4.5 * bound * (m * (1.0 / eps).ln()).sqrt()
}

/// Smallest fleet size `n` with
/// `n >= 4.5 * sum(mu_j^2 + sigma_j^2) + 4.5 * K * sqrt(m * ln(1/eps))`,
/// which keeps the price of anarchy below `4 + 12 b_max^2` with probability
/// at least `1 - eps`.
pub fn hoeffding_fleet_size(moments: &[(f64, f64)], bound: f64, eps: f64) -> u64 {
    assert!(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
    assert!(bound > 0.0, "support bound must be positive");
    let threshold = hoeffding_threshold(moments, bound, eps);
    if threshold <= 0.0 {
        0
    } else {
        threshold.ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeReport {
    pub trials: usize,
    pub fleet_size: usize,
    /// Trials whose total squared ground load exceeded the fleet size.
    pub exceed_count: usize,
    pub exceed_fraction: f64,
}

/// Fraction of `trials` ground draws with `sum g_j^2 > n`, the sufficient
/// event behind the probabilistic efficiency guarantee.
pub fn monte_carlo_guarantee(model: &GroundModel, n: usize, trials: usize, seed: u64) -> GuaranteeReport {
    assert!(trials >= 100, "at least 100 trials are required");
    let exceed_count = (0..trials as u64)
        .into_par_iter()
        .filter(|&t| {
            let g = model.draw(&mut trial_rng(seed, t));
            g.iter().map(|x| x * x).sum::<f64>() > n as f64
        })
        .count();
    GuaranteeReport { trials, fleet_size: n, exceed_count, exceed_fraction: exceed_count as f64 / trials as f64 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoaGuaranteeReport {
    pub sufficient: GuaranteeReport,
    /// `4 + 12 b_max^2`.
    pub poa_threshold: f64,
    /// Trials whose exact price of anarchy exceeded the threshold.
    pub poa_exceed_count: usize,
    pub poa_exceed_fraction: f64,
    /// Largest price of anarchy seen across trials.
    pub poa_max: f64,
}

/// Like [`monte_carlo_guarantee`], and additionally solves each drawn game
/// exactly on `template` (small instances only) to count trials whose price
/// of anarchy exceeds `4 + 12 b_max^2`.
pub fn monte_carlo_poa(
    template: &Scenario,
    model: &GroundModel,
    trials: usize,
    seed: u64,
    mode: &SolveMode,
) -> Result<PoaGuaranteeReport> {
    assert!(trials >= 100, "at least 100 trials are required");
    let n = template.n();
    let threshold = 4.0 + 12.0 * template.b_max().powi(2);
    let rows: Vec<(bool, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let g = model.draw(&mut trial_rng(seed, t));
            let exceeded = g.iter().map(|x| x * x).sum::<f64>() > n as f64;
            let scenario = template.with_ground(&g)?;
            let report = efficiency_report(&scenario, mode)?;
            Ok((exceeded, report.bounds.poa_empirical))
        })
        .collect::<Result<_>>()?;
    let exceed_count = rows.iter().filter(|r| r.0).count();
    let poa_exceed_count = rows.iter().filter(|r| r.1 > threshold).count();
    Ok(PoaGuaranteeReport {
        sufficient: GuaranteeReport {
            trials,
            fleet_size: n,
            exceed_count,
            exceed_fraction: exceed_count as f64 / trials as f64,
        },
        poa_threshold: threshold,
        poa_exceed_count,
        poa_exceed_fraction: poa_exceed_count as f64 / trials as f64,
        poa_max: rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
    })
}
