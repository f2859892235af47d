use serde::Serialize;

use crate::error::Result;
use crate::model::{derive_occupancy, Profile, Scenario};

/// Residual station imbalance at a profile, good/bad classification and the
/// load-balancing guarantee for identical batteries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    /// Real stations only, in scenario order.
    pub station_ids: Vec<String>,
    pub queue_sizes: Vec<usize>,
    pub loads: Vec<f64>,
    /// `g_j - L_j`.
    pub residuals: Vec<f64>,
    /// `sqrt(5) / (2 b_min)`.
    pub threshold: f64,
    pub bad: Vec<bool>,
    pub v0_all: f64,
    pub vne_all: f64,
    pub v0_bad: f64,
    pub vne_bad: f64,
    /// Guaranteed reduction per bad station (`None` for good or empty
    /// stations, or when batteries differ).
    pub mu: Vec<Option<f64>>,
    /// `100 (V0 - VNE) / V0` over all stations.
    pub improvement_percent: f64,
    /// `sum_j |L_j|`.
    pub total_abs_load: f64,
    /// `VNE_bad < V0_bad - sum mu^2`, taken over occupied bad stations and
    /// vacuously true when none is occupied; `None` when batteries differ.
    pub balance_bound_ok: Option<bool>,
    /// Every initially good station keeps `(g^NE)^2 <= 5 / (4 b_min^2)`.
    pub good_stay_good: bool,
}

/// Balance quantities for the loads of `p`. The profile is not required to
/// be an equilibrium; the guarantee flags only mean something when it is.
pub fn balance_report(s: &Scenario, p: &Profile) -> Result<BalanceReport> {
    s.check_profile(p)?;
    let occ = derive_occupancy(s, p);
    let m = s.real_station_count();
    let b_min = s.b_min();
    let b_max = s.b_max();
    let threshold = 5f64.sqrt() / (2.0 * b_min);
    let good_cap = 5.0 / (4.0 * b_min * b_min);
    let common_battery = (s.n() > 0 && s.identical_batteries()).then(|| s.evs[0].battery);

    let stations = s.real_stations();
    let loads: Vec<f64> = occ.loads[..m].to_vec();
    let residuals: Vec<f64> = stations.iter().zip(&loads).map(|(st, l)| st.ground - l).collect();
    let bad: Vec<bool> = stations.iter().map(|st| st.ground.abs() > threshold).collect();
    let queue_sizes: Vec<usize> = (0..m).map(|j| occ.queue_len(j)).collect();

    let mu: Vec<Option<f64>> = (0..m)
        .map(|j| {
            let b = common_battery?;
            let q = queue_sizes[j];
            if !bad[j] || q == 0 {
                return None;
            }
            let g = stations[j].ground;
            let w = (2 * q - 1) as f64;
            let qf = q as f64;
            Some(if g <= w * (b_min - b) - 1.0 / (2.0 * b_min) {
                qf * (b_min - b)
            } else if g >= w * (b_max - b) + 1.0 / (2.0 * b_max) {
                qf * (b_max - b)
            } else {
                g / 2.0
            })
        })
        .collect();

    let sq = |x: f64| x * x;
    let v0_all: f64 = stations.iter().map(|st| sq(st.ground)).sum();
    let vne_all: f64 = residuals.iter().map(|&r| sq(r)).sum();
    let v0_bad: f64 = (0..m).filter(|&j| bad[j]).map(|j| sq(stations[j].ground)).sum();
    let vne_bad: f64 = (0..m).filter(|&j| bad[j]).map(|j| sq(residuals[j])).sum();

    let balance_bound_ok = common_battery.map(|_| {
        let occupied: Vec<usize> = (0..m).filter(|&j| bad[j] && queue_sizes[j] > 0).collect();
        if occupied.is_empty() {
            return true;
        }
        let v0: f64 = occupied.iter().map(|&j| sq(stations[j].ground)).sum();
        let vne: f64 = occupied.iter().map(|&j| sq(residuals[j])).sum();
        let reduction: f64 = occupied.iter().map(|&j| sq(mu[j].expect("occupied bad station"))).sum();
        vne < v0 - reduction
    });
    let good_stay_good = (0..m).filter(|&j| !bad[j]).all(|j| sq(residuals[j]) <= good_cap);

    Ok(BalanceReport {
        station_ids: stations.iter().map(|st| st.id.clone()).collect(),
        queue_sizes,
        improvement_percent: if v0_all > 0.0 { 100.0 * (v0_all - vne_all) / v0_all } else { 0.0 },
        total_abs_load: loads.iter().map(|l| l.abs()).sum(),
        loads,
        residuals,
        threshold,
        bad,
        v0_all,
        vne_all,
        v0_bad,
        vne_bad,
        mu,
        balance_bound_ok,
        good_stay_good,
    })
}
