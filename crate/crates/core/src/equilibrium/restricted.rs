use crate::error::{Error, Result};
use crate::model::{Ev, Scenario};

/// How the loads of one station's members are fixed once their discrete
/// choices are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RestrictedRule {
    /// The unique equilibrium of the members' load game: every member's load
    /// is a best response to the others'.
    #[default]
    Equilibrium,
    /// Three-case formula minimizing the symmetric restricted cost
    /// `(2q-1) l^2 - 2 l g + ln(b_max / (b + l))` for identical members.
    /// This is not an equilibrium of the load game; heterogeneous members fall
    /// back to [`RestrictedRule::Equilibrium`].
    SymmetricMinimizer,
}

/// Minimizer of `(2q-1) l^2 - 2 l g + ln(b_hi / (b + l))` over
/// `[b_lo - b, b_hi - b]`.
pub fn symmetric_minimizer_load(g: f64, q: usize, b: f64, b_lo: f64, b_hi: f64) -> f64 {
    assert!(q >= 1, "station needs at least one member");
    let w = (2 * q - 1) as f64;
    if g <= w * (b_lo - b) - 1.0 / (2.0 * b_lo) {
        return b_lo - b;
    }
    if g >= w * (b_hi - b) - 1.0 / (2.0 * b_hi) {
        return b_hi - b;
    }
    let psi = w * b + g;
    let denom = 4.0 * q as f64 - 2.0;
    ((2.0 * g - psi + (psi * psi + denom).sqrt()) / denom).clamp(b_lo - b, b_hi - b)
}

/// Equilibrium loads of members with parameters `evs` at a quadratic-price
/// station with ground load `g`.
///
/// For a fixed aggregate `L`, member `i` best responds with
/// `clamp(1 / (2 (L - g)) - b_i)` (its upper bound when `L <= g`), which is
/// nonincreasing in `L`; the equilibrium aggregate is the unique root of
/// `sum_i l_i(L) = L`, found by bisection.
pub(crate) fn equilibrium_loads(g: f64, evs: &[&Ev]) -> Vec<f64> {
    if evs.is_empty() {
        return Vec::new();
    }
    let load_at = |ev: &Ev, total: f64| {
        let (lo, hi) = ev.load_bounds();
        let gap = total - g;
        if gap <= 0.0 {
            hi
        } else {
            (1.0 / (2.0 * gap) - ev.battery).clamp(lo, hi)
        }
    };
    let excess = |total: f64| evs.iter().map(|ev| load_at(ev, total)).sum::<f64>() - total;
    let mut lo: f64 = evs.iter().map(|ev| ev.load_bounds().0).sum();
    let mut hi: f64 = evs.iter().map(|ev| ev.load_bounds().1).sum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let total = 0.5 * (lo + hi);
    evs.iter().map(|ev| load_at(ev, total)).collect()
}

/// Loads of `members` (vehicle indices) at `station` under `rule`, in member
/// order. Virtual stations force zero loads.
pub fn restricted_station_ne(s: &Scenario, station: usize, members: &[usize], rule: RestrictedRule) -> Result<Vec<f64>> {
    let st = &s.stations[station];
    if st.is_virtual {
        return Ok(vec![0.0; members.len()]);
    }
    if !st.pricing.is_quadratic() {
        return Err(Error::UnsupportedPricing { exponent: st.pricing.exponent().unwrap_or(0.0) });
    }
    let evs: Vec<&Ev> = members.iter().map(|&i| &s.evs[i]).collect();
    let identical = evs.windows(2).all(|w| w[0].signature() == w[1].signature());
    Ok(match rule {
        RestrictedRule::SymmetricMinimizer if identical && !evs.is_empty() => {
            let ev = evs[0];
            vec![symmetric_minimizer_load(st.ground, evs.len(), ev.battery, ev.floor, ev.capacity); evs.len()]
        }
        _ => equilibrium_loads(st.ground, &evs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::marginal_price;
    use crate::equilibrium::quadratic_load;

    fn ev(b: f64) -> Ev {
        Ev { id: "v".into(), origin: 0, destination: 1, battery: b, floor: 0.1, capacity: 5.0 }
    }

    #[test]
    fn symmetric_minimizer_reproduces_listed_loads() {
        assert!((symmetric_minimizer_load(-11.223, 4, 3.0, 0.1, 5.0) - (-1.5539)).abs() < 1e-4);
        assert!((symmetric_minimizer_load(3.061, 4, 3.0, 0.1, 5.0) - 0.4580).abs() < 1e-4);
        assert!((symmetric_minimizer_load(0.937, 1, 3.0, 0.1, 5.0) - 1.0602).abs() < 1e-4);
    }

    #[test]
    fn symmetric_minimizer_interior_stationarity() {
        for (g, q) in [(-11.223, 4), (3.061, 4), (0.937, 1), (2.0, 7), (-1.0, 2)] {
            let l = symmetric_minimizer_load(g, q, 3.0, 0.1, 5.0);
            let w = (2 * q - 1) as f64;
            assert!((l - (g + 1.0 / (2.0 * (3.0 + l))) / w).abs() < 1e-10, "g={g} q={q}");
        }
    }

    #[test]
    fn symmetric_minimizer_clamps() {
        assert_eq!(symmetric_minimizer_load(-100.0, 3, 3.0, 0.1, 5.0), -2.9);
        assert_eq!(symmetric_minimizer_load(100.0, 3, 3.0, 0.1, 5.0), 2.0);
    }

    #[test]
    fn equilibrium_loads_are_mutual_best_responses() {
        let fleet = [ev(3.0), ev(1.0), ev(4.5), ev(0.5)];
        for g in [-11.223, -3.0, 0.0, 0.937, 3.061, 25.0] {
            let refs: Vec<&Ev> = fleet.iter().collect();
            let loads = equilibrium_loads(g, &refs);
            let total: f64 = loads.iter().sum();
            for (k, e) in fleet.iter().enumerate() {
                let (lo, hi) = e.load_bounds();
                let br = quadratic_load(total - loads[k] - g, e.battery, lo, hi);
                assert!((br - loads[k]).abs() < 1e-9, "g={g} member {k}: {br} vs {}", loads[k]);
            }
        }
    }

    #[test]
    fn symmetric_equilibrium_matches_closed_root() {
        // Identical members solve 2 q u^2 - 2 (q b + g) u - 1 = 0 with u = b + l.
        for (g, q) in [(-11.223, 4usize), (3.061, 4), (0.937, 1)] {
            let fleet = vec![ev(3.0); q];
            let refs: Vec<&Ev> = fleet.iter().collect();
            let loads = equilibrium_loads(g, &refs);
            let qf = q as f64;
            let m = qf * 3.0 + g;
            let u = (m + (m * m + 2.0 * qf).sqrt()) / (2.0 * qf);
            let expected = (u - 3.0).clamp(-2.9, 2.0);
            assert!(loads.iter().all(|l| (l - expected).abs() < 1e-12), "g={g}: {loads:?} vs {expected}");
        }
    }

    #[test]
    fn equilibrium_and_minimizer_differ_for_crowded_stations() {
        let fleet = vec![ev(3.0); 4];
        let refs: Vec<&Ev> = fleet.iter().collect();
        let eq = equilibrium_loads(3.061, &refs)[0];
        let min = symmetric_minimizer_load(3.061, 4, 3.0, 0.1, 5.0);
        assert!((eq - 0.7982).abs() < 1e-4);
        assert!((eq - min).abs() > 0.3);
        // A lone member makes the two rules coincide.
        let one = equilibrium_loads(0.937, &refs[..1])[0];
        assert!((one - symmetric_minimizer_load(0.937, 1, 3.0, 0.1, 5.0)).abs() < 1e-12);
    }

    #[test]
    fn no_member_gains_from_changing_its_load() {
        let fleet = vec![ev(3.0); 4];
        let refs: Vec<&Ev> = fleet.iter().collect();
        let loads = equilibrium_loads(-11.223, &refs);
        let st = crate::model::Station {
            id: "q".into(),
            edge: 0,
            sigma: 1.0,
            pricing: crate::model::Pricing::Power { k: 2.0 },
            ground: -11.223,
            ground_model: None,
            is_virtual: false,
        };
        let others: f64 = loads[1..].iter().sum();
        let cost = |l: f64| (5.0f64 / (3.0 + l)).ln() + marginal_price(&st, others, l);
        let at = cost(loads[0]);
        for k in 0..=2000 {
            let l = -2.9 + 4.9 * k as f64 / 2000.0;
            assert!(cost(l) >= at - 1e-12);
        }
    }
}
