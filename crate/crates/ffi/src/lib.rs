//! C interface to `evgrid`.
//!
//! Scenarios and profiles are opaque handles created and released through
//! this API. Every fallible call returns an [`EvgridStatus`]; on failure the
//! message is available from [`evgrid_last_error`] on the same thread until
//! the next failing call. Panics never cross the boundary.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use evgrid::analysis::{price_of_anarchy, SolveMode};
use evgrid::costs::{ev_cost, potential, social_cost};
use evgrid::equilibrium::{enumerate_ne, is_nash, run_best_response_dynamics, DynamicsOptions};
use evgrid::stochastic::hoeffding_fleet_size;
use evgrid::{Action, Error, Profile, Scenario};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvgridStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed document or invalid argument.
    Validation = 3,
    BudgetExceeded = 4,
    UnsupportedPricing = 5,
    NotConverged = 6,
    Domain = 7,
    OutOfRange = 8,
    NoEquilibrium = 9,
    Internal = 10,
}

/// A validated scenario.
pub struct EvgridScenario(Scenario);

/// One action per vehicle.
pub struct EvgridProfile(Profile);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> EvgridStatus {
    match e {
        Error::Validation { .. } | Error::Json(_) | Error::PathExplosion { .. } => EvgridStatus::Validation,
        Error::BudgetExceeded { .. } => EvgridStatus::BudgetExceeded,
        Error::UnsupportedPricing { .. } => EvgridStatus::UnsupportedPricing,
        Error::NotConverged(_) | Error::NoConvergence { .. } => EvgridStatus::NotConverged,
        Error::Domain(_) => EvgridStatus::Domain,
        Error::NoNeFound => EvgridStatus::NoEquilibrium,
        Error::Io(_) => EvgridStatus::Internal,
    }
}

struct Fail(EvgridStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EvgridStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EvgridStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EvgridStatus::Internal
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(EvgridStatus::NullPointer, format!("{what} is null")))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(EvgridStatus::NullPointer, format!("{what} is null")))
}

fn check_vehicle(s: &Scenario, p: &Profile, i: usize) -> Result<(), Fail> {
    if p.len() != s.n() {
        return Err(Fail(EvgridStatus::Validation, "profile does not match the scenario".into()));
    }
    if i >= s.n() {
        return Err(Fail(EvgridStatus::OutOfRange, format!("vehicle {i} out of range")));
    }
    Ok(())
}

/// Message of the last failure on this thread, or null. Owned by the
/// library and valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn evgrid_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn evgrid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a scenario document.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_scenario_from_json(json: *const c_char, out: *mut *mut EvgridScenario) -> EvgridStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(Fail(EvgridStatus::NullPointer, "null argument".into()));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Fail(EvgridStatus::InvalidUtf8, "document is not UTF-8".into()))?;
        let s = Scenario::from_json(text)?;
        *out = Box::into_raw(Box::new(EvgridScenario(s)));
        Ok(())
    })
}

/// Releases a scenario; null is ignored.
///
/// # Safety
/// `s` must come from [`evgrid_scenario_from_json`] and not be used after.
#[no_mangle]
pub unsafe extern "C" fn evgrid_scenario_free(s: *mut EvgridScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_scenario_vehicle_count(s: *const EvgridScenario, out: *mut usize) -> EvgridStatus {
    guard(|| {
        *get_mut(out, "out")? = get(s, "scenario")?.0.n();
        Ok(())
    })
}

/// Number of real stations.
///
/// # Safety
/// `s` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_scenario_station_count(s: *const EvgridScenario, out: *mut usize) -> EvgridStatus {
    guard(|| {
        *get_mut(out, "out")? = get(s, "scenario")?.0.real_station_count();
        Ok(())
    })
}

/// Profile in which every vehicle takes its first option with zero load.
///
/// # Safety
/// `s` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_default_profile(s: *const EvgridScenario, out: *mut *mut EvgridProfile) -> EvgridStatus {
    guard(|| {
        let p = get(s, "scenario")?.0.default_profile();
        *get_mut(out, "out")? = Box::into_raw(Box::new(EvgridProfile(p)));
        Ok(())
    })
}

/// Releases a profile; null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used after.
#[no_mangle]
pub unsafe extern "C" fn evgrid_profile_free(p: *mut EvgridProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Reads vehicle `i`'s route, station and load.
///
/// # Safety
/// `p` must be live; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_profile_action(
    p: *const EvgridProfile,
    i: usize,
    route: *mut usize,
    station: *mut usize,
    load: *mut f64,
) -> EvgridStatus {
    guard(|| {
        let p = &get(p, "profile")?.0;
        let a = p.actions.get(i).ok_or_else(|| Fail(EvgridStatus::OutOfRange, format!("vehicle {i} out of range")))?;
        *get_mut(route, "route")? = a.route;
        *get_mut(station, "station")? = a.station;
        *get_mut(load, "load")? = a.load;
        Ok(())
    })
}

/// Replaces vehicle `i`'s action after checking it against the scenario.
///
/// # Safety
/// `s` and `p` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn evgrid_profile_set_action(
    s: *const EvgridScenario,
    p: *mut EvgridProfile,
    i: usize,
    route: usize,
    station: usize,
    load: f64,
) -> EvgridStatus {
    guard(|| {
        let s = &get(s, "scenario")?.0;
        let p = &mut get_mut(p, "profile")?.0;
        check_vehicle(s, p, i)?;
        let a = Action { route, station, load };
        s.check_action(i, &a)?;
        p.actions[i] = a;
        Ok(())
    })
}

/// Best-response dynamics from `initial`; writes the terminal profile and
/// the number of rounds.
///
/// # Safety
/// Handles must be live; `out` and `rounds` writable (`rounds` may be null).
#[no_mangle]
pub unsafe extern "C" fn evgrid_dynamics(
    s: *const EvgridScenario,
    initial: *const EvgridProfile,
    eps: f64,
    max_rounds: usize,
    out: *mut *mut EvgridProfile,
    rounds: *mut usize,
) -> EvgridStatus {
    guard(|| {
        let s = &get(s, "scenario")?.0;
        let initial = &get(initial, "initial")?.0;
        let out = get_mut(out, "out")?;
        if !(eps >= 0.0) {
            return Err(Fail(EvgridStatus::Validation, "eps must be non-negative".into()));
        }
        let opts = DynamicsOptions { eps, max_rounds, ..DynamicsOptions::default() };
        let trace = run_best_response_dynamics(s, initial, &opts)?;
        if let Some(r) = rounds.as_mut() {
            *r = trace.rounds;
        }
        *out = Box::into_raw(Box::new(EvgridProfile(trace.terminal)));
        Ok(())
    })
}

/// Total cost of vehicle `i`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_ev_cost(s: *const EvgridScenario, p: *const EvgridProfile, i: usize, out: *mut f64) -> EvgridStatus {
    guard(|| {
        let s = &get(s, "scenario")?.0;
        let p = &get(p, "profile")?.0;
        check_vehicle(s, p, i)?;
        *get_mut(out, "out")? = ev_cost(s, p, i)?.total;
        Ok(())
    })
}

/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_potential(s: *const EvgridScenario, p: *const EvgridProfile, out: *mut f64) -> EvgridStatus {
    guard(|| {
        let s = &get(s, "scenario")?.0;
        let p = &get(p, "profile")?.0;
        s.check_profile(p)?;
        *get_mut(out, "out")? = potential(s, p);
        Ok(())
    })
}

/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_social_cost(s: *const EvgridScenario, p: *const EvgridProfile, out: *mut f64) -> EvgridStatus {
    guard(|| {
        let s = &get(s, "scenario")?.0;
        let p = &get(p, "profile")?.0;
        s.check_profile(p)?;
        *get_mut(out, "out")? = social_cost(s, p);
        Ok(())
    })
}

/// Whether no vehicle can gain more than `tol` by deviating.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_is_nash(
    s: *const EvgridScenario,
    p: *const EvgridProfile,
    tol: f64,
    out: *mut bool,
) -> EvgridStatus {
    guard(|| {
        let s = &get(s, "scenario")?.0;
        let p = &get(p, "profile")?.0;
        s.check_profile(p)?;
        *get_mut(out, "out")? = is_nash(s, p, tol).is_nash;
        Ok(())
    })
}

/// Number of pure equilibria, by exhaustive enumeration within `budget`
/// assignments.
///
/// # Safety
/// `s` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_equilibrium_count(s: *const EvgridScenario, budget: u64, out: *mut usize) -> EvgridStatus {
    guard(|| {
        let s = &get(s, "scenario")?.0;
        *get_mut(out, "out")? = enumerate_ne(s, budget)?.len();
        Ok(())
    })
}

/// Exact price of anarchy and stability.
///
/// # Safety
/// `s` must be live; `poa` and `pos` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_efficiency(s: *const EvgridScenario, budget: u64, poa: *mut f64, pos: *mut f64) -> EvgridStatus {
    guard(|| {
        let s = &get(s, "scenario")?.0;
        let (poa, pos) = (get_mut(poa, "poa")?, get_mut(pos, "pos")?);
        let r = price_of_anarchy(s, &SolveMode::Exact { budget })?;
        *poa = r.poa_empirical;
        *pos = r.pos_empirical;
        Ok(())
    })
}

/// Fleet size guaranteeing the efficiency bound with probability `1 - eps`
/// for `m` stations with the given ground-load means and variances.
///
/// # Safety
/// `means` and `variances` must point to `m` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evgrid_hoeffding_fleet_size(
    means: *const f64,
    variances: *const f64,
    m: usize,
    bound: f64,
    eps: f64,
    out: *mut u64,
) -> EvgridStatus {
    guard(|| {
        if m > 0 && (means.is_null() || variances.is_null()) {
            return Err(Fail(EvgridStatus::NullPointer, "null moments".into()));
        }
        if !(eps > 0.0 && eps < 1.0) || !(bound > 0.0) {
            return Err(Fail(EvgridStatus::Validation, "need 0 < eps < 1 and bound > 0".into()));
        }
        let moments: Vec<(f64, f64)> = if m == 0 {
            Vec::new()
        } else {
            let (mu, var) = (std::slice::from_raw_parts(means, m), std::slice::from_raw_parts(variances, m));
            mu.iter().copied().zip(var.iter().copied()).collect()
        };
        if moments.iter().any(|&(_, v)| !(v >= 0.0)) {
            return Err(Fail(EvgridStatus::Validation, "variances must be non-negative".into()));
        }
        *get_mut(out, "out")? = hoeffding_fleet_size(&moments, bound, eps);
        Ok(())
    })
}
