use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use evgrid_ffi::*;

const DOC: &str = r#"{
  "nodes": ["s", "t"],
  "edges": [
    {"id": "e1", "tail": "s", "head": "t", "a": 1, "b": 2},
    {"id": "e2", "tail": "s", "head": "t", "a": 1, "b": 2}
  ],
  "stations": [
    {"id": "q1", "edge": "e1", "sigma": 1, "k": 2, "g": 1.5},
    {"id": "q2", "edge": "e2", "sigma": 1, "k": 2, "g": -0.5}
  ],
  "evs": [
    {"id": "a", "s": "s", "t": "t", "b": 2, "b_lo": 0.5, "b_hi": 4},
    {"id": "b", "s": "s", "t": "t", "b": 2, "b_lo": 0.5, "b_hi": 4}
  ]
}"#;

fn scenario() -> *mut EvgridScenario {
    let doc = CString::new(DOC).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { evgrid_scenario_from_json(doc.as_ptr(), &mut s) }, EvgridStatus::Ok);
    s
}

fn last_error() -> String {
    let p = evgrid_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn malformed_document_sets_error() {
    let doc = CString::new(r#"{"nodes": []}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { evgrid_scenario_from_json(doc.as_ptr(), &mut s) }, EvgridStatus::Validation);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments_are_rejected() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { evgrid_scenario_from_json(ptr::null(), &mut s) }, EvgridStatus::NullPointer);
    let mut n = 0usize;
    assert_eq!(unsafe { evgrid_scenario_vehicle_count(ptr::null(), &mut n) }, EvgridStatus::NullPointer);
    unsafe {
        evgrid_scenario_free(ptr::null_mut());
        evgrid_profile_free(ptr::null_mut());
    }
}

#[test]
fn dynamics_reach_an_equilibrium() {
    let s = scenario();
    unsafe {
        let (mut n, mut m) = (0usize, 0usize);
        assert_eq!(evgrid_scenario_vehicle_count(s, &mut n), EvgridStatus::Ok);
        assert_eq!(evgrid_scenario_station_count(s, &mut m), EvgridStatus::Ok);
        assert_eq!((n, m), (2, 2));
        let mut start = ptr::null_mut();
        assert_eq!(evgrid_default_profile(s, &mut start), EvgridStatus::Ok);
        let (mut end, mut rounds) = (ptr::null_mut(), 0usize);
        assert_eq!(evgrid_dynamics(s, start, 1e-9, 1000, &mut end, &mut rounds), EvgridStatus::Ok);
        assert!(rounds >= 1);
        let mut nash = false;
        assert_eq!(evgrid_is_nash(s, end, 1e-6, &mut nash), EvgridStatus::Ok);
        assert!(nash);
        let (mut phi0, mut phi1) = (0.0, 0.0);
        assert_eq!(evgrid_potential(s, start, &mut phi0), EvgridStatus::Ok);
        assert_eq!(evgrid_potential(s, end, &mut phi1), EvgridStatus::Ok);
        assert!(phi1 < phi0);
        let (mut total, mut parts) = (0.0, 0.0);
        assert_eq!(evgrid_social_cost(s, end, &mut total), EvgridStatus::Ok);
        for i in 0..2 {
            let mut c = 0.0;
            assert_eq!(evgrid_ev_cost(s, end, i, &mut c), EvgridStatus::Ok);
            parts += c;
        }
        assert!((total - parts).abs() < 1e-9 * total.abs());
        let mut c = 0.0;
        assert_eq!(evgrid_ev_cost(s, end, 2, &mut c), EvgridStatus::OutOfRange);
        evgrid_profile_free(end);
        evgrid_profile_free(start);
        evgrid_scenario_free(s);
    }
}

#[test]
fn actions_round_trip_and_are_checked() {
    let s = scenario();
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(evgrid_default_profile(s, &mut p), EvgridStatus::Ok);
        assert_eq!(evgrid_profile_set_action(s, p, 1, 1, 1, 0.75), EvgridStatus::Ok);
        let (mut r, mut st, mut l) = (9usize, 9usize, 9.0);
        assert_eq!(evgrid_profile_action(p, 1, &mut r, &mut st, &mut l), EvgridStatus::Ok);
        assert_eq!((r, st, l), (1, 1, 0.75));
        // Station 0 sits on the other road.
        assert_eq!(evgrid_profile_set_action(s, p, 1, 1, 0, 0.0), EvgridStatus::Validation);
        assert_eq!(evgrid_profile_set_action(s, p, 0, 0, 0, 10.0), EvgridStatus::Validation);
        assert_eq!(evgrid_profile_action(p, 5, &mut r, &mut st, &mut l), EvgridStatus::OutOfRange);
        evgrid_profile_free(p);
        evgrid_scenario_free(s);
    }
}

#[test]
fn enumeration_and_efficiency() {
    let s = scenario();
    unsafe {
        let mut count = 0usize;
        assert_eq!(evgrid_equilibrium_count(s, 1_000_000, &mut count), EvgridStatus::Ok);
        assert!(count >= 1);
        assert_eq!(evgrid_equilibrium_count(s, 1, &mut count), EvgridStatus::BudgetExceeded);
        let (mut poa, mut pos) = (0.0, 0.0);
        assert_eq!(evgrid_efficiency(s, 1_000_000, &mut poa, &mut pos), EvgridStatus::Ok);
        assert!(pos <= poa && pos >= 1.0 - 1e-9);
        evgrid_scenario_free(s);
    }
}

#[test]
fn fleet_size() {
    let mu = [0.0; 3];
    let var = [10.0; 3];
    let mut n = 0u64;
    assert_eq!(
        unsafe { evgrid_hoeffding_fleet_size(mu.as_ptr(), var.as_ptr(), 3, 20.0, 0.05, &mut n) },
        EvgridStatus::Ok
    );
    assert_eq!(n, 405);
    assert_eq!(
        unsafe { evgrid_hoeffding_fleet_size(mu.as_ptr(), var.as_ptr(), 3, 20.0, 1.5, &mut n) },
        EvgridStatus::Validation
    );
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(evgrid_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/evgrid.h")).unwrap();
    let source = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct EvgridScenario EvgridScenario;"));
}

fn static_lib() -> Option<PathBuf> {
    // Test binaries live in <target>/<profile>/deps.
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libevgrid_ffi.a");
    lib.exists().then_some(lib)
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_against_static_library() {
    if !have_cc() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let lib = static_lib().expect("static library is built alongside the tests");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(Path::new(&exe)).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
