use evgrid::equilibrium::DynamicsOptions;
use evgrid::experiment::pt_summary;
use evgrid::prospect::{PtModel, PtParams};
use evgrid::Scenario;

fn scenario() -> Scenario {
    Scenario::from_json(include_str!("../../../scenarios/pt6.json")).unwrap()
}

fn induced(s: &Scenario, params: PtParams) -> f64 {
    let model = PtModel::from_scenario(s, Some(params)).unwrap();
    pt_summary(s, &model, 16, 6, &DynamicsOptions::default(), 1_000_000).unwrap().total_induced_load
}

#[test]
fn weaker_distortion_induces_less_imbalance() {
    let s = scenario();
    let e = PtParams::preset("E").unwrap();
    let strong = induced(&s, e.with_distortion(0.55).unwrap());
    let weak = induced(&s, e.with_distortion(0.95).unwrap());
    assert!(weak <= strong, "c = 0.95 gives {weak}, c = 0.55 gives {strong}");
}

#[test]
fn risk_neutral_players_balance_at_least_as_well_as_preset_d() {
    let s = scenario();
    let rn = induced(&s, PtParams::RISK_NEUTRAL);
    let d = induced(&s, PtParams::preset("D").unwrap());
    assert!(rn <= d, "risk neutral {rn}, preset D {d}");
}
