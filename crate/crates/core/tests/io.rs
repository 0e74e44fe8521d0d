use proptest::prelude::*;
use serde_json::Value;

use sigflow::domain::{BoundaryData, BrakingSpec, FlowState, ModelVariant, Profile, RoadGrid};
use sigflow::io::plot::{emit_plot, PlotField};
use sigflow::io::report::{
    build_report, failure_report, read_report, write_report, RunStatus, REPORT_SCHEMA,
};
use sigflow::io::scenario_file::{parse_scenario, serialize_scenario};
use sigflow::io::snapshot::{format_snapshot, read_snapshot, write_snapshot};
use sigflow::orchestrator::{run_model, PhaseName};

mod common;

fn validator() -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(report: &Value) {
    let v = validator();
    let errors: Vec<String> = v
        .iter_errors(report)
        .map(|e| format!("{e} at {}", e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn snapshot_files_round_trip_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let s = common::reference(ModelVariant::First);
    let state = FlowState::from_profiles(s.grid, &s.rho0, &s.v0, 1.0 / 3.0).unwrap();
    let path = dir.path().join("snap.csv");
    write_snapshot(&state, &path).unwrap();
    let back = read_snapshot(&path).unwrap();
    assert_eq!(back.t, state.t);
    assert_eq!(back.rho, state.rho);
    assert_eq!(back.v, state.v);
    assert_eq!(back.x, state.grid.centers());

    let again = dir.path().join("again.csv");
    write_snapshot(&state, &again).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&again).unwrap()
    );
    assert_eq!(
        format_snapshot(&state).unwrap(),
        std::fs::read_to_string(&path).unwrap()
    );
}

#[test]
fn completed_reports_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    for model in [ModelVariant::First, ModelVariant::Second] {
        let mut s = common::reference(model);
        s.oracle_check = true;
        let run = run_model(&s, model).unwrap();
        let report = build_report(&run);
        assert_eq!(report.status, RunStatus::Completed);
        assert_eq!(report.phases.len(), 4);
        assert_valid(&serde_json::to_value(&report).unwrap());

        let path = dir.path().join(format!("{model}.json"));
        write_report(&report, &path).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);
    }
}

#[test]
fn failed_reports_name_the_phase() {
    let mut s = common::reference(ModelVariant::First);
    s.braking = BrakingSpec::Custom(sigflow::domain::BrakingProfile {
        gamma: Profile::Ramp {
            from: 550.0,
            to: 600.0,
            start: 16.0,
            end: 20.0,
        },
        speed: Profile::Ramp {
            from: 2.0,
            to: 0.0,
            start: 16.0,
            end: 20.0,
        },
    });
    let failure = run_model(&s, ModelVariant::First).unwrap_err();
    let report = failure_report(s.model, &failure);
    assert_eq!(report.status, RunStatus::Failed);
    assert_eq!(report.failed_phase, Some(PhaseName::Upstream));
    assert!(report.error.as_deref().unwrap().contains("braking speed"));
    assert_eq!(report.phases.len(), 1);
    assert_valid(&serde_json::to_value(&report).unwrap());
}

#[test]
fn closed_road_report_has_tiny_mass_residual() {
    let mut s = common::load("closed_entry.toml");
    s.inflow = BoundaryData::empty();
    let run = run_model(&s, s.model).unwrap();
    let report = build_report(&run);
    assert!(report.mass_closure_residual.unwrap().abs() <= 1e-10);
}

#[test]
fn bundled_scenarios_parse_and_reserialize() {
    let suite = common::suite();
    assert!(suite.len() >= 5);
    for (name, s) in suite {
        let text = serialize_scenario(&s);
        let back = parse_scenario(&text).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert_eq!(back, s, "{name}");
    }
}

#[test]
fn parse_errors_carry_lines_and_fields() {
    let text = std::fs::read_to_string(common::scenario_dir().join("reference.toml")).unwrap();
    let broken = text.replace("n_cells = 200", "n_cells = 2");
    let errors = parse_scenario(&broken).unwrap_err();
    let e = errors
        .iter()
        .find(|e| e.field == "grid.n_cells")
        .expect("n_cells error");
    let line = broken
        .lines()
        .position(|l| l.starts_with("n_cells"))
        .unwrap()
        + 1;
    assert_eq!(e.line, Some(line));
}

#[test]
fn plots_cover_the_whole_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = common::reference(ModelVariant::First);
    let run = run_model(&s, ModelVariant::First).unwrap();
    let states: Vec<&FlowState> = run.timeline.iter().map(|p| &p.state).collect();
    let (csv, svg) = (dir.path().join("p.csv"), dir.path().join("p.svg"));
    emit_plot(&states, PlotField::Velocity, Some(&run.markers), &csv, &svg).unwrap();
    let rows = std::fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows, 1 + states.len() * s.grid.n_cells());
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg.matches(r#"class="marker""#).count(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenarios_survive_serialization(
        n in 40usize..400, rho in 0.0..0.2f64, v in 0.0..30.0f64,
        mu in 0.1..50.0f64, tau1 in 1.0..20.0f64, second in any::<bool>(),
    ) {
        let mut s = common::reference(if second { ModelVariant::Second } else { ModelVariant::First });
        s.grid = RoadGrid::new(0.0, 1000.0, n).unwrap();
        s.rho0 = Profile::Plateau { base: rho, peak: rho + 0.05, start: 100.0, end: 300.0, ramp: 20.0 };
        s.v0 = Profile::constant(v);
        s.mu = mu;
        s.timing.tau1 = tau1;
        let back = parse_scenario(&serialize_scenario(&s)).unwrap();
        prop_assert_eq!(back, s);
    }
}
