#![allow(dead_code)]

use sigflow::domain::{
    BoundaryData, BrakingSpec, ForceLaw, Forcing, ModelVariant, Numerics, Profile, RoadGrid,
    Scenario, SignalTiming,
};

/// Road of 1 km, light at 600 m, red from t = 20 s for 10 s.
pub fn reference(model: ModelVariant) -> Scenario {
    Scenario {
        model,
        grid: RoadGrid::new(0.0, 1000.0, 200).unwrap(),
        rho0: Profile::Sine {
            base: 0.05,
            amp: 0.01,
            wavelength: 250.0,
            phase: 0.0,
        },
        v0: Profile::constant(10.0),
        inflow: BoundaryData::constant(0.05, 10.0),
        timing: SignalTiming {
            x0: 600.0,
            t0: 20.0,
            tau0: 4.0,
            tau1: 10.0,
            h: 50.0,
        },
        braking: BrakingSpec::Default,
        forcing: Forcing::On(ForceLaw::new(1.5, 16.0, 4.0).unwrap()),
        mu: 5.0,
        t_end: 40.0,
        numerics: Numerics::default(),
        oracle_check: false,
    }
}

pub fn scenario_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn load(name: &str) -> Scenario {
    let path = scenario_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    sigflow::io::scenario_file::parse_scenario(&text)
        .unwrap_or_else(|e| panic!("{}: {e:?}", path.display()))
}

/// Every scenario in the bundled suite, sorted by file name.
pub fn suite() -> Vec<(String, Scenario)> {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".toml"))
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), load(&n))).collect()
}
