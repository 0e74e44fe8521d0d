//! TOML scenario documents.
//!
//! ```toml
//! model = "first"          # or "second"
//! mu = 5.0
//! t_end = 40.0
//!
//! [grid]
//! x_min = 0.0
//! x_max = 1000.0
//! n_cells = 200
//!
//! [signal]
//! x0 = 600.0
//! t0 = 20.0
//! tau0 = 4.0
//! tau1 = 10.0
//! h = 50.0
//!
//! [force]                  # omit to switch the force off
//! f0 = 1.5
//! v_star = 16.0
//! delta = 4.0
//!
//! [profiles]
//! rho0 = "sine_density(base=0.05, amp=0.01, wavelength=250)"
//! v0 = 10.0
//! rho_in = 0.05
//! v_in = 10.0
//! ```
//!
//! Optional: `oracle_check`, `[numerics]` (`cfl`, `parabolic_dt`,
//! `snapshot_interval`, `compat_tol`) and `[braking]` (`gamma`, `speed`) to
//! replace the default braking curve. Profiles are numbers, preset strings or
//! arrays of `[s, value]` pairs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_scenario, BoundaryData, BrakingProfile, BrakingSpec, ForceLaw, Forcing, ModelVariant,
    Numerics, Profile, RoadGrid, Scenario, SignalTiming,
};

/// A problem in a scenario document, with where it was found.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFileError {
    /// 1-based line, when the offending key could be found.
    pub line: Option<usize>,
    /// Dotted key path such as `signal.tau0`; empty for syntax errors.
    pub field: String,
    pub message: String,
}

impl fmt::Display for ScenarioFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.field.is_empty()) {
            (Some(l), false) => write!(f, "line {l}, {}: {}", self.field, self.message),
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (None, false) => write!(f, "{}: {}", self.field, self.message),
            (None, true) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ScenarioFileError {}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawModel {
    First,
    Second,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawProfile {
    Number(f64),
    Text(String),
    Points(Vec<(f64, f64)>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    x0: f64,
    t0: f64,
    tau0: f64,
    tau1: f64,
    h: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForce {
    f0: f64,
    v_star: f64,
    delta: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    #[serde(skip_serializing_if = "Option::is_none")]
    cfl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parabolic_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshot_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compat_tol: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfiles {
    rho0: RawProfile,
    v0: RawProfile,
    rho_in: RawProfile,
    v_in: RawProfile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBraking {
    gamma: RawProfile,
    speed: RawProfile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    model: RawModel,
    mu: f64,
    t_end: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    oracle_check: bool,
    grid: RawGrid,
    signal: RawSignal,
    #[serde(skip_serializing_if = "Option::is_none")]
    force: Option<RawForce>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    numerics: Option<RawNumerics>,
    profiles: RawProfiles,
    #[serde(skip_serializing_if = "Option::is_none")]
    braking: Option<RawBraking>,
}

/// 1-based line of `field` (`section.key` or a top-level `key`) in `text`.
fn locate(text: &str, field: &str) -> Option<usize> {
    let field = field.split('/').next().unwrap_or(field);
    let (section, key) = match field.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", field),
    };
    let mut current = String::new();
    let mut header_line = None;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim().to_string();
            if current == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = trimmed.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn to_profile(raw: &RawProfile) -> Result<Profile, String> {
    match raw {
        RawProfile::Number(v) => Ok(Profile::constant(*v)),
        RawProfile::Text(t) => t
            .parse()
            .map_err(|e: crate::domain::ProfileError| e.to_string()),
        RawProfile::Points(points) => {
            let text = Profile::Table {
                points: points.clone(),
            }
            .to_string();
            text.parse()
                .map_err(|e: crate::domain::ProfileError| e.to_string())
        }
    }
}

fn from_profile(p: &Profile) -> RawProfile {
    match p {
        Profile::Constant { value } => RawProfile::Number(*value),
        other => RawProfile::Text(other.to_string()),
    }
}

/// Parses and validates a scenario document. Every problem found is returned,
/// each with a line and key locator where possible.
pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<ScenarioFileError>> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        vec![ScenarioFileError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            field: String::new(),
            message: e.message().trim().to_string(),
        }]
    })?;

    let mut errors = Vec::new();
    let mut err = |field: &str, message: String| {
        errors.push(ScenarioFileError {
            line: locate(text, field),
            field: field.to_string(),
            message,
        })
    };
    let mut profile = |field: &str, raw: &RawProfile| match to_profile(raw) {
        Ok(p) => Some(p),
        Err(m) => {
            err(field, m);
            None
        }
    };
    let rho0 = profile("profiles.rho0", &raw.profiles.rho0);
    let v0 = profile("profiles.v0", &raw.profiles.v0);
    let rho_in = profile("profiles.rho_in", &raw.profiles.rho_in);
    let v_in = profile("profiles.v_in", &raw.profiles.v_in);
    let braking = match &raw.braking {
        Some(b) => {
            let gamma = profile("braking.gamma", &b.gamma);
            let speed = profile("braking.speed", &b.speed);
            gamma
                .zip(speed)
                .map(|(gamma, speed)| BrakingSpec::Custom(BrakingProfile { gamma, speed }))
        }
        None => Some(BrakingSpec::Default),
    };

    let grid = RoadGrid::new(raw.grid.x_min, raw.grid.x_max, raw.grid.n_cells)
        .map_err(|e| err("grid.n_cells", e.to_string()))
        .ok();
    let forcing = match &raw.force {
        None => Some(Forcing::Off),
        Some(f) => ForceLaw::new(f.f0, f.v_star, f.delta)
            .map(Forcing::On)
            .map_err(|e| err("force.delta", e.to_string()))
            .ok(),
    };
    let defaults = Numerics::default();
    let rn = raw.numerics.unwrap_or_default();
    let numerics = Numerics {
        cfl: rn.cfl.unwrap_or(defaults.cfl),
        parabolic_dt: rn.parabolic_dt.unwrap_or(defaults.parabolic_dt),
        snapshot_interval: rn.snapshot_interval.unwrap_or(defaults.snapshot_interval),
        compat_tol: rn.compat_tol.unwrap_or(defaults.compat_tol),
    };

    let (Some(rho0), Some(v0), Some(rho_in), Some(v_in), Some(braking), Some(grid), Some(forcing)) =
        (rho0, v0, rho_in, v_in, braking, grid, forcing)
    else {
        return Err(errors);
    };
    let s = Scenario {
        model: match raw.model {
            RawModel::First => ModelVariant::First,
            RawModel::Second => ModelVariant::Second,
        },
        grid,
        rho0,
        v0,
        inflow: BoundaryData { rho_in, v_in },
        timing: SignalTiming {
            x0: raw.signal.x0,
            t0: raw.signal.t0,
            tau0: raw.signal.tau0,
            tau1: raw.signal.tau1,
            h: raw.signal.h,
        },
        braking,
        forcing,
        mu: raw.mu,
        t_end: raw.t_end,
        numerics,
        oracle_check: raw.oracle_check,
    };
    for v in validate_scenario(&s) {
        err(
            &v.field,
            format!("{} ({})", v.condition.describe(), v.detail),
        );
    }
    if errors.is_empty() {
        Ok(s)
    } else {
        Err(errors)
    }
}

/// Writes `s` as a document that [`parse_scenario`] reads back to an equal value.
pub fn serialize_scenario(s: &Scenario) -> String {
    let force = match s.forcing {
        Forcing::Off => None,
        Forcing::On(law) => Some(RawForce {
            f0: law.f0(),
            v_star: law.v_star(),
            delta: law.delta(),
        }),
    };
    let braking = match &s.braking {
        BrakingSpec::Default => None,
        BrakingSpec::Custom(b) => Some(RawBraking {
            gamma: from_profile(&b.gamma),
            speed: from_profile(&b.speed),
        }),
    };
    let n = s.numerics;
    let raw = RawScenario {
        model: match s.model {
            ModelVariant::First => RawModel::First,
            ModelVariant::Second => RawModel::Second,
        },
        mu: s.mu,
        t_end: s.t_end,
        oracle_check: s.oracle_check,
        grid: RawGrid {
            x_min: s.grid.x_min(),
            x_max: s.grid.x_max(),
            n_cells: s.grid.n_cells(),
        },
        signal: RawSignal {
            x0: s.timing.x0,
            t0: s.timing.t0,
            tau0: s.timing.tau0,
            tau1: s.timing.tau1,
            h: s.timing.h,
        },
        force,
        numerics: Some(RawNumerics {
            cfl: Some(n.cfl),
            parabolic_dt: Some(n.parabolic_dt),
            snapshot_interval: Some(n.snapshot_interval),
            compat_tol: Some(n.compat_tol),
        }),
        profiles: RawProfiles {
            rho0: from_profile(&s.rho0),
            v0: from_profile(&s.v0),
            rho_in: from_profile(&s.inflow.rho_in),
            v_in: from_profile(&s.inflow.v_in),
        },
        braking,
    };
    toml::to_string(&raw).expect("scenario fields are always representable in TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model = "first"
mu = 5.0
t_end = 40.0

[grid]
x_min = 0.0
x_max = 1000.0
n_cells = 200

[signal]
x0 = 600.0
t0 = 20.0
tau0 = 4.0
tau1 = 10.0
h = 50.0

[profiles]
rho0 = "sine_density(base=0.1, amp=0.05, wavelength=200)"
v0 = 10
rho_in = 0.1
v_in = 10.0
"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.numerics, Numerics::default());
        assert_eq!(s.braking, BrakingSpec::Default);
        assert_eq!(s.forcing, Forcing::Off);
        assert!(!s.oracle_check);
        let x = s.grid.centers();
        for (i, r) in s.rho0.sample(&x).iter().enumerate() {
            let expected = 0.1 + 0.05 * (2.0 * std::f64::consts::PI * x[i] / 200.0).sin();
            assert_eq!(*r, expected);
        }
    }

    #[test]
    fn negative_lead_time_cites_signal_order() {
        let text = MINIMAL.replace("tau0 = 4.0", "tau0 = -1.0");
        let errs = parse_scenario(&text).unwrap_err();
        let e = errs.iter().find(|e| e.field == "signal.tau0").unwrap();
        assert_eq!(e.line, Some(14));
        assert!(e.message.contains("t0 > tau0 > 0"), "{}", e.message);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let text = MINIMAL.replace("h = 50.0", "h = 50.0\nheight = 3.0");
        let errs = parse_scenario(&text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("height"), "{}", errs[0].message);
        assert_eq!(errs[0].line, Some(17));
    }

    #[test]
    fn unknown_preset_is_located() {
        let text = MINIMAL.replace("v0 = 10", "v0 = \"gaussian(mean=1)\"");
        let errs = parse_scenario(&text).unwrap_err();
        assert_eq!(errs[0].field, "profiles.v0");
        assert_eq!(errs[0].line, Some(20));
        assert!(errs[0].message.contains("gaussian"));
    }

    #[test]
    fn inline_tables_parse() {
        let text = MINIMAL.replace("v0 = 10", "v0 = [[0.0, 10.0], [1000.0, 12.0]]");
        let s = parse_scenario(&text).unwrap();
        assert_eq!(s.v0.eval(500.0), 11.0);
    }

    #[test]
    fn serialize_round_trips() {
        let mut text = MINIMAL.to_string();
        text.push_str("\n[force]\nf0 = 1.5\nv_star = 16.0\ndelta = 4.0\n");
        let s = parse_scenario(&text).unwrap();
        let again = parse_scenario(&serialize_scenario(&s)).unwrap();
        assert_eq!(again, s);
    }
}
