use std::fmt;

use super::{BoundaryData, BrakingProfile, Forcing, Profile, RoadGrid, SignalTiming, MIN_CELLS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    /// Pressureless hyperbolic flow, viscous only upstream of the light while it is red.
    First,
    /// Viscous flow in every phase.
    Second,
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelVariant::First => "first",
            ModelVariant::Second => "second",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub cfl: f64,
    pub parabolic_dt: f64,
    pub snapshot_interval: f64,
    /// Allowed mismatch between the braking speed and the simulated speed at handoff (m/s).
    pub compat_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            cfl: 0.5,
            parabolic_dt: 1e-3,
            snapshot_interval: 1.0,
            compat_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BrakingSpec {
    /// Cosine ease built at handoff from the simulated speed at `x0 - h`.
    Default,
    Custom(BrakingProfile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: ModelVariant,
    pub grid: RoadGrid,
    pub rho0: Profile,
    pub v0: Profile,
    pub inflow: BoundaryData,
    pub timing: SignalTiming,
    pub braking: BrakingSpec,
    pub forcing: Forcing,
    pub mu: f64,
    pub t_end: f64,
    pub numerics: Numerics,
    /// Requests the mass-coordinate reference check; tightens the density condition.
    pub oracle_check: bool,
}

/// Which modelling condition a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    GridExtent,
    GridResolution,
    NonNegativeDensity,
    NonNegativeVelocity,
    PositiveInitialDensity,
    NonNegativeInflow,
    PositiveForce,
    ForceMargin,
    SignalOrder,
    RedDuration,
    BrakingZone,
    BrakingStart,
    BrakingStop,
    BrakingMonotone,
    BrakingSpeedSign,
    StopAtRed,
    PositiveViscosity,
    Horizon,
    Numerics,
}

impl Condition {
    pub fn describe(&self) -> &'static str {
        match self {
            Condition::GridExtent => "road grid needs finite x_max > x_min",
            Condition::GridResolution => "each split sub-road needs at least 4 cells",
            Condition::NonNegativeDensity => "initial density must be finite and >= 0",
            Condition::NonNegativeVelocity => "initial velocity must be finite and >= 0",
            Condition::PositiveInitialDensity => {
                "initial density must be > 0 everywhere for the mass-coordinate inverse to exist"
            }
            Condition::NonNegativeInflow => "inflow density and speed must be >= 0",
            Condition::PositiveForce => "driver acceleration f0 must be > 0",
            Condition::ForceMargin => "speed margin must satisfy 0 < delta < v_star",
            Condition::SignalOrder => "signal timing needs t0 > tau0 > 0",
            Condition::RedDuration => "red phase duration tau1 must be > 0",
            Condition::BrakingZone => {
                "braking zone needs 0 < h < x0 and x_min < x0 - h < x0 < x_max"
            }
            Condition::BrakingStart => "braking line must start at x0 - h when braking begins",
            Condition::BrakingStop => "braking line must sit at x0 from t0 onward",
            Condition::BrakingMonotone => "braking line must be non-decreasing",
            Condition::BrakingSpeedSign => "braking speed must be >= 0",
            Condition::StopAtRed => "braking speed must be 0 from t0 onward",
            Condition::PositiveViscosity => "viscosity mu must be > 0",
            Condition::Horizon => "t_end must reach the green light at t0 + tau1",
            Condition::Numerics => "numerical parameters out of range",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub condition: Condition,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({})",
            self.field,
            self.condition.describe(),
            self.detail
        )
    }
}

const TIME_SAMPLES: usize = 1000;

fn time_samples(t_lo: f64, t_hi: f64) -> impl Iterator<Item = f64> {
    (0..=TIME_SAMPLES).map(move |k| t_lo + (t_hi - t_lo) * k as f64 / TIME_SAMPLES as f64)
}

/// Checks every invariant that can be decided before running.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, condition: Condition, detail: String| {
        out.push(Violation {
            field: field.to_string(),
            condition,
            detail,
        })
    };

    let grid = &s.grid;
    let tm = &s.timing;

    // Initial profiles at cell centres.
    for (i, x) in grid.centers().into_iter().enumerate() {
        let r = s.rho0.eval(x);
        if !r.is_finite() || r < 0.0 {
            push(
                "profiles.rho0",
                Condition::NonNegativeDensity,
                format!("rho0({x}) = {r} at cell {i}"),
            );
            break;
        }
        if s.oracle_check && r <= 0.0 {
            push(
                "profiles.rho0",
                Condition::PositiveInitialDensity,
                format!("rho0({x}) = {r} at cell {i}"),
            );
            break;
        }
    }
    for (i, x) in grid.centers().into_iter().enumerate() {
        let v = s.v0.eval(x);
        if !v.is_finite() || v < 0.0 {
            push(
                "profiles.v0",
                Condition::NonNegativeVelocity,
                format!("v0({x}) = {v} at cell {i}"),
            );
            break;
        }
    }

    let horizon = if s.t_end.is_finite() { s.t_end } else { 0.0 };
    for t in time_samples(0.0, horizon.max(0.0)) {
        let (r, v) = s.inflow.at(t);
        if !(r >= 0.0 && v >= 0.0) || !r.is_finite() || !v.is_finite() {
            push(
                "profiles.rho_in/v_in",
                Condition::NonNegativeInflow,
                format!("inflow ({r}, {v}) at t = {t}"),
            );
            break;
        }
    }

    if let Forcing::On(law) = s.forcing {
        // ForceLaw is validated on construction; re-check in case of hand-built values.
        if !(law.f0() > 0.0) {
            push(
                "force.f0",
                Condition::PositiveForce,
                format!("f0 = {}", law.f0()),
            );
        }
        if !(law.delta() > 0.0 && law.delta() < law.v_star()) {
            push(
                "force.delta",
                Condition::ForceMargin,
                format!("delta = {}, v_star = {}", law.delta(), law.v_star()),
            );
        }
    }

    let timing_ok = if !(tm.tau0 > 0.0 && tm.t0 > tm.tau0) {
        push(
            "signal.tau0",
            Condition::SignalOrder,
            format!("t0 = {}, tau0 = {}", tm.t0, tm.tau0),
        );
        false
    } else {
        true
    };
    if !(tm.tau1 > 0.0) {
        push(
            "signal.tau1",
            Condition::RedDuration,
            format!("tau1 = {}", tm.tau1),
        );
    }
    let zone_ok = tm.h > 0.0 && tm.h < tm.x0 && grid.x_min() < tm.x0 - tm.h && tm.x0 < grid.x_max();
    if !zone_ok {
        push(
            "signal.h",
            Condition::BrakingZone,
            format!(
                "x0 = {}, h = {}, road = [{}, {}]",
                tm.x0,
                tm.h,
                grid.x_min(),
                grid.x_max()
            ),
        );
    } else {
        let (i_split, _) = grid.nearest_face(tm.x0 - tm.h);
        let (i_light, _) = grid.nearest_face(tm.x0);
        let n = grid.n_cells();
        if i_split < MIN_CELLS || n - i_split < MIN_CELLS || i_light <= i_split || i_light >= n {
            push(
                "grid.n_cells",
                Condition::GridResolution,
                format!("x0 - h snaps to face {i_split}, x0 to face {i_light} of {n} cells"),
            );
        }
    }

    if !(s.mu > 0.0) || !s.mu.is_finite() {
        push("mu", Condition::PositiveViscosity, format!("mu = {}", s.mu));
    }
    if !(s.t_end >= tm.green_start()) {
        push(
            "t_end",
            Condition::Horizon,
            format!("t_end = {}, t0 + tau1 = {}", s.t_end, tm.green_start()),
        );
    }

    let nm = &s.numerics;
    if !(nm.cfl > 0.0 && nm.cfl <= 1.0) {
        push(
            "numerics.cfl",
            Condition::Numerics,
            format!("cfl = {}", nm.cfl),
        );
    }
    if !(nm.parabolic_dt > 0.0) || !nm.parabolic_dt.is_finite() {
        push(
            "numerics.parabolic_dt",
            Condition::Numerics,
            format!("parabolic_dt = {}", nm.parabolic_dt),
        );
    }
    if !(nm.snapshot_interval > 0.0) || !nm.snapshot_interval.is_finite() {
        push(
            "numerics.snapshot_interval",
            Condition::Numerics,
            format!("snapshot_interval = {}", nm.snapshot_interval),
        );
    }
    if !(nm.compat_tol > 0.0) {
        push(
            "numerics.compat_tol",
            Condition::Numerics,
            format!("compat_tol = {}", nm.compat_tol),
        );
    }

    if let (BrakingSpec::Custom(b), true) = (&s.braking, timing_ok) {
        check_braking(b, tm, s.t_end.max(tm.green_start()), &mut push);
    }

    out
}

fn check_braking(
    b: &BrakingProfile,
    tm: &SignalTiming,
    t_last: f64,
    push: &mut impl FnMut(&str, Condition, String),
) {
    let scale = tm.x0.abs().max(1.0);
    let start = tm.braking_start();
    let g0 = b.position(start);
    if (g0 - (tm.x0 - tm.h)).abs() > 1e-9 * scale {
        push(
            "braking.gamma",
            Condition::BrakingStart,
            format!("gamma({start}) = {g0}, expected {}", tm.x0 - tm.h),
        );
    }
    let after: Vec<f64> = time_samples(tm.t0, t_last).collect();
    if let Some(t) = after
        .iter()
        .copied()
        .find(|&t| (b.position(t) - tm.x0).abs() > 1e-9 * scale)
    {
        push(
            "braking.gamma",
            Condition::BrakingStop,
            format!("gamma({t}) = {}, expected {}", b.position(t), tm.x0),
        );
    }
    let during: Vec<f64> = time_samples(start, t_last).collect();
    if let Some(w) = during
        .windows(2)
        .find(|w| b.position(w[1]) < b.position(w[0]) - 1e-12 * scale)
    {
        push(
            "braking.gamma",
            Condition::BrakingMonotone,
            format!("gamma decreases between t = {} and t = {}", w[0], w[1]),
        );
    }
    if let Some(t) = during
        .iter()
        .copied()
        .find(|&t| !(b.speed(t) >= 0.0) || !b.speed(t).is_finite())
    {
        push(
            "braking.speed",
            Condition::BrakingSpeedSign,
            format!("V({t}) = {}", b.speed(t)),
        );
    }
    if let Some(t) = after.iter().copied().find(|&t| b.speed(t).abs() > 1e-12) {
        push(
            "braking.speed",
            Condition::StopAtRed,
            format!("V({t}) = {}", b.speed(t)),
        );
    }
}

/// Informational remarks that do not invalidate a scenario.
pub fn validation_notes(s: &Scenario) -> Vec<String> {
    let mut notes = vec![format!(
        "braking-speed compatibility is evaluated at the start of the braking line \
         (x0 - h = {}); the alternative reading at x0 = {} is not enforced",
        s.timing.x0 - s.timing.h,
        s.timing.x0
    )];
    let (_, shift_split) = s.grid.nearest_face(s.timing.x0 - s.timing.h);
    let (_, shift_light) = s.grid.nearest_face(s.timing.x0);
    if shift_split != 0.0 {
        notes.push(format!(
            "x0 - h is snapped to the nearest cell face (shift {shift_split:+e} m)"
        ));
    }
    if shift_light != 0.0 {
        notes.push(format!(
            "x0 is snapped to the nearest cell face (shift {shift_light:+e} m)"
        ));
    }
    if matches!(s.model, ModelVariant::First) && s.forcing.is_on() {
        notes.push(
            "the upstream flow is solved with F = 0 while the light is red; \
             downstream and free-flow phases keep the force law"
                .to_string(),
        );
    }
    notes
}
