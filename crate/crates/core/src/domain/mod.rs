//! Typed values for the road, the traffic state, the driver force law and the
//! signal cycle. Everything here is an immutable value once constructed.

mod profile;
mod scenario;

pub use profile::{Profile, ProfileError};
pub use scenario::{
    validate_scenario, validation_notes, BrakingSpec, Condition, ModelVariant, Numerics, Scenario,
    Violation,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid flow state: {0}")]
    State(String),
    #[error("invalid force law: {0}")]
    Force(String),
    #[error("invalid signal timing: {0}")]
    Timing(String),
    #[error("invalid braking profile: {0}")]
    Braking(String),
}

/// Uniform cell-centred discretization of `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadGrid {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

pub const MIN_CELLS: usize = 4;

impl RoadGrid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self, DomainError> {
        if !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min {
            return Err(DomainError::Grid(format!(
                "need finite x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        if n_cells < MIN_CELLS {
            return Err(DomainError::Grid(format!(
                "need at least {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        Ok(RoadGrid {
            x_min,
            x_max,
            n_cells,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    /// Face `i` sits at the left edge of cell `i`; face `n_cells` is `x_max`.
    pub fn face(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    pub fn faces(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|i| self.face(i)).collect()
    }

    /// Index of the face nearest `x` and the signed snap distance `face - x`.
    pub fn nearest_face(&self, x: f64) -> (usize, f64) {
        let k = ((x - self.x_min) / self.dx()).round();
        let k = k.clamp(0.0, self.n_cells as f64) as usize;
        (k, self.face(k) - x)
    }

    /// Sub-grid made of cells `[lo, hi)`.
    pub fn slice(&self, lo: usize, hi: usize) -> Result<RoadGrid, DomainError> {
        if hi > self.n_cells || lo >= hi {
            return Err(DomainError::Grid(format!(
                "cell range {lo}..{hi} outside 0..{}",
                self.n_cells
            )));
        }
        RoadGrid::new(self.face(lo), self.face(hi), hi - lo)
    }
}

/// Density and velocity sampled at cell centres at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub grid: RoadGrid,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl FlowState {
    pub fn new(grid: RoadGrid, rho: Vec<f64>, v: Vec<f64>, t: f64) -> Result<Self, DomainError> {
        let n = grid.n_cells();
        if rho.len() != n || v.len() != n {
            return Err(DomainError::State(format!(
                "expected {n} samples, got rho={} v={}",
                rho.len(),
                v.len()
            )));
        }
        if let Some(i) = rho.iter().position(|r| !r.is_finite() || *r < 0.0) {
            return Err(DomainError::State(format!(
                "density at cell {i} is {} (must be finite and >= 0)",
                rho[i]
            )));
        }
        if let Some(i) = v.iter().position(|u| !u.is_finite() || *u < 0.0) {
            return Err(DomainError::State(format!(
                "velocity at cell {i} is {} (must be finite and >= 0)",
                v[i]
            )));
        }
        if !t.is_finite() {
            return Err(DomainError::State(format!("time {t} is not finite")));
        }
        Ok(FlowState { grid, rho, v, t })
    }

    pub fn from_profiles(
        grid: RoadGrid,
        rho0: &Profile,
        v0: &Profile,
        t: f64,
    ) -> Result<Self, DomainError> {
        let x = grid.centers();
        FlowState::new(grid, rho0.sample(&x), v0.sample(&x), t)
    }

    pub fn uniform(grid: RoadGrid, rho: f64, v: f64, t: f64) -> Result<Self, DomainError> {
        let n = grid.n_cells();
        FlowState::new(grid, vec![rho; n], vec![v; n], t)
    }

    pub fn total_mass(&self) -> f64 {
        self.grid.dx() * self.rho.iter().sum::<f64>()
    }

    pub fn max_speed(&self) -> f64 {
        self.v.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Acceleration density applied by drivers: `f0` below `v_star - delta`,
/// zero above `v_star`, linear in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceLaw {
    f0: f64,
    v_star: f64,
    delta: f64,
}

impl ForceLaw {
    pub fn new(f0: f64, v_star: f64, delta: f64) -> Result<Self, DomainError> {
        if !(f0 > 0.0) || !f0.is_finite() {
            return Err(DomainError::Force(format!("f0 must be > 0, got {f0}")));
        }
        if !(delta > 0.0 && delta < v_star) || !v_star.is_finite() {
            return Err(DomainError::Force(format!(
                "need 0 < delta < v_star, got delta={delta}, v_star={v_star}"
            )));
        }
        Ok(ForceLaw { f0, v_star, delta })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn v_star(&self) -> f64 {
        self.v_star
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Speed at which the linear ramp begins.
    pub fn ramp_start(&self) -> f64 {
        self.v_star - self.delta
    }
}

pub fn evaluate_force(law: &ForceLaw, v: f64) -> f64 {
    if v < law.ramp_start() {
        law.f0
    } else if v > law.v_star {
        0.0
    } else {
        law.f0 * (law.v_star - v) / law.delta
    }
}

/// Force switch used by the solvers; `Off` is `F = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Forcing {
    #[default]
    Off,
    On(ForceLaw),
}

impl Forcing {
    pub fn accel(&self, v: f64) -> f64 {
        match self {
            Forcing::Off => 0.0,
            Forcing::On(law) => evaluate_force(law, v),
        }
    }

    pub fn is_on(&self) -> bool {
        matches!(self, Forcing::On(_))
    }

    /// Exact solution of `dv/dt = F(v)` after `dt` seconds, starting from `v`.
    ///
    /// The law is piecewise linear in `v`, so each regime integrates in closed
    /// form: constant acceleration below the ramp, exponential relaxation
    /// towards `v_star` inside it, rest above `v_star`.
    pub fn advance_speed(&self, v: f64, dt: f64) -> f64 {
        let law = match self {
            Forcing::Off => return v,
            Forcing::On(law) => law,
        };
        let mut v = v;
        let mut remaining = dt;
        let ramp = law.ramp_start();
        if v < ramp {
            let to_ramp = (ramp - v) / law.f0;
            if to_ramp >= remaining {
                return v + law.f0 * remaining;
            }
            v = ramp;
            remaining -= to_ramp;
        }
        if v < law.v_star {
            let rate = law.f0 / law.delta;
            v = law.v_star - (law.v_star - v) * (-rate * remaining).exp();
        }
        v
    }
}

/// Intersection position and the red-phase schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalTiming {
    pub x0: f64,
    pub t0: f64,
    pub tau0: f64,
    pub tau1: f64,
    pub h: f64,
}

impl SignalTiming {
    /// Flashing green: braking starts.
    pub fn braking_start(&self) -> f64 {
        self.t0 - self.tau0
    }

    pub fn red_start(&self) -> f64 {
        self.t0
    }

    pub fn green_start(&self) -> f64 {
        self.t0 + self.tau1
    }

    pub fn braking_zone_start(&self) -> f64 {
        self.x0 - self.h
    }

    pub fn check(&self) -> Result<(), DomainError> {
        let vals = [self.x0, self.t0, self.tau0, self.tau1, self.h];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(DomainError::Timing("all fields must be finite".into()));
        }
        if !(self.tau0 > 0.0 && self.t0 > self.tau0) {
            return Err(DomainError::Timing(format!(
                "need t0 > tau0 > 0, got t0={}, tau0={}",
                self.t0, self.tau0
            )));
        }
        if !(self.tau1 > 0.0) {
            return Err(DomainError::Timing(format!(
                "need tau1 > 0, got {}",
                self.tau1
            )));
        }
        if !(self.h > 0.0 && self.h < self.x0) {
            return Err(DomainError::Timing(format!(
                "need 0 < h < x0, got h={}, x0={}",
                self.h, self.x0
            )));
        }
        Ok(())
    }
}

/// Moving braking line `gamma(t)` and the speed `V(t)` prescribed on it.
#[derive(Debug, Clone, PartialEq)]
pub struct BrakingProfile {
    pub gamma: Profile,
    pub speed: Profile,
}

impl BrakingProfile {
    pub fn position(&self, t: f64) -> f64 {
        self.gamma.eval(t)
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.speed.eval(t)
    }
}

/// Cosine-eased braking line from `x0 - h` to `x0` over `[t0 - tau0, t0]`, and
/// the matching speed ease from `v_handoff` to rest.
pub fn default_braking_profile(
    timing: &SignalTiming,
    v_handoff: f64,
) -> Result<BrakingProfile, DomainError> {
    if !(timing.tau0 > 0.0) {
        return Err(DomainError::Braking(format!(
            "tau0 must be positive, got {}",
            timing.tau0
        )));
    }
    if !(v_handoff >= 0.0) || !v_handoff.is_finite() {
        return Err(DomainError::Braking(format!(
            "handoff speed must be finite and >= 0, got {v_handoff}"
        )));
    }
    let start = timing.braking_start();
    let end = timing.red_start();
    Ok(BrakingProfile {
        gamma: Profile::CosineEase {
            from: timing.braking_zone_start(),
            to: timing.x0,
            start,
            end,
        },
        speed: Profile::CosineEase {
            from: v_handoff,
            to: 0.0,
            start,
            end,
        },
    })
}

/// Inflow density and speed at the left end of the road.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub rho_in: Profile,
    pub v_in: Profile,
}

impl BoundaryData {
    pub fn constant(rho: f64, v: f64) -> Self {
        BoundaryData {
            rho_in: Profile::constant(rho),
            v_in: Profile::constant(v),
        }
    }

    pub fn empty() -> Self {
        Self::constant(0.0, 0.0)
    }

    pub fn at(&self, t: f64) -> (f64, f64) {
        (self.rho_in.eval(t), self.v_in.eval(t))
    }

    /// Vehicle flux `rho_in * v_in`.
    pub fn flux(&self, t: f64) -> f64 {
        let (r, v) = self.at(t);
        r * v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> ForceLaw {
        ForceLaw::new(1.5, 16.0, 4.0).unwrap()
    }

    #[test]
    fn force_law_examples() {
        let l = law();
        assert_eq!(evaluate_force(&l, 5.0), 1.5);
        assert_eq!(evaluate_force(&l, 20.0), 0.0);
        assert_eq!(evaluate_force(&l, 14.0), 0.75);
        assert_eq!(evaluate_force(&l, 12.0), 1.5);
        assert_eq!(evaluate_force(&l, 16.0), 0.0);
    }

    #[test]
    fn force_law_rejects_bad_parameters() {
        assert!(ForceLaw::new(0.0, 16.0, 4.0).is_err());
        assert!(ForceLaw::new(1.0, 16.0, 0.0).is_err());
        assert!(ForceLaw::new(1.0, 4.0, 4.0).is_err());
    }

    #[test]
    fn speed_flow_matches_regimes() {
        let f = Forcing::On(law());
        assert_eq!(f.advance_speed(5.0, 2.0), 8.0);
        // 11 -> 12 takes 2/3 s, then relaxes toward 16 at rate f0/delta.
        let expected = 16.0 - 4.0 * (-(1.5 / 4.0) * (1.0 - 2.0 / 3.0_f64)).exp();
        assert!((f.advance_speed(11.0, 1.0) - expected).abs() < 1e-12);
        assert_eq!(f.advance_speed(17.0, 3.0), 17.0);
        assert_eq!(Forcing::Off.advance_speed(3.0, 10.0), 3.0);
    }

    #[test]
    fn speed_flow_agrees_with_fine_euler() {
        let f = Forcing::On(law());
        let mut v: f64 = 9.0;
        let h = 1e-5;
        for _ in 0..500_000 {
            v += h * f.accel(v);
        }
        assert!((v - f.advance_speed(9.0, 5.0)).abs() < 1e-4);
    }

    #[test]
    fn grid_geometry() {
        let g = RoadGrid::new(0.0, 10.0, 5).unwrap();
        assert_eq!(g.dx(), 2.0);
        assert_eq!(g.center(0), 1.0);
        assert_eq!(g.face(5), 10.0);
        let (k, shift) = g.nearest_face(4.6);
        assert_eq!(k, 2);
        assert!((shift + 0.6).abs() < 1e-12);
        assert!(RoadGrid::new(0.0, 1.0, 3).is_err());
        assert!(RoadGrid::new(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn flow_state_rejects_negative_values() {
        let g = RoadGrid::new(0.0, 4.0, 4).unwrap();
        assert!(FlowState::new(g, vec![0.1, -0.1, 0.1, 0.1], vec![1.0; 4], 0.0).is_err());
        assert!(FlowState::new(g, vec![0.1; 4], vec![1.0, 1.0, f64::NAN, 1.0], 0.0).is_err());
        assert!(FlowState::new(g, vec![0.1; 3], vec![1.0; 4], 0.0).is_err());
    }

    fn timing() -> SignalTiming {
        SignalTiming {
            x0: 600.0,
            t0: 20.0,
            tau0: 4.0,
            tau1: 10.0,
            h: 50.0,
        }
    }

    #[test]
    fn default_braking_examples() {
        let tm = timing();
        let b = default_braking_profile(&tm, 9.0).unwrap();
        assert_eq!(b.position(16.0), 550.0);
        assert_eq!(b.speed(16.0), 9.0);
        assert_eq!(b.position(20.0), 600.0);
        assert_eq!(b.speed(20.0), 0.0);
        assert!((b.position(18.0) - 575.0).abs() < 1e-12);
        assert_eq!(b.speed(31.0), 0.0);
    }

    #[test]
    fn default_braking_rejects_bad_lead_time() {
        let mut tm = timing();
        tm.tau0 = 0.0;
        assert!(default_braking_profile(&tm, 1.0).is_err());
    }
}
