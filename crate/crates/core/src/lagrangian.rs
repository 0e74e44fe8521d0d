//! Reference solution for the pressureless system on smooth, strictly positive
//! data, computed in mass coordinates.
//!
//! With `xi = int_{x_min}^x rho dx` every vehicle moves at `d(xi)/dt = a(t)`,
//! the inflow flux, so each sample is a characteristic. Along it the speed
//! obeys `dv/dt = F(v)` and the density `d(rho)/dt = -rho^2 dv/dxi`.

use log::debug;
use thiserror::Error;

use crate::domain::{BoundaryData, FlowState, Forcing, RoadGrid};
use crate::numerics::interp_linear;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LagrangianError {
    #[error("density must be strictly positive, got {value} at sample {index}")]
    NonPositiveDensity { index: usize, value: f64 },
    #[error("mass coordinate {xi} outside the mapped range [0, {max}]")]
    OutOfRange { xi: f64, max: f64 },
    #[error("characteristics cross near t={t} (density blew up at sample {index})")]
    Breakdown { t: f64, index: usize },
    #[error("horizon {horizon} exceeds half the breakdown time {breakdown}")]
    BeyondHorizon { horizon: f64, breakdown: f64 },
    #[error("end time {t_end} must exceed the field time {t}")]
    EndBeforeStart { t: f64, t_end: f64 },
    #[error("need at least one step")]
    NoSteps,
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

/// Samples along characteristics in mass coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MassField {
    pub xi: Vec<f64>,
    pub rho_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub t: f64,
    /// Cumulative inflow `A(t)` since the field was created.
    pub a_integral: f64,
    /// Physical position of `xi = 0`.
    pub x_min: f64,
    /// `(rho, v)` entering at `xi = 0` at time `t`; used when the first sample
    /// has already moved off the boundary.
    pub inlet: Option<(f64, f64)>,
}

impl MassField {
    pub fn total_mass(&self) -> f64 {
        self.xi.last().copied().unwrap_or(0.0)
    }

    fn check_positive(&self) -> Result<(), LagrangianError> {
        match self.rho_hat.iter().position(|r| !(*r > 0.0)) {
            Some(index) => Err(LagrangianError::NonPositiveDensity {
                index,
                value: self.rho_hat[index],
            }),
            None => Ok(()),
        }
    }

    /// Samples including the inlet point when the first characteristic has
    /// left `xi = 0`.
    fn with_inlet(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut xi = self.xi.clone();
        let mut rho = self.rho_hat.clone();
        let mut v = self.v_hat.clone();
        if xi[0] > 0.0 {
            let (r, u) = self.inlet.unwrap_or((rho[0], v[0]));
            xi.insert(0, 0.0);
            rho.insert(0, r);
            v.insert(0, u);
        }
        (xi, rho, v)
    }
}

/// Sample positions: the left end, every cell centre, the right end. End
/// values repeat the adjacent cell.
fn sample_positions(grid: &RoadGrid) -> Vec<f64> {
    let mut xs = Vec::with_capacity(grid.n_cells() + 2);
    xs.push(grid.x_min());
    xs.extend(grid.centers());
    xs.push(grid.x_max());
    xs
}

fn padded(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 2);
    out.push(values[0]);
    out.extend_from_slice(values);
    out.push(values[values.len() - 1]);
    out
}

/// Mass coordinates by trapezoidal integration of the piecewise-linear density.
pub fn to_mass_coordinates(state: &FlowState) -> Result<MassField, LagrangianError> {
    if let Some(index) = state.rho.iter().position(|r| !(*r > 0.0)) {
        return Err(LagrangianError::NonPositiveDensity {
            index,
            value: state.rho[index],
        });
    }
    let xs = sample_positions(&state.grid);
    let rho = padded(&state.rho);
    let v = padded(&state.v);
    let mut xi = Vec::with_capacity(xs.len());
    xi.push(0.0);
    for k in 1..xs.len() {
        let step = 0.5 * (xs[k] - xs[k - 1]) * (rho[k] + rho[k - 1]);
        xi.push(xi[k - 1] + step);
    }
    Ok(MassField {
        xi,
        rho_hat: rho,
        v_hat: v,
        t: state.t,
        a_integral: 0.0,
        x_min: state.grid.x_min(),
        inlet: None,
    })
}

/// Physical positions of the samples: the exact inverse of the trapezoid
/// used by [`to_mass_coordinates`].
fn positions(x_min: f64, xi: &[f64], rho: &[f64]) -> Vec<f64> {
    let mut xs = Vec::with_capacity(xi.len());
    xs.push(x_min);
    for k in 1..xi.len() {
        let dx = 2.0 * (xi[k] - xi[k - 1]) / (rho[k] + rho[k - 1]);
        xs.push(xs[k - 1] + dx);
    }
    xs
}

/// Inverse position map `x = gamma_0(xi)`, piecewise linear between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionMap {
    xi: Vec<f64>,
    x: Vec<f64>,
}

impl PositionMap {
    pub fn eval(&self, xi: f64) -> Result<f64, LagrangianError> {
        let max = self.xi[self.xi.len() - 1];
        if !(xi >= 0.0 && xi <= max) {
            return Err(LagrangianError::OutOfRange { xi, max });
        }
        Ok(interp_linear(&self.xi, &self.x, xi))
    }

    pub fn max_xi(&self) -> f64 {
        self.xi[self.xi.len() - 1]
    }
}

pub fn invert_initial_map(field: &MassField) -> Result<PositionMap, LagrangianError> {
    field.check_positive()?;
    let (xi, rho, _) = field.with_inlet();
    let x = positions(field.x_min, &xi, &rho);
    Ok(PositionMap { xi, x })
}

/// `dv/dxi` by centred differences, one-sided at the ends.
fn xi_gradient(xi: &[f64], v: &[f64]) -> Vec<f64> {
    let n = xi.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (v[hi] - v[lo]) / (xi[hi] - xi[lo])
        })
        .collect()
}

fn median_spacing(xi: &[f64]) -> f64 {
    let mut gaps: Vec<f64> = xi
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 0.0)
        .collect();
    if gaps.is_empty() {
        return f64::INFINITY;
    }
    gaps.sort_by(f64::total_cmp);
    gaps[gaps.len() / 2]
}

/// Integrates every characteristic from `field.t` to `t_end` in `n_steps`
/// equal steps, seeding new characteristics at `xi = 0` as vehicles enter.
pub fn advance_characteristics(
    field: &MassField,
    inflow: &BoundaryData,
    forcing: &Forcing,
    t_end: f64,
    n_steps: usize,
) -> Result<MassField, LagrangianError> {
    if !(t_end > field.t) {
        return Err(LagrangianError::EndBeforeStart { t: field.t, t_end });
    }
    if n_steps == 0 {
        return Err(LagrangianError::NoSteps);
    }
    field.check_positive()?;
    let seed_gap = median_spacing(&field.xi);
    let mut f = field.clone();
    let t_start = field.t;
    let span = t_end - t_start;
    for step in 1..=n_steps {
        let t0 = f.t;
        let t1 = if step == n_steps {
            t_end
        } else {
            t_start + span * step as f64 / n_steps as f64
        };
        let dt = t1 - t0;

        let g_old = xi_gradient(&f.xi, &f.v_hat);
        let v_new: Vec<f64> = f
            .v_hat
            .iter()
            .map(|v| forcing.advance_speed(*v, dt))
            .collect();
        let g_new = xi_gradient(&f.xi, &v_new);
        for k in 0..f.rho_hat.len() {
            let g = 0.5 * (g_old[k] + g_new[k]);
            let denom = 1.0 + f.rho_hat[k] * g * dt;
            if !(denom > 1e-9) {
                return Err(LagrangianError::Breakdown { t: t1, index: k });
            }
            f.rho_hat[k] /= denom;
        }
        f.v_hat = v_new;

        let gained = 0.5 * dt * (inflow.flux(t0) + inflow.flux(t1));
        if gained > 0.0 {
            for xi in f.xi.iter_mut() {
                *xi += gained;
            }
            f.a_integral += gained;
            // Characteristics that entered during this step, spaced by the
            // initial sample gap.
            let mut seeds = Vec::new();
            let mut pos = f.xi[0] - seed_gap;
            while pos > 0.0 {
                let entry = t0 + dt * (gained - pos) / gained;
                let (r, v) = inflow.at(entry);
                seeds.push((pos, r, forcing.advance_speed(v, t1 - entry)));
                pos -= seed_gap;
            }
            for (xi, r, v) in seeds {
                f.xi.insert(0, xi);
                f.rho_hat.insert(0, r);
                f.v_hat.insert(0, v);
            }
        }
        f.t = t1;
        f.inlet = Some(inflow.at(t1));
    }
    debug!(
        "advanced {} characteristics to t={t_end}, inflow {}",
        f.xi.len(),
        f.a_integral
    );
    Ok(f)
}

/// Places the samples back in physical space and interpolates onto `grid`'s
/// cell centres.
pub fn reconstruct_physical(
    field: &MassField,
    grid: RoadGrid,
) -> Result<FlowState, LagrangianError> {
    field.check_positive()?;
    let (xi, rho, v) = field.with_inlet();
    if let Some((r, _)) = field.inlet.filter(|_| field.xi[0] > 0.0) {
        if !(r > 0.0) {
            return Err(LagrangianError::NonPositiveDensity { index: 0, value: r });
        }
    }
    let xs = positions(field.x_min, &xi, &rho);
    let centers = grid.centers();
    let rho_out = centers
        .iter()
        .map(|x| interp_linear(&xs, &rho, *x))
        .collect();
    let v_out = centers
        .iter()
        .map(|x| interp_linear(&xs, &v, *x).max(0.0))
        .collect();
    Ok(FlowState::new(grid, rho_out, v_out, field.t)?)
}

/// First crossing time of physical characteristics, `-1 / min dv0/dx`, or
/// infinity when the speed never decreases downstream.
///
/// Assumes `F` is the same for every vehicle over the horizon of interest
/// (off, or everyone below the ramp).
pub fn estimate_breakdown_time(state: &FlowState, forcing: &Forcing) -> f64 {
    if let Forcing::On(law) = forcing {
        if state.max_speed() >= law.ramp_start() {
            debug!("breakdown estimate assumes constant force but speeds reach the ramp");
        }
    }
    let dx = state.grid.dx();
    let min_slope = state
        .v
        .windows(2)
        .map(|w| (w[1] - w[0]) / dx)
        .fold(f64::INFINITY, f64::min);
    if min_slope < 0.0 {
        -1.0 / min_slope
    } else {
        f64::INFINITY
    }
}

/// Oracle solution on `state.grid` at `t_end`, refusing horizons past half the
/// breakdown estimate.
pub fn lagrangian_reference(
    state: &FlowState,
    inflow: &BoundaryData,
    forcing: &Forcing,
    t_end: f64,
    n_steps: usize,
) -> Result<FlowState, LagrangianError> {
    let breakdown = estimate_breakdown_time(state, forcing);
    let horizon = t_end - state.t;
    if horizon > 0.5 * breakdown {
        return Err(LagrangianError::BeyondHorizon { horizon, breakdown });
    }
    let field = to_mass_coordinates(state)?;
    let moved = advance_characteristics(&field, inflow, forcing, t_end, n_steps)?;
    reconstruct_physical(&moved, state.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ForceLaw, Profile};

    fn grid(n: usize, len: f64) -> RoadGrid {
        RoadGrid::new(0.0, len, n).unwrap()
    }

    #[test]
    fn constant_density_coordinates() {
        let s = FlowState::uniform(grid(50, 100.0), 0.1, 5.0, 0.0).unwrap();
        let f = to_mass_coordinates(&s).unwrap();
        assert_eq!(f.xi[0], 0.0);
        assert!((f.total_mass() - 10.0).abs() < 1e-12);
        assert!(f.xi.windows(2).all(|w| w[1] > w[0]));
        let map = invert_initial_map(&f).unwrap();
        assert!((map.eval(5.0).unwrap() - 50.0).abs() < 1e-10);
        assert!(map.eval(10.5).is_err());
        let back = reconstruct_physical(&f, s.grid).unwrap();
        assert!(back.rho.iter().all(|r| (r - 0.1).abs() < 1e-15));
    }

    #[test]
    fn linear_density_integral() {
        let g = grid(1000, 1.0);
        let s = FlowState::from_profiles(
            g,
            &Profile::Affine {
                offset: 0.1,
                slope: 0.05,
            },
            &Profile::constant(1.0),
            0.0,
        )
        .unwrap();
        let f = to_mass_coordinates(&s).unwrap();
        // End segments hold the edge cell value, an O(dx^2) deviation.
        assert!((f.total_mass() - 0.125).abs() < 1e-7);
    }

    #[test]
    fn zero_density_is_rejected() {
        let s = FlowState::new(grid(4, 4.0), vec![0.1, 0.0, 0.1, 0.1], vec![1.0; 4], 0.0).unwrap();
        assert!(matches!(
            to_mass_coordinates(&s),
            Err(LagrangianError::NonPositiveDensity { index: 1, .. })
        ));
    }

    #[test]
    fn breakdown_examples() {
        let g = grid(100, 50.0);
        let falling = FlowState::from_profiles(
            g,
            &Profile::constant(0.1),
            &Profile::Affine {
                offset: 10.0,
                slope: -0.1,
            },
            0.0,
        )
        .unwrap();
        assert!((estimate_breakdown_time(&falling, &Forcing::Off) - 10.0).abs() < 1e-9);
        let rising = FlowState::from_profiles(
            g,
            &Profile::constant(0.1),
            &Profile::Affine {
                offset: 1.0,
                slope: 0.1,
            },
            0.0,
        )
        .unwrap();
        assert_eq!(
            estimate_breakdown_time(&rising, &Forcing::Off),
            f64::INFINITY
        );
        let steep = FlowState::from_profiles(
            g,
            &Profile::constant(0.1),
            &Profile::Affine {
                offset: 30.0,
                slope: -0.5,
            },
            0.0,
        )
        .unwrap();
        assert!((estimate_breakdown_time(&steep, &Forcing::Off) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn closed_system_keeps_speed_and_mass_coordinates() {
        let g = grid(40, 40.0);
        let s = FlowState::from_profiles(
            g,
            &Profile::constant(0.2),
            &Profile::Affine {
                offset: 1.0,
                slope: 0.05,
            },
            0.0,
        )
        .unwrap();
        let f = to_mass_coordinates(&s).unwrap();
        let out =
            advance_characteristics(&f, &BoundaryData::empty(), &Forcing::Off, 3.0, 30).unwrap();
        assert_eq!(out.xi, f.xi);
        assert_eq!(out.v_hat, f.v_hat);
        // Spreading traffic thins out: rho = rho0 / (1 + rho0 g t), g = slope / rho0.
        let expected = 0.2 / (1.0 + 0.05 * 3.0);
        // The padded end samples distort the gradient of their neighbours.
        for r in &out.rho_hat[2..out.rho_hat.len() - 2] {
            assert!((r - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_speed_freezes_density() {
        let s = FlowState::from_profiles(
            grid(60, 60.0),
            &Profile::Sine {
                base: 0.1,
                amp: 0.03,
                wavelength: 20.0,
                phase: 0.0,
            },
            &Profile::constant(0.0),
            0.0,
        )
        .unwrap();
        let f = to_mass_coordinates(&s).unwrap();
        let law = ForceLaw::new(1.5, 16.0, 4.0).unwrap();
        let out =
            advance_characteristics(&f, &BoundaryData::empty(), &Forcing::On(law), 2.0, 7).unwrap();
        assert_eq!(out.rho_hat, f.rho_hat);
        for v in &out.v_hat {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inflow_seeds_new_characteristics() {
        let s = FlowState::uniform(grid(100, 100.0), 0.1, 10.0, 0.0).unwrap();
        let f = to_mass_coordinates(&s).unwrap();
        let inflow = BoundaryData::constant(0.1, 10.0);
        let out = advance_characteristics(&f, &inflow, &Forcing::Off, 2.0, 20).unwrap();
        assert!((out.a_integral - 2.0).abs() < 1e-12);
        // Two vehicles entered, seeded 0.1 apart.
        assert!(out.xi.len() >= f.xi.len() + 19);
        let back = reconstruct_physical(&out, s.grid).unwrap();
        for (r, v) in back.rho.iter().zip(&back.v) {
            assert!((r - 0.1).abs() < 1e-12);
            assert!((v - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_refuses_long_horizons() {
        let s = FlowState::from_profiles(
            grid(100, 50.0),
            &Profile::constant(0.1),
            &Profile::Affine {
                offset: 10.0,
                slope: -0.1,
            },
            0.0,
        )
        .unwrap();
        let err = lagrangian_reference(&s, &BoundaryData::empty(), &Forcing::Off, 6.0, 10);
        assert!(matches!(err, Err(LagrangianError::BeyondHorizon { .. })));
    }
}
