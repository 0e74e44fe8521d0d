//! Conservative finite-volume integrator for the pressureless traffic system
//!
//! ```text
//!   d(rho)/dt + d(rho v)/dx   = 0
//!   d(rho v)/dt + d(rho v^2)/dx = rho F(v)
//! ```
//!
//! Transport uses the Rusanov (local Lax-Friedrichs) flux with wave speed
//! `max(|v_L|, |v_R|)`; with constant pressure there is no acoustic speed. The
//! force is applied afterwards as a pointwise source (Godunov splitting).
//!
//! Under `max|v| dt / dx <= 1` the update writes each new cell mass as a
//! non-negative combination of old masses, and each new velocity as the
//! matching convex combination of old velocities.

use log::debug;
use thiserror::Error;

use crate::domain::{BoundaryData, DomainError, FlowState, Forcing, RoadGrid};
use crate::trajectory::{snapshot_schedule, MassLedger, Snapshot, Trajectory};

/// Cells lighter than this are vacuum: zero velocity, zero momentum.
pub const VACUUM_MASS: f64 = 1e-12;
/// Speed floor in the CFL estimate for an all-stopped road.
pub const SPEED_FLOOR: f64 = 1e-8;
/// Slack on the CFL bound before `step` refuses a time step.
const CFL_SLACK: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperbolicError {
    #[error("time step {dt} violates the CFL bound (Courant number {courant:.4})")]
    CflViolation { dt: f64, courant: f64 },
    #[error("end time {t_end} precedes the initial time {t_start}")]
    EndBeforeStart { t_start: f64, t_end: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Cell masses `m = rho` and momenta `q = rho v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedState {
    pub grid: RoadGrid,
    pub m: Vec<f64>,
    pub q: Vec<f64>,
    pub t: f64,
}

impl ConservedState {
    pub fn from_flow(state: &FlowState) -> Self {
        let q = state
            .rho
            .iter()
            .zip(&state.v)
            .map(|(r, v)| if *r < VACUUM_MASS { 0.0 } else { r * v })
            .collect();
        ConservedState {
            grid: state.grid,
            m: state.rho.clone(),
            q,
            t: state.t,
        }
    }

    pub fn velocity(&self, i: usize) -> f64 {
        if self.m[i] < VACUUM_MASS {
            0.0
        } else {
            (self.q[i] / self.m[i]).max(0.0)
        }
    }

    pub fn to_flow(&self) -> Result<FlowState, DomainError> {
        let v = (0..self.m.len()).map(|i| self.velocity(i)).collect();
        FlowState::new(self.grid, self.m.clone(), v, self.t)
    }

    pub fn total_mass(&self) -> f64 {
        self.grid.dx() * self.m.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeftBoundary {
    Inflow(BoundaryData),
    /// No vehicles cross: ghost state `rho = 0, v = 0`.
    Vacuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightBoundary {
    /// Zero-gradient extrapolation.
    Outflow,
    Vacuum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicBoundary {
    pub left: LeftBoundary,
    pub right: RightBoundary,
}

impl HyperbolicBoundary {
    pub fn inflow(data: BoundaryData) -> Self {
        HyperbolicBoundary {
            left: LeftBoundary::Inflow(data),
            right: RightBoundary::Outflow,
        }
    }

    pub fn vacuum_left() -> Self {
        HyperbolicBoundary {
            left: LeftBoundary::Vacuum,
            right: RightBoundary::Outflow,
        }
    }

    /// Left ghost `(rho, v)` at time `t`.
    fn left_ghost(&self, t: f64) -> (f64, f64) {
        match &self.left {
            LeftBoundary::Inflow(data) => data.at(t),
            LeftBoundary::Vacuum => (0.0, 0.0),
        }
    }
}

/// Rusanov flux between primitive states `(rho, v)`; returns
/// `(mass_flux, momentum_flux)`.
pub fn numerical_flux(left: (f64, f64), right: (f64, f64)) -> (f64, f64) {
    let (rl, vl) = left;
    let (rr, vr) = right;
    let s = vl.abs().max(vr.abs());
    let (ql, qr) = (rl * vl, rr * vr);
    let mass = 0.5 * (ql + qr) - 0.5 * s * (rr - rl);
    let momentum = 0.5 * (ql * vl + qr * vr) - 0.5 * s * (qr - ql);
    (mass, momentum)
}

/// `cfl * dx / max(|v|, SPEED_FLOOR)`.
pub fn cfl_dt(state: &FlowState, cfl: f64) -> f64 {
    cfl * state.grid.dx() / state.max_speed().max(SPEED_FLOOR)
}

/// Boundary mass crossings and clamping during one step, in vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub inflow: f64,
    pub outflow: f64,
    pub clamped: f64,
}

/// One transport-then-source update of length `dt`.
///
/// Boundary data are sampled at the start of the step, the same time level as
/// the interior state the transport stage acts on.
pub fn step(
    state: &ConservedState,
    dt: f64,
    boundary: &HyperbolicBoundary,
    forcing: &Forcing,
) -> Result<(ConservedState, StepReport), HyperbolicError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(HyperbolicError::BadStep(dt));
    }
    let n = state.m.len();
    let dx = state.grid.dx();
    let lambda = dt / dx;

    // Primitive values with one ghost on each side.
    let mut prim = Vec::with_capacity(n + 2);
    prim.push(boundary.left_ghost(state.t));
    prim.extend((0..n).map(|i| (state.m[i], state.velocity(i))));
    prim.push(match boundary.right {
        RightBoundary::Outflow => prim[n],
        RightBoundary::Vacuum => (0.0, 0.0),
    });

    let max_speed = prim.iter().fold(0.0_f64, |s, p| s.max(p.1.abs()));
    let courant = max_speed * lambda;
    if courant > CFL_SLACK {
        return Err(HyperbolicError::CflViolation { dt, courant });
    }

    let fluxes: Vec<(f64, f64)> = prim
        .windows(2)
        .map(|w| numerical_flux(w[0], w[1]))
        .collect();

    let mut m = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    let mut report = StepReport {
        inflow: dt * fluxes[0].0,
        outflow: dt * fluxes[n].0,
        clamped: 0.0,
    };
    for i in 0..n {
        let (fm_l, fq_l) = fluxes[i];
        let (fm_r, fq_r) = fluxes[i + 1];
        let mut mi = state.m[i] - lambda * (fm_r - fm_l);
        let mut qi = state.q[i] - lambda * (fq_r - fq_l);
        if mi < 0.0 {
            debug!("clamping negative mass {mi:e} in cell {i} at t={}", state.t);
            report.clamped += -mi * dx;
            mi = 0.0;
        }
        if mi < VACUUM_MASS || qi < 0.0 {
            qi = 0.0;
        }
        m.push(mi);
        q.push(qi);
    }

    if let Forcing::On(_) = forcing {
        for i in 0..n {
            if m[i] >= VACUUM_MASS {
                let v = q[i] / m[i];
                q[i] += dt * m[i] * forcing.accel(v);
            }
        }
    }

    Ok((
        ConservedState {
            grid: state.grid,
            m,
            q,
            t: state.t + dt,
        },
        report,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicProblem {
    pub initial: FlowState,
    pub boundary: HyperbolicBoundary,
    pub forcing: Forcing,
    pub t_end: f64,
    pub snapshot_interval: f64,
    pub cfl: f64,
}

/// Advances `problem.initial` to `problem.t_end`, snapshotting on the
/// requested cadence and exactly at `t_end`.
pub fn solve_hyperbolic(problem: &HyperbolicProblem) -> Result<Trajectory, HyperbolicError> {
    let t_start = problem.initial.t;
    if problem.t_end < t_start {
        return Err(HyperbolicError::EndBeforeStart {
            t_start,
            t_end: problem.t_end,
        });
    }
    let dx = problem.initial.grid.dx();
    let mut state = ConservedState::from_flow(&problem.initial);
    let initial_mass = state.total_mass();
    let mut ledger = MassLedger {
        total_mass: initial_mass,
        ..MassLedger::default()
    };
    let mut traj = Trajectory {
        snapshots: vec![Snapshot {
            state: problem.initial.clone(),
            ledger,
            boundary_velocity: None,
            native: None,
        }],
        initial_mass,
        steps: 0,
        compatibility_residual: None,
    };

    for target in snapshot_schedule(t_start, problem.t_end, problem.snapshot_interval) {
        while state.t < target {
            let interior = (0..state.m.len()).fold(0.0_f64, |s, i| s.max(state.velocity(i)));
            let ghost = problem.boundary.left_ghost(state.t).1.abs();
            let speed = interior.max(ghost).max(SPEED_FLOOR);
            let mut dt = problem.cfl * dx / speed;
            let remaining = target - state.t;
            // Land exactly on the target; absorb a sliver rather than take a tiny last step.
            if dt >= remaining || remaining - dt < 1e-9 * dt {
                dt = remaining;
            }
            let (next, rep) = step(&state, dt, &problem.boundary, &problem.forcing)?;
            state = next;
            if dt == remaining {
                state.t = target;
            }
            ledger.inflow += rep.inflow;
            ledger.outflow += rep.outflow;
            ledger.clamped += rep.clamped;
            traj.steps += 1;
        }
        ledger.total_mass = state.total_mass();
        traj.snapshots.push(Snapshot {
            state: state.to_flow()?,
            ledger,
            boundary_velocity: None,
            native: None,
        });
    }
    debug!(
        "hyperbolic solve [{t_start}, {}] took {} steps",
        problem.t_end, traj.steps
    );
    Ok(traj)
}
