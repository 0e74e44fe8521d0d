//! Semi-implicit integrator for the viscous traffic system
//!
//! ```text
//!   dv/dt + v dv/dx = (mu / rho) d2v/dx2 + F(v)
//!   d(rho)/dt + d(rho v)/dx = 0
//! ```
//!
//! on a road segment `[left, right(t)]` whose right end may move (the braking
//! line). The segment is covered by a fixed number of cells whose faces follow
//! the domain map; the motion enters as a mesh-velocity correction to the
//! advective terms.
//!
//! Each step: velocity advection and the force are explicit upwind, diffusion
//! is backward Euler via one tridiagonal solve with Dirichlet data at the new
//! time level; the density is then advanced conservatively with the new face
//! velocities relative to the moving faces.

use log::debug;
use thiserror::Error;

use crate::domain::{DomainError, FlowState, Forcing, Profile, RoadGrid};
use crate::numerics::{interp_linear, remap_average, solve_tridiagonal, SingularSystem};
use crate::trajectory::{
    snapshot_schedule, BoundaryVelocity, MassLedger, NativeMesh, Snapshot, Trajectory,
};

/// Densities below this use the floor in the `mu / rho` coefficient.
pub const RHO_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParabolicError {
    #[error("time step {dt} exceeds the configured cap {cap}")]
    DtExceedsCap { dt: f64, cap: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("explicit advection violates the CFL bound in cell {cell} at t={t} (Courant number {courant:.4})")]
    CflViolation { cell: usize, t: f64, courant: f64 },
    #[error(transparent)]
    Singular(#[from] SingularSystem),
    #[error("domain collapsed at t={t}: right end {right} does not exceed {left}")]
    DomainCollapsed { t: f64, left: f64, right: f64 },
    #[error("initial state covers [{state_lo}, {state_hi}] but the domain starts as [{domain_lo}, {domain_hi}]")]
    DomainMismatch {
        state_lo: f64,
        state_hi: f64,
        domain_lo: f64,
        domain_hi: f64,
    },
    #[error("end time {t_end} precedes the initial time {t_start}")]
    EndBeforeStart { t_start: f64, t_end: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Cells `[left, hinge]` stay fixed and uniform; only `[hinge, right(t)]` stretches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hinge {
    pub position: f64,
    pub cells: usize,
}

/// Road segment `[left, right(t)]` covered by `n_cells` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingDomain {
    pub left: f64,
    pub right: Profile,
    pub n_cells: usize,
    pub hinge: Option<Hinge>,
}

impl MovingDomain {
    pub fn fixed(grid: &RoadGrid) -> Self {
        MovingDomain {
            left: grid.x_min(),
            right: Profile::constant(grid.x_max()),
            n_cells: grid.n_cells(),
            hinge: None,
        }
    }

    pub fn right_at(&self, t: f64) -> f64 {
        self.right.eval(t)
    }

    /// Face positions at time `t`.
    pub fn faces_at(&self, t: f64) -> Result<Vec<f64>, ParabolicError> {
        let right = self.right_at(t);
        let (lo, lo_cells) = match self.hinge {
            Some(h) if h.cells > 0 && h.cells < self.n_cells => (h.position, h.cells),
            _ => (self.left, 0),
        };
        if !(right > lo) || !(lo >= self.left) {
            return Err(ParabolicError::DomainCollapsed { t, left: lo, right });
        }
        let mut faces = Vec::with_capacity(self.n_cells + 1);
        if lo_cells > 0 {
            let fixed = (lo - self.left) / lo_cells as f64;
            faces.extend((0..lo_cells).map(|i| self.left + i as f64 * fixed));
        }
        let stretch = self.n_cells - lo_cells;
        let width = (right - lo) / stretch as f64;
        faces.extend((0..stretch).map(|i| lo + i as f64 * width));
        faces.push(right);
        Ok(faces)
    }
}

/// State sampled on the unit interval `y = (x - left) / (right - left)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitState {
    pub y: Vec<f64>,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    pub left: f64,
    pub width: f64,
    pub t: f64,
}

/// Resamples `state` onto `domain.n_cells` unit-interval cell centres.
pub fn rescale_to_unit(
    state: &FlowState,
    domain: &MovingDomain,
    t: f64,
) -> Result<UnitState, ParabolicError> {
    let right = domain.right_at(t);
    if !(right > domain.left) {
        return Err(ParabolicError::DomainCollapsed {
            t,
            left: domain.left,
            right,
        });
    }
    let width = right - domain.left;
    let xs = state.grid.centers();
    let n = domain.n_cells;
    let y: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let at = |field: &[f64]| -> Vec<f64> {
        y.iter()
            .map(|yi| interp_linear(&xs, field, domain.left + yi * width))
            .collect()
    };
    Ok(UnitState {
        rho: at(&state.rho),
        v: at(&state.v),
        y,
        left: domain.left,
        width,
        t,
    })
}

/// Inverse of [`rescale_to_unit`]: samples `unit` at the centres of `grid`.
pub fn unit_to_physical(unit: &UnitState, grid: RoadGrid) -> Result<FlowState, DomainError> {
    let ys: Vec<f64> = grid
        .centers()
        .iter()
        .map(|x| (x - unit.left) / unit.width)
        .collect();
    let rho = ys
        .iter()
        .map(|y| interp_linear(&unit.y, &unit.rho, *y))
        .collect();
    let v = ys
        .iter()
        .map(|y| interp_linear(&unit.y, &unit.v, *y))
        .collect();
    FlowState::new(grid, rho, v, unit.t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RightVelocity {
    /// Dirichlet speed on the right end, e.g. the braking speed `V(t)`.
    Prescribed(Profile),
    /// Zero-gradient outflow.
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RightDensity {
    /// Ghost density copies the last cell.
    #[default]
    ZeroGradient,
    /// Nothing enters through the right end.
    Vacuum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicBoundary {
    pub left_v: Profile,
    pub left_rho: Profile,
    pub right_v: RightVelocity,
    pub right_rho: RightDensity,
}

impl ParabolicBoundary {
    fn right_value(&self, t: f64) -> Option<f64> {
        match &self.right_v {
            RightVelocity::Prescribed(p) => Some(p.eval(t)),
            RightVelocity::Outflow => None,
        }
    }
}

/// Native solver state: cell-centred values on the current face set.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicState {
    pub faces: Vec<f64>,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
    /// Velocity carried by the left boundary node.
    pub left_v: f64,
    /// Velocity carried by the right boundary node.
    pub right_v: f64,
}

impl ParabolicState {
    pub fn n_cells(&self) -> usize {
        self.rho.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.rho
            .iter()
            .zip(self.faces.windows(2))
            .map(|(r, w)| r * (w[1] - w[0]))
            .sum()
    }

    /// Cells of equal width up to `1e-9` relative.
    pub fn is_uniform(&self) -> bool {
        let n = self.n_cells();
        let dx = (self.faces[n] - self.faces[0]) / n as f64;
        self.faces
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dx).abs() <= 1e-9 * dx)
    }

    /// Physical-space snapshot on a uniform grid over the current segment.
    /// Values are copied when the mesh is already uniform and remapped
    /// conservatively otherwise.
    pub fn to_flow_state(&self) -> Result<FlowState, DomainError> {
        let n = self.n_cells();
        let grid = RoadGrid::new(self.faces[0], self.faces[n], n)?;
        let (rho, v) = if self.is_uniform() {
            (self.rho.clone(), self.v.clone())
        } else {
            let dst = grid.faces();
            (
                remap_average(&self.faces, &self.rho, &dst),
                remap_average(&self.faces, &self.v, &dst),
            )
        };
        let v = v.into_iter().map(|u| u.max(0.0)).collect();
        FlowState::new(grid, rho, v, self.t)
    }

    /// The mesh and raw cell values, or `None` when the mesh is uniform.
    pub fn native_mesh(&self) -> Option<NativeMesh> {
        (!self.is_uniform()).then(|| NativeMesh {
            faces: self.faces.clone(),
            rho: self.rho.clone(),
            v: self.v.clone(),
        })
    }

    pub fn boundary_velocity(&self) -> BoundaryVelocity {
        BoundaryVelocity {
            left: self.left_v,
            right: self.right_v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub inflow: f64,
    pub outflow: f64,
    pub clamped: f64,
}

/// One semi-implicit step of length `dt`; see the module docs.
#[allow(clippy::too_many_arguments)]
pub fn step_viscous(
    state: &ParabolicState,
    dt: f64,
    mu: f64,
    boundary: &ParabolicBoundary,
    domain: &MovingDomain,
    forcing: &Forcing,
    dt_cap: f64,
) -> Result<(ParabolicState, StepReport), ParabolicError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ParabolicError::BadStep(dt));
    }
    if dt > dt_cap * (1.0 + 1e-9) {
        return Err(ParabolicError::DtExceedsCap { dt, cap: dt_cap });
    }
    advance(state, state.t + dt, mu, boundary, domain, forcing)
}

fn advance(
    state: &ParabolicState,
    t1: f64,
    mu: f64,
    bc: &ParabolicBoundary,
    domain: &MovingDomain,
    forcing: &Forcing,
) -> Result<(ParabolicState, StepReport), ParabolicError> {
    let n = state.n_cells();
    let t = state.t;
    let dt = t1 - t;
    let old = &state.faces;
    let new = domain.faces_at(t1)?;
    let mesh_v: Vec<f64> = (0..=n).map(|j| (new[j] - old[j]) / dt).collect();
    let co: Vec<f64> = old.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let cn: Vec<f64> = new.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let width_old: Vec<f64> = old.windows(2).map(|w| w[1] - w[0]).collect();
    let width_new: Vec<f64> = new.windows(2).map(|w| w[1] - w[0]).collect();
    let v = &state.v;

    // Explicit advection (relative to the mesh) and force.
    let left_v0 = bc.left_v.eval(t);
    let right_v0 = bc.right_value(t);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let c = v[i] - 0.5 * (mesh_v[i] + mesh_v[i + 1]);
        let (diff, dist) = if c >= 0.0 {
            if i > 0 {
                (v[i] - v[i - 1], co[i] - co[i - 1])
            } else {
                (v[0] - left_v0, co[0] - old[0])
            }
        } else if i + 1 < n {
            (v[i + 1] - v[i], co[i + 1] - co[i])
        } else {
            match right_v0 {
                Some(vr) => (vr - v[i], old[n] - co[i]),
                None => (0.0, width_old[i]),
            }
        };
        let courant = c.abs() * dt / dist;
        if courant > 1.0 {
            return Err(ParabolicError::CflViolation {
                cell: i,
                t,
                courant,
            });
        }
        rhs.push(v[i] - dt * c * diff / dist + dt * forcing.accel(v[i]));
    }

    // Implicit diffusion on the new mesh.
    let left_v1 = bc.left_v.eval(t1);
    let right_v1 = bc.right_value(t1);
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let kappa = mu / state.rho[i].max(RHO_FLOOR);
        let scale = dt * kappa / width_new[i];
        let a = if i > 0 {
            scale / (cn[i] - cn[i - 1])
        } else {
            scale / (cn[0] - new[0])
        };
        diag[i] += a;
        if i > 0 {
            lower[i] = -a;
        } else {
            rhs[0] += a * left_v1;
        }
        if i + 1 < n {
            let b = scale / (cn[i + 1] - cn[i]);
            diag[i] += b;
            upper[i] = -b;
        } else if let Some(vr) = right_v1 {
            let b = scale / (new[n] - cn[i]);
            diag[i] += b;
            rhs[i] += b * vr;
        }
    }
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;
    let v_new = rhs;

    // Conservative density update with face velocities relative to the mesh.
    let left_rho1 = bc.left_rho.eval(t1);
    let right_node = right_v1.unwrap_or(v_new[n - 1]);
    let mut flux = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let u = if j == 0 {
            left_v1
        } else if j == n {
            right_node
        } else {
            0.5 * (v_new[j - 1] + v_new[j])
        };
        let r = u - mesh_v[j];
        let upwind = if r >= 0.0 {
            if j == 0 {
                left_rho1
            } else {
                state.rho[j - 1]
            }
        } else if j == n {
            match bc.right_rho {
                RightDensity::ZeroGradient => state.rho[n - 1],
                RightDensity::Vacuum => 0.0,
            }
        } else {
            state.rho[j]
        };
        flux.push((upwind * r, r));
    }
    let mut rho_new = Vec::with_capacity(n);
    let mut report = StepReport {
        inflow: dt * flux[0].0,
        outflow: dt * flux[n].0,
        clamped: 0.0,
    };
    for i in 0..n {
        let leaving = dt * (flux[i + 1].1.max(0.0) - flux[i].1.min(0.0));
        if leaving > width_old[i] * (1.0 + 1e-12) {
            return Err(ParabolicError::CflViolation {
                cell: i,
                t,
                courant: leaving / width_old[i],
            });
        }
        let net = dt * (flux[i + 1].0 - flux[i].0);
        let mut r = if old[i] == new[i] && old[i + 1] == new[i + 1] {
            state.rho[i] - net / width_new[i]
        } else {
            (state.rho[i] * width_old[i] - net) / width_new[i]
        };
        if r < 0.0 {
            debug!("clamping negative density {r:e} in cell {i} at t={t1}");
            report.clamped += -r * width_new[i];
            r = 0.0;
        }
        rho_new.push(r);
    }

    Ok((
        ParabolicState {
            faces: new,
            rho: rho_new,
            v: v_new,
            t: t1,
            left_v: left_v1,
            right_v: right_node,
        },
        report,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicProblem {
    pub initial: FlowState,
    pub domain: MovingDomain,
    pub boundary: ParabolicBoundary,
    pub mu: f64,
    pub forcing: Forcing,
    pub t_end: f64,
    pub snapshot_interval: f64,
    /// Upper bound on the step; each snapshot interval is split evenly.
    pub dt: f64,
    /// Simulated speed at the right end at handoff, if known from outside.
    pub handoff_velocity: Option<f64>,
}

/// Native initial state: `initial` remapped onto the domain mesh at its start time.
pub fn initial_parabolic_state(
    problem: &ParabolicProblem,
) -> Result<ParabolicState, ParabolicError> {
    let init = &problem.initial;
    let t = init.t;
    let faces = problem.domain.faces_at(t)?;
    let n = faces.len() - 1;
    let (lo, hi) = (init.grid.x_min(), init.grid.x_max());
    let tol = 1e-9 * init.grid.dx();
    if (faces[0] - lo).abs() > tol || (faces[n] - hi).abs() > tol {
        return Err(ParabolicError::DomainMismatch {
            state_lo: lo,
            state_hi: hi,
            domain_lo: faces[0],
            domain_hi: faces[n],
        });
    }
    let src = init.grid.faces();
    let rho = remap_average(&src, &init.rho, &faces);
    let v = remap_average(&src, &init.v, &faces);
    let left_v = problem.boundary.left_v.eval(t);
    let right_v = problem.boundary.right_value(t).unwrap_or(v[n - 1]);
    Ok(ParabolicState {
        faces,
        rho,
        v,
        t,
        left_v,
        right_v,
    })
}

/// Advances to `t_end` with steps no longer than `problem.dt`, snapshotting on
/// the requested cadence and at `t_end`.
pub fn solve_parabolic(problem: &ParabolicProblem) -> Result<Trajectory, ParabolicError> {
    let t_start = problem.initial.t;
    if problem.t_end < t_start {
        return Err(ParabolicError::EndBeforeStart {
            t_start,
            t_end: problem.t_end,
        });
    }
    if !(problem.dt > 0.0) || !problem.dt.is_finite() {
        return Err(ParabolicError::BadStep(problem.dt));
    }
    let mut state = initial_parabolic_state(problem)?;
    let initial_mass = state.total_mass();
    let compatibility_residual = problem.boundary.right_value(t_start).map(|vr| {
        let edge = problem.handoff_velocity.unwrap_or_else(|| {
            let v = &problem.initial.v;
            v[v.len() - 1]
        });
        (vr - edge).abs()
    });
    let mut ledger = MassLedger {
        total_mass: initial_mass,
        ..MassLedger::default()
    };
    let mut traj = Trajectory {
        snapshots: vec![Snapshot {
            state: state.to_flow_state()?,
            ledger,
            boundary_velocity: Some(state.boundary_velocity()),
            native: state.native_mesh(),
        }],
        initial_mass,
        steps: 0,
        compatibility_residual,
    };

    for target in snapshot_schedule(t_start, problem.t_end, problem.snapshot_interval) {
        let t_from = state.t;
        let span = target - t_from;
        let count = ((span / problem.dt) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=count {
            let t1 = if k == count {
                target
            } else {
                t_from + span * k as f64 / count as f64
            };
            let (next, rep) = advance(
                &state,
                t1,
                problem.mu,
                &problem.boundary,
                &problem.domain,
                &problem.forcing,
            )?;
            state = next;
            ledger.inflow += rep.inflow;
            ledger.outflow += rep.outflow;
            ledger.clamped += rep.clamped;
            traj.steps += 1;
        }
        ledger.total_mass = state.total_mass();
        traj.snapshots.push(Snapshot {
            state: state.to_flow_state()?,
            ledger,
            boundary_velocity: Some(state.boundary_velocity()),
            native: state.native_mesh(),
        });
    }
    debug!(
        "viscous solve [{t_start}, {}] took {} steps",
        problem.t_end, traj.steps
    );
    Ok(traj)
}
