//! Runs one signal cycle: free flow until braking starts, then an upstream
//! flow that brakes to a stop against the moving braking line and a
//! downstream flow released into the empty road past the light, then the
//! merge when the light turns green and free flow again until `t_end`.

use std::fmt;
use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    default_braking_profile, validate_scenario, BoundaryData, BrakingProfile, BrakingSpec,
    DomainError, FlowState, Forcing, ModelVariant, Profile, RoadGrid, Scenario, Violation,
    MIN_CELLS,
};
use crate::hyperbolic::{solve_hyperbolic, HyperbolicBoundary, HyperbolicError, HyperbolicProblem};
use crate::lagrangian::{estimate_breakdown_time, lagrangian_reference, LagrangianError};
use crate::numerics::remap_average;
use crate::parabolic::{
    solve_parabolic, Hinge, MovingDomain, ParabolicBoundary, ParabolicError, ParabolicProblem,
    RightDensity, RightVelocity,
};
use crate::trajectory::{Snapshot, Trajectory};

/// Largest accepted gap between the two merge inputs' times.
pub const MERGE_TIME_TOL: f64 = 1e-12;
/// Relative tolerance of the global mass closure check.
pub const MASS_CLOSURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    FreeFlow,
    Upstream,
    Downstream,
    Resume,
}

impl PhaseName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseName::FreeFlow => "free_flow",
            PhaseName::Upstream => "upstream",
            PhaseName::Downstream => "downstream",
            PhaseName::Resume => "resume",
        }
    }
}

impl fmt::Display for PhaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Hyperbolic,
    Viscous,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Hyperbolic(#[from] HyperbolicError),
    #[error(transparent)]
    Viscous(#[from] ParabolicError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("scenario has {} violation(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
    #[error("cannot split at x={x}: {reason}")]
    Split { x: f64, reason: String },
    #[error("merge inputs are at t={upstream} and t={downstream}")]
    TimeMismatch { upstream: f64, downstream: f64 },
    #[error("merge inputs do not share a cell size ({upstream} vs {downstream})")]
    GridMismatch { upstream: f64, downstream: f64 },
    #[error("braking speed differs from the simulated speed at the braking line by {residual:e} (tolerance {tol:e})")]
    Compatibility { residual: f64, tol: f64 },
    #[error("{phase} phase failed: {source}")]
    Solver {
        phase: PhaseName,
        #[source]
        source: SolverError,
    },
    #[error("phase produced no snapshots")]
    EmptyTrajectory,
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Oracle(#[from] LagrangianError),
}

/// Face indices and snap distances of the braking zone on the scenario grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleGeometry {
    /// Face nearest `x0 - h`.
    pub i_split: usize,
    /// Face nearest `x0`.
    pub i_light: usize,
    pub x_split: f64,
    pub x_light: f64,
    /// `face - (x0 - h)`.
    pub split_shift: f64,
    /// `face - x0`.
    pub light_shift: f64,
    /// Cells left of the hinge keep their global positions during braking.
    pub hinge: Option<Hinge>,
}

pub fn cycle_geometry(s: &Scenario) -> Result<CycleGeometry, OrchestratorError> {
    let g = &s.grid;
    let tm = &s.timing;
    let (i_split, split_shift) = g.nearest_face(tm.x0 - tm.h);
    let (i_light, light_shift) = g.nearest_face(tm.x0);
    let n = g.n_cells();
    if i_split < MIN_CELLS || n - i_split < MIN_CELLS || i_light <= i_split || i_light >= n {
        return Err(OrchestratorError::Split {
            x: tm.x0 - tm.h,
            reason: format!("braking zone snaps to faces {i_split}..{i_light} of {n}"),
        });
    }
    let buffer = (i_light - i_split).max(2);
    let hinge = (i_split > buffer).then(|| Hinge {
        position: g.face(i_split - buffer),
        cells: i_split - buffer,
    });
    Ok(CycleGeometry {
        i_split,
        i_light,
        x_split: g.face(i_split),
        x_light: g.face(i_light),
        split_shift,
        light_shift,
        hinge,
    })
}

/// Braking line on the snapped zone and the matching speed.
pub fn braking_for(
    s: &Scenario,
    geom: &CycleGeometry,
    v_handoff: f64,
) -> Result<BrakingProfile, DomainError> {
    let tm = &s.timing;
    match &s.braking {
        BrakingSpec::Default => {
            let mut snapped = *tm;
            snapped.x0 = geom.x_light;
            snapped.h = geom.x_light - geom.x_split;
            default_braking_profile(&snapped, v_handoff)
        }
        BrakingSpec::Custom(b) => {
            if geom.split_shift == 0.0 && geom.light_shift == 0.0 {
                return Ok(b.clone());
            }
            let scale = (geom.x_light - geom.x_split) / tm.h;
            let offset = geom.x_split - (tm.x0 - tm.h) * scale;
            Ok(BrakingProfile {
                gamma: b.gamma.map_values(offset, scale),
                speed: b.speed.clone(),
            })
        }
    }
}

/// Mean speed of the two cells sharing face `i`.
pub fn face_velocity(state: &FlowState, i: usize) -> f64 {
    let n = state.v.len();
    match i {
        0 => state.v[0],
        i if i >= n => state.v[n - 1],
        i => 0.5 * (state.v[i - 1] + state.v[i]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub upstream: FlowState,
    pub downstream: FlowState,
    pub face_index: usize,
    /// `face - x_split`.
    pub shift: f64,
}

/// Partitions `state` at the face nearest `x_split`.
pub fn split_at(state: &FlowState, x_split: f64) -> Result<Split, OrchestratorError> {
    let g = &state.grid;
    if !(x_split > g.x_min() && x_split < g.x_max()) {
        return Err(OrchestratorError::Split {
            x: x_split,
            reason: format!("outside the road [{}, {}]", g.x_min(), g.x_max()),
        });
    }
    let (k, shift) = g.nearest_face(x_split);
    let n = g.n_cells();
    if k < MIN_CELLS || n - k < MIN_CELLS {
        return Err(OrchestratorError::Split {
            x: x_split,
            reason: format!("face {k} leaves fewer than {MIN_CELLS} cells on one side of {n}"),
        });
    }
    let up = FlowState::new(
        g.slice(0, k)?,
        state.rho[..k].to_vec(),
        state.v[..k].to_vec(),
        state.t,
    )?;
    let down = FlowState::new(
        g.slice(k, n)?,
        state.rho[k..].to_vec(),
        state.v[k..].to_vec(),
        state.t,
    )?;
    Ok(Split {
        upstream: up,
        downstream: down,
        face_index: k,
        shift,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Merged {
    pub state: FlowState,
    /// Downstream cells lying under the upstream segment, dropped at merge.
    pub discarded_cells: usize,
    pub discarded_mass: f64,
}

/// Upstream values left of `upstream.grid.x_max()`, downstream values right of
/// it. Downstream cells under the upstream segment are dropped.
pub fn merge(
    upstream: &FlowState,
    downstream: &FlowState,
    t_merge: f64,
) -> Result<Merged, OrchestratorError> {
    for t in [upstream.t, downstream.t] {
        if (t - t_merge).abs() > MERGE_TIME_TOL {
            return Err(OrchestratorError::TimeMismatch {
                upstream: upstream.t,
                downstream: downstream.t,
            });
        }
    }
    let (du, dd) = (upstream.grid.dx(), downstream.grid.dx());
    if (du - dd).abs() > 1e-9 * dd {
        return Err(OrchestratorError::GridMismatch {
            upstream: du,
            downstream: dd,
        });
    }
    let edge = upstream.grid.x_max();
    let skip = downstream
        .grid
        .centers()
        .iter()
        .take_while(|c| **c < edge)
        .count();
    let keep = downstream.grid.n_cells() - skip;
    let n = upstream.grid.n_cells() + keep;
    let grid = RoadGrid::new(upstream.grid.x_min(), downstream.grid.x_max(), n)?;
    let mut rho = upstream.rho.clone();
    let mut v = upstream.v.clone();
    rho.extend_from_slice(&downstream.rho[skip..]);
    v.extend_from_slice(&downstream.v[skip..]);
    let discarded_mass = dd * downstream.rho[..skip].iter().sum::<f64>();
    Ok(Merged {
        state: FlowState::new(grid, rho, v, t_merge)?,
        discarded_cells: skip,
        discarded_mass,
    })
}

/// A configured solve of one phase.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseSolver {
    Hyperbolic(HyperbolicProblem),
    Viscous(ParabolicProblem),
}

impl PhaseSolver {
    pub fn kind(&self) -> SolverKind {
        match self {
            PhaseSolver::Hyperbolic(_) => SolverKind::Hyperbolic,
            PhaseSolver::Viscous(_) => SolverKind::Viscous,
        }
    }

    pub fn forcing(&self) -> Forcing {
        match self {
            PhaseSolver::Hyperbolic(p) => p.forcing,
            PhaseSolver::Viscous(p) => p.forcing,
        }
    }

    pub fn solve(&self) -> Result<Trajectory, SolverError> {
        Ok(match self {
            PhaseSolver::Hyperbolic(p) => solve_hyperbolic(p)?,
            PhaseSolver::Viscous(p) => solve_parabolic(p)?,
        })
    }
}

fn fixed_viscous(
    s: &Scenario,
    initial: FlowState,
    left_v: Profile,
    left_rho: Profile,
    forcing: Forcing,
    t_end: f64,
) -> PhaseSolver {
    PhaseSolver::Viscous(ParabolicProblem {
        domain: MovingDomain::fixed(&initial.grid),
        initial,
        boundary: ParabolicBoundary {
            left_v,
            left_rho,
            right_v: RightVelocity::Outflow,
            right_rho: RightDensity::ZeroGradient,
        },
        mu: s.mu,
        forcing,
        t_end,
        snapshot_interval: s.numerics.snapshot_interval,
        dt: s.numerics.parabolic_dt,
        handoff_velocity: None,
    })
}

/// Free-flow solve with the scenario inflow on `initial`'s segment.
pub fn free_flow_solver(
    s: &Scenario,
    model: ModelVariant,
    initial: FlowState,
    t_end: f64,
) -> PhaseSolver {
    match model {
        ModelVariant::First => PhaseSolver::Hyperbolic(HyperbolicProblem {
            initial,
            boundary: HyperbolicBoundary::inflow(s.inflow.clone()),
            forcing: s.forcing,
            t_end,
            snapshot_interval: s.numerics.snapshot_interval,
            cfl: s.numerics.cfl,
        }),
        ModelVariant::Second => fixed_viscous(
            s,
            initial,
            s.inflow.v_in.clone(),
            s.inflow.rho_in.clone(),
            s.forcing,
            t_end,
        ),
    }
}

/// Downstream flow released past the braking line: nothing enters from the left.
pub fn downstream_solver(s: &Scenario, model: ModelVariant, initial: FlowState) -> PhaseSolver {
    let t_end = s.timing.green_start();
    match model {
        ModelVariant::First => PhaseSolver::Hyperbolic(HyperbolicProblem {
            initial,
            boundary: HyperbolicBoundary::vacuum_left(),
            forcing: s.forcing,
            t_end,
            snapshot_interval: s.numerics.snapshot_interval,
            cfl: s.numerics.cfl,
        }),
        ModelVariant::Second => fixed_viscous(
            s,
            initial,
            Profile::constant(0.0),
            Profile::constant(0.0),
            s.forcing,
            t_end,
        ),
    }
}

/// Upstream braking flow: viscous, no force, right end on the braking line
/// with the braking speed imposed there.
pub fn upstream_problem(
    s: &Scenario,
    geom: &CycleGeometry,
    initial: FlowState,
    braking: &BrakingProfile,
    v_handoff: f64,
) -> ParabolicProblem {
    ParabolicProblem {
        domain: MovingDomain {
            left: s.grid.x_min(),
            right: braking.gamma.clone(),
            n_cells: geom.i_light,
            hinge: geom.hinge,
        },
        initial,
        boundary: ParabolicBoundary {
            left_v: s.inflow.v_in.clone(),
            left_rho: s.inflow.rho_in.clone(),
            right_v: RightVelocity::Prescribed(braking.speed.clone()),
            right_rho: RightDensity::ZeroGradient,
        },
        mu: s.mu,
        forcing: Forcing::Off,
        t_end: s.timing.green_start(),
        snapshot_interval: s.numerics.snapshot_interval,
        dt: s.numerics.parabolic_dt,
        handoff_velocity: Some(v_handoff),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub name: PhaseName,
    pub solver: SolverKind,
    pub force_on: bool,
    pub t_start: f64,
    pub t_end: f64,
    pub x_range: (f64, f64),
    pub wall_seconds: f64,
    pub trajectory: Trajectory,
}

impl PhaseRecord {
    fn initial_mass(&self) -> f64 {
        self.trajectory.initial_mass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelinePoint {
    pub phase: PhaseName,
    pub state: FlowState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalMarkers {
    pub braking_start: f64,
    pub red_start: f64,
    pub green_start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub t: f64,
    pub discarded_cells: usize,
    pub discarded_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub n_cells: usize,
    pub t: f64,
    pub l1_rho: f64,
    pub l1_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OracleOutcome {
    Compared(OracleComparison),
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub model: ModelVariant,
    pub geometry: CycleGeometry,
    pub markers: SignalMarkers,
    pub v_handoff: f64,
    pub phases: Vec<PhaseRecord>,
    pub merge: MergeRecord,
    pub merged: FlowState,
    /// Full-road states with strictly increasing times.
    pub timeline: Vec<TimelinePoint>,
    pub compatibility_residual: f64,
    pub oracle: Option<OracleOutcome>,
}

impl SimulationRun {
    pub fn phase(&self, name: PhaseName) -> Option<&PhaseRecord> {
        self.phases.iter().find(|p| p.name == name)
    }

    pub fn final_state(&self) -> &FlowState {
        &self.timeline[self.timeline.len() - 1].state
    }
}

/// Partial result of a run that stopped with an error.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub failed_phase: Option<PhaseName>,
    pub error: OrchestratorError,
    pub completed: Vec<PhaseRecord>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunFailure {}

fn timed_solve(
    name: PhaseName,
    solver: &PhaseSolver,
    x_range: (f64, f64),
    t_start: f64,
    t_end: f64,
) -> Result<PhaseRecord, OrchestratorError> {
    let clock = Instant::now();
    let trajectory = solver.solve().map_err(|source| OrchestratorError::Solver {
        phase: name,
        source,
    })?;
    let wall_seconds = clock.elapsed().as_secs_f64();
    debug!(
        "{name} phase done in {wall_seconds:.3}s ({} steps)",
        trajectory.steps
    );
    Ok(PhaseRecord {
        name,
        solver: solver.kind(),
        force_on: solver.forcing().is_on(),
        t_start,
        t_end,
        x_range,
        wall_seconds,
        trajectory,
    })
}

fn final_of(rec: &PhaseRecord) -> Result<&FlowState, OrchestratorError> {
    rec.trajectory
        .final_state()
        .ok_or(OrchestratorError::EmptyTrajectory)
}

pub fn run_first_model(s: &Scenario) -> Result<SimulationRun, RunFailure> {
    run_model(s, ModelVariant::First)
}

pub fn run_second_model(s: &Scenario) -> Result<SimulationRun, RunFailure> {
    run_model(s, ModelVariant::Second)
}

/// Runs the model named in the scenario.
pub fn run_scenario(s: &Scenario) -> Result<SimulationRun, RunFailure> {
    run_model(s, s.model)
}

pub fn run_model(s: &Scenario, model: ModelVariant) -> Result<SimulationRun, RunFailure> {
    let mut completed = Vec::new();
    let fail =
        |phase: Option<PhaseName>, error: OrchestratorError, done: &Vec<PhaseRecord>| RunFailure {
            failed_phase: phase,
            error,
            completed: done.clone(),
        };
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(fail(
            None,
            OrchestratorError::Invalid(violations),
            &completed,
        ));
    }
    let geom = cycle_geometry(s).map_err(|e| fail(None, e, &completed))?;
    let tm = s.timing;
    let (t_brake, t_green) = (tm.braking_start(), tm.green_start());
    let road = (s.grid.x_min(), s.grid.x_max());
    info!("running {model} model to t={}", s.t_end);

    // Free flow until braking starts.
    let initial = FlowState::from_profiles(s.grid, &s.rho0, &s.v0, 0.0)
        .map_err(|e| fail(Some(PhaseName::FreeFlow), e.into(), &completed))?;
    let oracle = (s.oracle_check && model == ModelVariant::First)
        .then(|| oracle_outcome(s, &initial, t_brake));
    let a = timed_solve(
        PhaseName::FreeFlow,
        &free_flow_solver(s, model, initial, t_brake),
        road,
        0.0,
        t_brake,
    )
    .map_err(|e| fail(Some(PhaseName::FreeFlow), e, &completed))?;
    completed.push(a);
    let handoff = final_of(&completed[0])
        .map_err(|e| fail(Some(PhaseName::FreeFlow), e, &completed))?
        .clone();

    // Split at the braking line and run both sides.
    let v_handoff = face_velocity(&handoff, geom.i_split);
    let braking = braking_for(s, &geom, v_handoff)
        .map_err(|e| fail(Some(PhaseName::Upstream), e.into(), &completed))?;
    let split = split_at(&handoff, geom.x_split)
        .map_err(|e| fail(Some(PhaseName::Upstream), e, &completed))?;
    let up_problem = upstream_problem(s, &geom, split.upstream, &braking, v_handoff);
    let compat = (braking.speed(t_brake) - v_handoff).abs();
    if matches!(s.braking, BrakingSpec::Custom(_)) && compat > s.numerics.compat_tol {
        let err = OrchestratorError::Compatibility {
            residual: compat,
            tol: s.numerics.compat_tol,
        };
        return Err(fail(Some(PhaseName::Upstream), err, &completed));
    }
    let up_solver = PhaseSolver::Viscous(up_problem);
    let down_range = (geom.x_split, road.1);
    let down_solver = downstream_solver(s, model, split.downstream);
    let (up, down) = std::thread::scope(|scope| {
        let up = scope.spawn(|| {
            timed_solve(
                PhaseName::Upstream,
                &up_solver,
                (road.0, geom.x_light),
                t_brake,
                t_green,
            )
        });
        let down = timed_solve(
            PhaseName::Downstream,
            &down_solver,
            down_range,
            t_brake,
            t_green,
        );
        (up.join().expect("upstream solver panicked"), down)
    });
    let up = up.map_err(|e| fail(Some(PhaseName::Upstream), e, &completed))?;
    completed.push(up);
    let down = down.map_err(|e| fail(Some(PhaseName::Downstream), e, &completed))?;
    completed.push(down);

    // Merge at green.
    let merged = {
        let u =
            final_of(&completed[1]).map_err(|e| fail(Some(PhaseName::Upstream), e, &completed))?;
        let d = final_of(&completed[2])
            .map_err(|e| fail(Some(PhaseName::Downstream), e, &completed))?;
        merge(u, d, t_green).map_err(|e| fail(Some(PhaseName::Resume), e, &completed))?
    };
    let merge_record = MergeRecord {
        t: t_green,
        discarded_cells: merged.discarded_cells,
        discarded_mass: merged.discarded_mass,
    };

    if s.t_end > t_green {
        let solver = free_flow_solver(s, model, merged.state.clone(), s.t_end);
        let rec = timed_solve(PhaseName::Resume, &solver, road, t_green, s.t_end)
            .map_err(|e| fail(Some(PhaseName::Resume), e, &completed))?;
        completed.push(rec);
    }

    let compatibility_residual = completed[1]
        .trajectory
        .compatibility_residual
        .unwrap_or(compat);
    let timeline = build_timeline(&completed, &braking, &s.grid, &merged.state)
        .map_err(|e| fail(None, e, &completed))?;
    Ok(SimulationRun {
        model,
        geometry: geom,
        markers: SignalMarkers {
            braking_start: t_brake,
            red_start: tm.red_start(),
            green_start: t_green,
        },
        v_handoff,
        phases: completed,
        merge: merge_record,
        merged: merged.state,
        timeline,
        compatibility_residual,
        oracle,
    })
}

/// Upstream values left of the braking line, downstream values right of it,
/// on the scenario grid. Upstream values come from the solver's own mesh so
/// cells that never moved are copied rather than averaged twice.
fn composite(
    grid: &RoadGrid,
    up: &Snapshot,
    down: &FlowState,
    line: f64,
) -> Result<FlowState, DomainError> {
    let faces = grid.faces();
    let centers = grid.centers();
    let m = centers.iter().take_while(|c| **c < line).count();
    let offset = grid.n_cells() - down.grid.n_cells();
    let mut dst: Vec<f64> = faces[..=m].to_vec();
    let (src, up_rho, up_v) = match &up.native {
        Some(mesh) => (mesh.faces.clone(), &mesh.rho, &mesh.v),
        None => (up.state.grid.faces(), &up.state.rho, &up.state.v),
    };
    dst[m] = dst[m].min(src[src.len() - 1]);
    let mut rho = remap_average(&src, up_rho, &dst);
    let mut v: Vec<f64> = remap_average(&src, up_v, &dst)
        .into_iter()
        .map(|u| u.max(0.0))
        .collect();
    rho.extend_from_slice(&down.rho[m - offset..]);
    v.extend_from_slice(&down.v[m - offset..]);
    FlowState::new(*grid, rho, v, up.state.t)
}

fn build_timeline(
    phases: &[PhaseRecord],
    braking: &BrakingProfile,
    grid: &RoadGrid,
    merged: &FlowState,
) -> Result<Vec<TimelinePoint>, OrchestratorError> {
    let mut out: Vec<TimelinePoint> = phases[0]
        .trajectory
        .snapshots
        .iter()
        .map(|s| TimelinePoint {
            phase: PhaseName::FreeFlow,
            state: s.state.clone(),
        })
        .collect();
    let (up, down) = (&phases[1].trajectory, &phases[2].trajectory);
    let last = up.snapshots.len() - 1;
    for (k, (u, d)) in up.snapshots.iter().zip(&down.snapshots).enumerate().skip(1) {
        let state = if k == last {
            merged.clone()
        } else {
            composite(grid, u, &d.state, braking.position(u.state.t))?
        };
        out.push(TimelinePoint {
            phase: PhaseName::Upstream,
            state,
        });
    }
    if let Some(resume) = phases.get(3) {
        out.extend(
            resume
                .trajectory
                .snapshots
                .iter()
                .skip(1)
                .map(|s| TimelinePoint {
                    phase: PhaseName::Resume,
                    state: s.state.clone(),
                }),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBalance {
    pub phase: PhaseName,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub clamped: f64,
    pub closure_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassBalance {
    pub phases: Vec<PhaseBalance>,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub clamped: f64,
    pub discarded_at_merge: f64,
    /// `final - (initial + inflow - outflow + clamped - discarded)`.
    pub closure_residual: f64,
    /// `|closure_residual|` over the largest mass seen.
    pub relative_residual: f64,
}

impl MassBalance {
    pub fn closes(&self) -> bool {
        self.relative_residual <= MASS_CLOSURE_TOL
    }
}

pub fn phase_balances(phases: &[PhaseRecord]) -> Vec<PhaseBalance> {
    phases
        .iter()
        .filter_map(|p| {
            let last = p.trajectory.last()?;
            let l = last.ledger;
            Some(PhaseBalance {
                phase: p.name,
                initial_mass: p.initial_mass(),
                final_mass: l.total_mass,
                inflow: l.inflow,
                outflow: l.outflow,
                clamped: l.clamped,
                closure_residual: l.closure_residual(p.initial_mass()),
            })
        })
        .collect()
}

/// Per-phase and global vehicle bookkeeping. The global figures follow the
/// road from the initial state to the end of the run.
pub fn mass_balance_report(run: &SimulationRun) -> MassBalance {
    let phases = phase_balances(&run.phases);
    let initial_mass = phases.first().map_or(0.0, |p| p.initial_mass);
    let final_mass = run.final_state().total_mass();
    let sum = |f: fn(&PhaseBalance) -> f64| phases.iter().map(f).sum::<f64>();
    let inflow = sum(|p| p.inflow);
    let outflow = sum(|p| p.outflow);
    let clamped = sum(|p| p.clamped);
    let discarded = run.merge.discarded_mass;
    let closure_residual = final_mass - (initial_mass + inflow - outflow + clamped - discarded);
    let scale = phases
        .iter()
        .flat_map(|p| [p.initial_mass, p.final_mass])
        .chain([final_mass])
        .fold(0.0_f64, f64::max);
    let relative_residual = if scale > 0.0 {
        closure_residual.abs() / scale
    } else {
        closure_residual.abs()
    };
    MassBalance {
        phases,
        initial_mass,
        final_mass,
        inflow,
        outflow,
        clamped,
        discarded_at_merge: discarded,
        closure_residual,
        relative_residual,
    }
}

/// Mean absolute differences of density and speed between two states on the
/// same grid.
pub fn l1_distance(a: &FlowState, b: &FlowState) -> (f64, f64) {
    let n = a.rho.len().min(b.rho.len()).max(1) as f64;
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() / n;
    (d(&a.rho, &b.rho), d(&a.v, &b.v))
}

/// Pressureless solve of `initial` to `t_end` compared against the
/// mass-coordinate reference.
pub fn compare_with_oracle(
    initial: &FlowState,
    inflow: &BoundaryData,
    forcing: &Forcing,
    t_end: f64,
    cfl: f64,
) -> Result<OracleComparison, OrchestratorError> {
    let problem = HyperbolicProblem {
        initial: initial.clone(),
        boundary: HyperbolicBoundary::inflow(inflow.clone()),
        forcing: *forcing,
        t_end,
        snapshot_interval: t_end - initial.t,
        cfl,
    };
    let traj = solve_hyperbolic(&problem).map_err(|e| OrchestratorError::Solver {
        phase: PhaseName::FreeFlow,
        source: e.into(),
    })?;
    let numeric = traj
        .final_state()
        .ok_or(OrchestratorError::EmptyTrajectory)?;
    let reference = lagrangian_reference(initial, inflow, forcing, t_end, traj.steps.max(100))?;
    let (l1_rho, l1_v) = l1_distance(numeric, &reference);
    Ok(OracleComparison {
        n_cells: initial.grid.n_cells(),
        t: t_end,
        l1_rho,
        l1_v,
    })
}

/// Comparison horizon for a scenario: the free-flow phase, capped below half
/// the breakdown estimate.
pub fn oracle_horizon(s: &Scenario, initial: &FlowState) -> f64 {
    let breakdown = estimate_breakdown_time(initial, &s.forcing);
    s.timing.braking_start().min(0.49 * breakdown)
}

fn oracle_outcome(s: &Scenario, initial: &FlowState, t_end: f64) -> OracleOutcome {
    let horizon = oracle_horizon(s, initial).min(t_end);
    match compare_with_oracle(initial, &s.inflow, &s.forcing, horizon, s.numerics.cfl) {
        Ok(c) => OracleOutcome::Compared(c),
        Err(e) => OracleOutcome::Skipped {
            reason: e.to_string(),
        },
    }
}

/// Oracle comparison on the scenario grid and on a grid four times finer.
pub fn verify_oracle(s: &Scenario) -> Result<[OracleComparison; 2], OrchestratorError> {
    let coarse = s.grid.n_cells();
    let mut out = Vec::with_capacity(2);
    for n in [coarse, 4 * coarse] {
        let grid = RoadGrid::new(s.grid.x_min(), s.grid.x_max(), n)?;
        let initial = FlowState::from_profiles(grid, &s.rho0, &s.v0, 0.0)?;
        let horizon = oracle_horizon(s, &initial);
        out.push(compare_with_oracle(
            &initial,
            &s.inflow,
            &s.forcing,
            horizon,
            s.numerics.cfl,
        )?);
    }
    Ok([out[0], out[1]])
}
