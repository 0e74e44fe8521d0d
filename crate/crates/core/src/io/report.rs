//! JSON run report. The layout is described by `schema/report.schema.json`;
//! bump [`SCHEMA_VERSION`] on any incompatible change.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::domain::ModelVariant;
use crate::orchestrator::{
    mass_balance_report, phase_balances, CycleGeometry, MassBalance, MergeRecord, OracleOutcome,
    PhaseName, PhaseRecord, RunFailure, SignalMarkers, SimulationRun, SolverKind,
};

pub const SCHEMA_VERSION: &str = "1.0";

/// Schema the report conforms to.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseReport {
    pub name: PhaseName,
    pub solver: SolverKind,
    pub force_on: bool,
    pub t_start: f64,
    pub t_end: f64,
    pub x_start: f64,
    pub x_end: f64,
    pub wall_seconds: f64,
    pub steps: usize,
    pub snapshots: usize,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub clamped: f64,
    pub closure_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapReport {
    pub x_split: f64,
    pub x_light: f64,
    /// Snapped face minus `x0 - h`.
    pub split_shift: f64,
    /// Snapped face minus `x0`.
    pub light_shift: f64,
}

impl From<&CycleGeometry> for SnapReport {
    fn from(g: &CycleGeometry) -> Self {
        SnapReport {
            x_split: g.x_split,
            x_light: g.x_light,
            split_shift: g.split_shift,
            light_shift: g.light_shift,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: String,
    pub model: String,
    pub status: RunStatus,
    pub failed_phase: Option<PhaseName>,
    pub error: Option<String>,
    pub phases: Vec<PhaseReport>,
    pub mass_balance: Option<MassBalance>,
    /// Global `final - predicted` vehicle count.
    pub mass_closure_residual: Option<f64>,
    /// `|V(t0 - tau0) - v|` at the start of the braking line.
    pub compatibility_residual: Option<f64>,
    pub v_handoff: Option<f64>,
    pub snap: Option<SnapReport>,
    pub signal: Option<SignalMarkers>,
    pub merge: Option<MergeRecord>,
    pub oracle: Option<OracleOutcome>,
    pub total_wall_seconds: f64,
}

fn phase_reports(phases: &[PhaseRecord]) -> Vec<PhaseReport> {
    let balances = phase_balances(phases);
    phases
        .iter()
        .zip(balances)
        .map(|(p, b)| PhaseReport {
            name: p.name,
            solver: p.solver,
            force_on: p.force_on,
            t_start: p.t_start,
            t_end: p.t_end,
            x_start: p.x_range.0,
            x_end: p.x_range.1,
            wall_seconds: p.wall_seconds,
            steps: p.trajectory.steps,
            snapshots: p.trajectory.snapshots.len(),
            initial_mass: b.initial_mass,
            final_mass: b.final_mass,
            inflow: b.inflow,
            outflow: b.outflow,
            clamped: b.clamped,
            closure_residual: b.closure_residual,
        })
        .collect()
}

pub fn build_report(run: &SimulationRun) -> Report {
    let balance = mass_balance_report(run);
    let phases = phase_reports(&run.phases);
    Report {
        schema_version: SCHEMA_VERSION.to_string(),
        model: run.model.to_string(),
        status: RunStatus::Completed,
        failed_phase: None,
        error: None,
        total_wall_seconds: phases.iter().map(|p| p.wall_seconds).sum(),
        phases,
        mass_closure_residual: Some(balance.closure_residual),
        mass_balance: Some(balance),
        compatibility_residual: Some(run.compatibility_residual),
        v_handoff: Some(run.v_handoff),
        snap: Some((&run.geometry).into()),
        signal: Some(run.markers),
        merge: Some(run.merge),
        oracle: run.oracle.clone(),
    }
}

pub fn failure_report(model: ModelVariant, failure: &RunFailure) -> Report {
    let phases = phase_reports(&failure.completed);
    Report {
        schema_version: SCHEMA_VERSION.to_string(),
        model: model.to_string(),
        status: RunStatus::Failed,
        failed_phase: failure.failed_phase,
        error: Some(failure.error.to_string()),
        total_wall_seconds: phases.iter().map(|p| p.wall_seconds).sum(),
        phases,
        mass_balance: None,
        mass_closure_residual: None,
        compatibility_residual: None,
        v_handoff: None,
        snap: None,
        signal: None,
        merge: None,
        oracle: None,
    }
}

pub fn write_report(report: &Report, path: &Path) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(report).map_err(|e| IoError::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| IoError::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Report, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::json(path, e))
}
