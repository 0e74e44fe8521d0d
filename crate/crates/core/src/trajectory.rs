//! Solver output: time-ordered snapshots with a running mass ledger.

use serde::{Deserialize, Serialize};

use crate::domain::FlowState;

/// Cumulative vehicle bookkeeping since the start of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MassLedger {
    /// Mass on the solver's own mesh at this instant.
    pub total_mass: f64,
    /// Integrated flux through the left boundary (positive into the road).
    pub inflow: f64,
    /// Integrated flux through the right boundary (positive out of the road).
    pub outflow: f64,
    /// Mass added back by clamping negative cell masses.
    pub clamped: f64,
}

impl MassLedger {
    /// `total - (initial + inflow - outflow + clamped)`.
    pub fn closure_residual(&self, initial_mass: f64) -> f64 {
        self.total_mass - (initial_mass + self.inflow - self.outflow + self.clamped)
    }
}

/// Velocities carried by the Dirichlet boundary nodes of a viscous solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVelocity {
    pub left: f64,
    pub right: f64,
}

/// Cell values on the solver's own non-uniform mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeMesh {
    pub faces: Vec<f64>,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: FlowState,
    pub ledger: MassLedger,
    pub boundary_velocity: Option<BoundaryVelocity>,
    /// Set when `state` was remapped from a stretched mesh.
    pub native: Option<NativeMesh>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub initial_mass: f64,
    pub steps: usize,
    /// `|V(start) - v(handoff)|` when the right boundary carries a prescribed speed.
    pub compatibility_residual: Option<f64>,
}

impl Trajectory {
    pub fn first(&self) -> Option<&Snapshot> {
        self.snapshots.first()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn final_state(&self) -> Option<&FlowState> {
        self.snapshots.last().map(|s| &s.state)
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.state.t).collect()
    }

    /// Largest `|closure residual|` over all snapshots.
    pub fn max_closure_residual(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| s.ledger.closure_residual(self.initial_mass).abs())
            .fold(0.0, f64::max)
    }
}

/// Snapshot times `t_start + k * interval` strictly inside `(t_start, t_end)`,
/// followed by `t_end`.
pub(crate) fn snapshot_schedule(t_start: f64, t_end: f64, interval: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if interval > 0.0 && interval.is_finite() {
        let mut k = 1usize;
        loop {
            let t = t_start + k as f64 * interval;
            if t >= t_end - 1e-9 * interval {
                break;
            }
            out.push(t);
            k += 1;
        }
    }
    if t_end > t_start {
        out.push(t_end);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_lands_on_end() {
        assert_eq!(snapshot_schedule(0.0, 3.0, 1.0), vec![1.0, 2.0, 3.0]);
        assert_eq!(snapshot_schedule(16.0, 17.5, 1.0), vec![17.0, 17.5]);
        assert_eq!(snapshot_schedule(1.0, 1.0, 1.0), Vec::<f64>::new());
        assert_eq!(snapshot_schedule(0.0, 2.0, 5.0), vec![2.0]);
    }

    #[test]
    fn ledger_residual() {
        let l = MassLedger {
            total_mass: 11.0,
            inflow: 2.0,
            outflow: 1.0,
            clamped: 0.0,
        };
        assert_eq!(l.closure_residual(10.0), 0.0);
    }
}
