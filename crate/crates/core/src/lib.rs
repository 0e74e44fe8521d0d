//! Simulation of vehicle flow along a single road approaching a signalized
//! intersection, modelled as a pressureless gas.
//!
//! [`orchestrator::run_scenario`] drives a full signal cycle; the solvers in
//! [`hyperbolic`] and [`parabolic`] and the reference in [`lagrangian`] can
//! also be used on their own.

// `!(x > 0.0)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod hyperbolic;
pub mod io;
pub mod lagrangian;
pub mod numerics;
pub mod orchestrator;
pub mod parabolic;
pub mod trajectory;
