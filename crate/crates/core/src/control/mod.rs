//! Boundary control synthesis on star networks.

mod feasibility;
mod synthesis;
mod transfer;

use thiserror::Error;

use crate::solver::SolverError;

pub use feasibility::{declared_controls, feasibility, ComponentPlan, Feasibility, PlanVariant, TransferPlan};
pub use synthesis::{
    synthesize_global_local, synthesize_local, verify_controls, ControlProblem, ControlSet, Diagnostics, GlobalSynthesis, Leg, NodeControl,
    StringError, Synthesis, VerificationReport,
};
pub use transfer::{connect_traces, interface_residual, junction_transfer, TransferInput};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("control synthesis requires a star topology")]
    NotStar,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("horizon T = {horizon} violates T > 2T̄ = {} (T̄ = {t_bar}); choose a longer horizon", 2.0 * t_bar)]
    Horizon { horizon: f64, t_bar: f64 },
    #[error("T* = {t_star} does not exceed the traveling time {t_i} of string {string}")]
    TStar { string: usize, t_star: f64, t_i: f64 },
    #[error("compatibility residual {residual:.3e} at t = {at} exceeds {tol:.1e}")]
    Compatibility { at: f64, residual: f64, tol: f64 },
    #[error("{stage} solve failed: {source}")]
    Solver { stage: String, source: SolverError },
    #[error("junction transfer failed: {0}")]
    Transfer(String),
    #[error("{0}")]
    Gap(String),
    #[error("invalid input: {0}")]
    Data(String),
    #[error("legs {} and {seam} do not meet: mismatch {mismatch:.3e}", seam - 1)]
    Seam { seam: usize, mismatch: f64 },
    #[error("leg {leg}: {source}")]
    Leg { leg: usize, source: Box<ControlError> },
}
