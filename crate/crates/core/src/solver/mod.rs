//! Forward, backward and sidewise integration of the perturbation system
//! `r_tt = rho^{-1} [G(R^e_x + r_x) - G(R^e_x)]_x` with spring-mass junctions.

mod energy;
mod forward;
mod medium;
mod sidewise;
mod times;
mod trace;

pub use energy::total_energy;
pub use forward::{
    check_compatibility, consistency_defect, simulate_backward, simulate_forward, CompatibilityReport, Drive, Drives, SampledSignal,
    SimResult, State, StringState,
};
pub use medium::{EndRole, Grid, JunctionMedium, Medium, StringMedium};
pub use sidewise::{sidewise_solve, SidewiseInput, SidewiseResult, Station};
pub use times::{default_eps0, traveling_times, TravelTimes};
pub use trace::TraceRecord;

use crate::exec::ExecPolicy;
use crate::material::MaterialError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("CFL violated at t = {t:.6}: ratio {ratio:.4} exceeds {limit:.4}")]
    Cfl { t: f64, ratio: f64, limit: f64 },
    #[error("stretch lost on string {string} at index {index}, t = {t:.6}: |R_x| = {stretch:.9}")]
    Stretch { string: usize, index: usize, t: f64, stretch: f64 },
    #[error("non-finite value on string {string} at index {index}, t = {t:.6}")]
    NonFinite { string: usize, index: usize, t: f64 },
    #[error("junction stiffness guard: dt sqrt(kappa/m) = {value:.4} > 0.5")]
    Stiffness { value: f64 },
    #[error("string {string}: {source}")]
    Material { string: usize, source: MaterialError },
    #[error("invalid solver input: {0}")]
    Config(String),
}

/// Numerical parameters shared by all solve modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Cells on the longest string; shorter strings scale proportionally.
    pub cells: usize,
    /// Courant factor `c` in `(0, 1)`.
    pub cfl: f64,
    /// Radius of the strain ball used for speed bounds; `None` selects 5% of
    /// the equilibrium stretch margin.
    pub eps0: Option<f64>,
    /// Store a full state every this many steps (0: initial and final only).
    pub snapshot_stride: usize,
    /// Evaluate the energy every this many steps (0: never).
    pub energy_stride: usize,
    pub policy: ExecPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { cells: 200, cfl: 0.9, eps0: None, snapshot_stride: 0, energy_stride: 0, policy: ExecPolicy::default() }
    }
}

impl SolverConfig {
    pub fn with_cells(cells: usize) -> Self {
        SolverConfig { cells, ..Default::default() }
    }
}
