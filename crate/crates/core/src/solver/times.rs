//! Traveling times and speed bounds over a ball of strains around equilibrium.

use crate::equilibrium::EquilibriumConfig;
use crate::material::{MaterialError, MaterialLaw, DELTA_STRETCH};
use crate::network::{End, NetworkSpec, NodeKind};
use crate::Vec3;

use super::SolverError;

const BALL_SAMPLES: usize = 9;
const X_SAMPLES: usize = 64;

pub fn default_eps0(spec: &NetworkSpec, eq: &EquilibriumConfig) -> f64 {
    0.05 * eq.stretch_margin(spec).max(0.0)
}

/// `(min, max)` wave speed over strain magnitudes within `eps0` of each sample.
pub(crate) fn speed_bounds(law: &MaterialLaw, rho: f64, strains: &[Vec3], eps0: f64) -> Result<(f64, f64), MaterialError> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for v in strains {
        let s0 = v.norm();
        if s0 - eps0 < 1.0 + DELTA_STRETCH {
            return Err(MaterialError::NotStretched { stretch: s0 - eps0, required: 1.0 + DELTA_STRETCH });
        }
        for k in 0..BALL_SAMPLES {
            let s = s0 - eps0 + 2.0 * eps0 * k as f64 / (BALL_SAMPLES - 1) as f64;
            let (m1, m2) = law.speeds(rho, s);
            lo = lo.min(m1.min(m2));
            hi = hi.max(m1.max(m2));
        }
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimes {
    /// `T_i = L_i / min speed` per string.
    pub per_string: Vec<f64>,
    pub min_speeds: Vec<f64>,
    /// Index of the clamped string (or 0 when none is clamped).
    pub clamped: usize,
    /// `T_bar = T_clamped + max_i T_i`.
    pub t_bar: f64,
    /// `2 T_bar`; control horizons must exceed it.
    pub t_min_control: f64,
    pub eps0: f64,
}

pub fn traveling_times(spec: &NetworkSpec, eq: &EquilibriumConfig, eps0: f64) -> Result<TravelTimes, SolverError> {
    let mut per_string = Vec::new();
    let mut min_speeds = Vec::new();
    for (i, s) in spec.strings.iter().enumerate() {
        let strains: Vec<Vec3> = (0..=X_SAMPLES).map(|k| eq.strings[i].strain(s.length * k as f64 / X_SAMPLES as f64)).collect();
        let (lo, _) = speed_bounds(spec.law(i), s.density, &strains, eps0).map_err(|source| match source {
            MaterialError::NotStretched { .. } => {
                SolverError::Config(format!("string {}: eps0 = {eps0} leaves the stretched regime; choose a smaller eps0", s.id))
            }
            source => SolverError::Material { string: s.id, source },
        })?;
        min_speeds.push(lo);
        per_string.push(s.length / lo);
    }
    let clamped = (0..spec.strings.len())
        .find(|&i| [End::Start, End::Finish].iter().any(|&e| matches!(spec.end_kind(i, e), Some(NodeKind::ClampedSimple))))
        .unwrap_or(0);
    let t_bar = per_string[clamped] + per_string.iter().copied().fold(0.0, f64::max);
    Ok(TravelTimes { per_string, min_speeds, clamped, t_bar, t_min_control: 2.0 * t_bar, eps0 })
}
