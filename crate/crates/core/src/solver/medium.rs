//! Per-string coefficients sampled on the solver grid, junction data and the
//! time grid.

use crate::equilibrium::EquilibriumConfig;
use crate::material::{characteristic_frame, default_skew_axis, CharacteristicFrame, MaterialLaw, DELTA_STRETCH};
use crate::network::{laplacian_int, End, NetworkSpec, NodeKind};
use crate::Vec3;

use super::times::{default_eps0, speed_bounds};
use super::{SolverConfig, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndRole {
    Clamped,
    Controlled,
    Junction { junction: usize, local: usize },
}

#[derive(Debug, Clone)]
pub struct StringMedium {
    pub id: usize,
    pub length: f64,
    pub rho: f64,
    pub law: MaterialLaw,
    pub n: usize,
    pub dx: f64,
    pub axis: Vec3,
    pub rex: Vec<Vec3>,
    pub rex_mid: Vec<Vec3>,
    pub g0: Vec<Vec3>,
    pub g0_mid: Vec<Vec3>,
    /// Equilibrium positions at `x = 0` and `x = L`.
    pub ends: [Vec3; 2],
    pub roles: [EndRole; 2],
    /// Slowest and fastest speeds over the strain ball.
    pub speed_min: f64,
    pub speed_max: f64,
}

/// `G(R^e_x + p) - G(R^e_x)`, or the offending stretch.
#[inline]
pub(crate) fn force(law: &MaterialLaw, rex: &Vec3, g0: &Vec3, p: &Vec3) -> Result<Vec3, f64> {
    let v = rex + p;
    let s = v.norm();
    if !(s >= 1.0 + DELTA_STRETCH) {
        return Err(s);
    }
    Ok(v * (law.vs(s) / s) - g0)
}

impl StringMedium {
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn end_index(&self, end: End) -> usize {
        match end {
            End::Start => 0,
            End::Finish => self.n,
        }
    }

    pub fn frame(&self, j: usize, p: &Vec3) -> Result<CharacteristicFrame, SolverError> {
        characteristic_frame(&self.law, self.rho, &(self.rex[j] + p), &self.axis)
            .map_err(|source| SolverError::Material { string: self.id, source })
    }

    pub fn force_at(&self, j: usize, p: &Vec3) -> Result<Vec3, f64> {
        force(&self.law, &self.rex[j], &self.g0[j], p)
    }
}

#[derive(Debug, Clone)]
pub struct JunctionMedium {
    pub node: usize,
    pub stiffness: f64,
    pub masses: Vec<f64>,
    pub lap: Vec<Vec<f64>>,
    /// `(string index, end)` per local index.
    pub members: Vec<(usize, End)>,
}

/// Everything the steppers need, sampled once.
#[derive(Debug, Clone)]
pub struct Medium {
    pub strings: Vec<StringMedium>,
    pub junctions: Vec<JunctionMedium>,
    pub eps0: f64,
    pub cfl: f64,
}

impl Medium {
    pub fn new(spec: &NetworkSpec, eq: &EquilibriumConfig, cfg: &SolverConfig) -> Result<Medium, SolverError> {
        if !(cfg.cfl > 0.0 && cfg.cfl < 1.0) {
            return Err(SolverError::Config(format!("CFL factor {} outside (0, 1)", cfg.cfl)));
        }
        if cfg.cells < 4 {
            return Err(SolverError::Config("at least 4 cells required".into()));
        }
        let report = spec.validate();
        if !report.is_ok() {
            return Err(SolverError::Config(report.violations.join("; ")));
        }
        let eps0 = cfg.eps0.unwrap_or_else(|| default_eps0(spec, eq));
        let lmax = spec.strings.iter().map(|s| s.length).fold(0.0, f64::max);
        let mut junctions = Vec::new();
        let mut roles = vec![[EndRole::Clamped; 2]; spec.strings.len()];
        for node in &spec.nodes {
            match &node.kind {
                NodeKind::Multiple(g) => {
                    let lap = laplacian_int(g).into_iter().map(|row| row.into_iter().map(|v| v as f64).collect()).collect();
                    let members: Vec<(usize, End)> = g.incidence.iter().map(|&(sid, end)| (spec.string_index(sid).unwrap(), end)).collect();
                    let jx = junctions.len();
                    for (a, &(i, end)) in members.iter().enumerate() {
                        roles[i][end as usize] = EndRole::Junction { junction: jx, local: a };
                    }
                    junctions.push(JunctionMedium { node: node.id, stiffness: g.stiffness, masses: g.masses.clone(), lap, members });
                }
                kind => {
                    let role = if matches!(kind, NodeKind::ClampedSimple) { EndRole::Clamped } else { EndRole::Controlled };
                    for (i, s) in spec.strings.iter().enumerate() {
                        if s.node_at_0 == node.id {
                            roles[i][0] = role;
                        }
                        if s.node_at_l == node.id {
                            roles[i][1] = role;
                        }
                    }
                }
            }
        }
        let mut strings = Vec::with_capacity(spec.strings.len());
        for (i, s) in spec.strings.iter().enumerate() {
            let n = ((cfg.cells as f64 * s.length / lmax).round() as usize).max(4);
            let dx = s.length / n as f64;
            let e = &eq.strings[i];
            let law = spec.law(i).clone();
            let rex: Vec<Vec3> = (0..=n).map(|j| e.strain(j as f64 * dx)).collect();
            let rex_mid: Vec<Vec3> = (0..n).map(|j| e.strain((j as f64 + 0.5) * dx)).collect();
            let g = |v: &Vec3| v * (law.vs(v.norm()) / v.norm());
            let g0 = rex.iter().map(g).collect();
            let g0_mid = rex_mid.iter().map(g).collect();
            let (speed_min, speed_max) =
                speed_bounds(&law, s.density, &rex, eps0).map_err(|source| SolverError::Material { string: s.id, source })?;
            strings.push(StringMedium {
                id: s.id,
                length: s.length,
                rho: s.density,
                axis: default_skew_axis(&rex[0]),
                law,
                n,
                dx,
                rex,
                rex_mid,
                g0,
                g0_mid,
                ends: [e.position(0.0), e.position(s.length)],
                roles: roles[i],
                speed_min,
                speed_max,
            });
        }
        Ok(Medium { strings, junctions, eps0, cfl: cfg.cfl })
    }

    /// Largest step satisfying the CFL bound over the strain ball.
    pub fn max_dt(&self) -> f64 {
        self.strings.iter().map(|s| self.cfl * s.dx / s.speed_max).fold(f64::INFINITY, f64::min)
    }

    pub fn check_stiffness(&self, dt: f64) -> Result<(), SolverError> {
        for j in &self.junctions {
            let m = j.masses.iter().copied().fold(f64::INFINITY, f64::min);
            if !(m > 0.0) {
                return Err(SolverError::Config(format!("junction {} has a non-positive mass", j.node)));
            }
            let value = dt * (j.stiffness / m).sqrt();
            if value > 0.5 {
                return Err(SolverError::Stiffness { value });
            }
        }
        Ok(())
    }

    pub fn string_index(&self, id: usize) -> Option<usize> {
        self.strings.iter().position(|s| s.id == id)
    }
}

/// Uniform time grid `t0 + k dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl Grid {
    /// Finest uniform grid on `[t0, t1]` with step at most `dt_max`.
    pub fn covering(t0: f64, t1: f64, dt_max: f64) -> Grid {
        let steps = ((t1 - t0) / dt_max).ceil().max(1.0) as usize;
        Grid { t0, dt: (t1 - t0) / steps as f64, steps }
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.steps)
    }
}
