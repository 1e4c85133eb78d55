//! Stretched equilibria: affine zero-gravity states, shooting solutions of the
//! static boundary value problem, and residual checks.

use nalgebra::{DMatrix, DVector};

use crate::material::{check_stretched, invert_stress, stress, stress_jacobian, MaterialError, MaterialLaw};
use crate::network::{connected_components, laplacian_int, End, NetworkSpec, NodeKind, Topology};
use crate::numerics::stencil;
use crate::Vec3;

pub const TOL_EQ: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquilibriumError {
    #[error("string {string}: {source}")]
    Material { string: usize, source: MaterialError },
    #[error("gravity must vanish for the affine construction (g = {0})")]
    NonzeroGravity(f64),
    #[error("nodal balance fails: {0}")]
    Unbalanced(String),
    #[error("shooting did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    ZeroGravityAffine,
    ShootingSolved,
    UserSampled,
}

/// Equilibrium of one string.
#[derive(Debug, Clone)]
pub enum StringEquilibrium {
    /// `R(x) = anchor + x tangent`.
    Affine { anchor: Vec3, tangent: Vec3 },
    /// `G(R_x(x)) = G(v0) + x load`, with `R` tabulated on a uniform grid.
    Loaded { law: MaterialLaw, v0: Vec3, load: Vec3, length: f64, table: Vec<Vec3> },
    /// Cubic-spline samples of `R` and `R_x`.
    Sampled { r: crate::numerics::CubicSpline, rx: crate::numerics::CubicSpline },
}

impl StringEquilibrium {
    pub fn position(&self, x: f64) -> Vec3 {
        match self {
            StringEquilibrium::Affine { anchor, tangent } => anchor + tangent * x,
            StringEquilibrium::Loaded { table, length, .. } => {
                let k = table.len() - 1;
                let h = length / k as f64;
                let i = ((x / h).floor() as isize).clamp(0, k as isize - 1) as usize;
                let x0 = i as f64 * h;
                let s = (x - x0) / h;
                let (p0, p1) = (table[i], table[i + 1]);
                let (m0, m1) = (self.strain(x0) * h, self.strain(x0 + h) * h);
                let s2 = s * s;
                let s3 = s2 * s;
                p0 * (2.0 * s3 - 3.0 * s2 + 1.0) + m0 * (s3 - 2.0 * s2 + s) + p1 * (-2.0 * s3 + 3.0 * s2) + m1 * (s3 - s2)
            }
            StringEquilibrium::Sampled { r, .. } => r.eval(x).0,
        }
    }

    pub fn strain(&self, x: f64) -> Vec3 {
        match self {
            StringEquilibrium::Affine { tangent, .. } => *tangent,
            StringEquilibrium::Loaded { law, v0, load, .. } => {
                let g = stress(law, v0).expect("stretched") + load * x;
                invert_stress(law, &g).expect("stretched along the profile")
            }
            StringEquilibrium::Sampled { rx, .. } => rx.eval(x).0,
        }
    }

    /// `R_xx`, from the static equation `G_v R_xx = load` where available.
    pub fn curvature(&self, x: f64) -> Vec3 {
        match self {
            StringEquilibrium::Affine { .. } => Vec3::zeros(),
            StringEquilibrium::Loaded { law, load, .. } => {
                let j = stress_jacobian(law, &self.strain(x)).expect("stretched");
                j.lu().solve(load).unwrap_or_else(Vec3::zeros)
            }
            StringEquilibrium::Sampled { rx, .. } => rx.eval(x).1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumConfig {
    pub strings: Vec<StringEquilibrium>,
    pub construction: Construction,
}

impl EquilibriumConfig {
    /// `(R, R_x)` sampled at `n + 1` uniform points of string `i`.
    pub fn sample(&self, spec: &NetworkSpec, i: usize, n: usize) -> (Vec<Vec3>, Vec<Vec3>) {
        let l = spec.strings[i].length;
        let e = &self.strings[i];
        (0..=n)
            .map(|k| {
                let x = l * k as f64 / n as f64;
                (e.position(x), e.strain(x))
            })
            .unzip()
    }

    pub fn end_position(&self, spec: &NetworkSpec, i: usize, end: End) -> Vec3 {
        match end {
            End::Start => self.strings[i].position(0.0),
            End::Finish => self.strings[i].position(spec.strings[i].length),
        }
    }

    pub fn end_strain(&self, spec: &NetworkSpec, i: usize, end: End) -> Vec3 {
        match end {
            End::Start => self.strings[i].strain(0.0),
            End::Finish => self.strings[i].strain(spec.strings[i].length),
        }
    }

    /// Smallest stretch `|R_x| - 1` over all strings (sampled).
    pub fn stretch_margin(&self, spec: &NetworkSpec) -> f64 {
        (0..spec.strings.len()).flat_map(|i| self.sample(spec, i, 64).1.into_iter().map(|v| v.norm() - 1.0)).fold(f64::INFINITY, f64::min)
    }
}

/// Affine equilibrium `R^i(x) = anchor_i + x tangent_i` at zero gravity.
/// Fails with the offending balances if the junction equations do not hold.
pub fn zero_gravity_equilibrium(spec: &NetworkSpec, tangents: &[Vec3], anchors: &[Vec3]) -> Result<EquilibriumConfig, EquilibriumError> {
    if spec.gravity != 0.0 {
        return Err(EquilibriumError::NonzeroGravity(spec.gravity));
    }
    for (i, t) in tangents.iter().enumerate() {
        check_stretched(t.norm()).map_err(|source| EquilibriumError::Material { string: spec.strings[i].id, source })?;
    }
    let eq = EquilibriumConfig {
        strings: tangents.iter().zip(anchors).map(|(t, a)| StringEquilibrium::Affine { anchor: *a, tangent: *t }).collect(),
        construction: Construction::ZeroGravityAffine,
    };
    let report = equilibrium_residual(spec, &eq, 64);
    let bad: Vec<String> = report
        .junction
        .iter()
        .filter(|j| j.residual > TOL_EQ)
        .map(|j| format!("node {} string {} residual {:.3e}", j.node, j.string, j.residual))
        .collect();
    if !bad.is_empty() {
        return Err(EquilibriumError::Unbalanced(bad.join("; ")));
    }
    Ok(eq)
}

/// Tangents of a planar symmetric star: `stretch` times unit vectors at angles
/// `2 pi i / n` in the `xy` plane.
pub fn symmetric_tangents(n: usize, stretch: f64) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            Vec3::new(a.cos(), a.sin(), 0.0) * stretch
        })
        .collect()
}

/// Affine star equilibrium: solves the junction positions from
/// `kappa L Rbar = G(tangent)`, with each spring component centred on `hub`.
pub fn star_affine_equilibrium(spec: &NetworkSpec, tangents: &[Vec3], hub: Vec3) -> Result<EquilibriumConfig, EquilibriumError> {
    let graph = spec.hub_graph().ok_or_else(|| EquilibriumError::Unsupported("star topology required".into()))?;
    let n = graph.size();
    let lap = laplacian_int(graph);
    let mut forces = vec![Vec3::zeros(); n];
    for a in 0..n {
        let (sid, end) = graph.incidence[a];
        let i = spec.string_index(sid).unwrap();
        let g = stress(spec.law(i), &tangents[i]).map_err(|source| EquilibriumError::Material { string: sid, source })?;
        // eps G + kappa (L Rbar) = 0
        forces[a] = -g * end.epsilon() / graph.stiffness;
    }
    let mut rbar = vec![hub; n];
    for comp in connected_components(graph) {
        let total: Vec3 = comp.iter().map(|&a| forces[a]).sum();
        let scale: f64 = comp.iter().map(|&a| forces[a].norm()).fold(0.0, f64::max).max(1e-300);
        if total.norm() > 1e-12 * scale.max(1.0) {
            let ids: Vec<usize> = comp.iter().map(|&a| graph.incidence[a].0).collect();
            return Err(EquilibriumError::Unbalanced(format!(
                "spring component {:?} carries net stress {:.3e}; no stretched equilibrium exists for it",
                ids,
                total.norm()
            )));
        }
        let m = comp.len();
        // Least-norm solution of the singular block with the mean pinned to zero.
        let mut a = DMatrix::<f64>::zeros(m + 1, m);
        for (p, &ia) in comp.iter().enumerate() {
            for (q, &ib) in comp.iter().enumerate() {
                a[(p, q)] = lap[ia][ib] as f64;
            }
            a[(m, p)] = 1.0;
        }
        for c in 0..3 {
            let mut b = DVector::<f64>::zeros(m + 1);
            for (p, &ia) in comp.iter().enumerate() {
                b[p] = forces[ia][c];
            }
            let ata = a.transpose() * &a;
            let atb = a.transpose() * b;
            let x = ata.lu().solve(&atb).ok_or_else(|| EquilibriumError::Unbalanced("singular spring system".into()))?;
            for (p, &ia) in comp.iter().enumerate() {
                rbar[ia][c] = hub[c] + x[p];
            }
        }
    }
    let mut anchors = vec![Vec3::zeros(); spec.strings.len()];
    for a in 0..n {
        let i = spec.string_index(graph.incidence[a].0).unwrap();
        anchors[i] = rbar[a];
    }
    zero_gravity_equilibrium(spec, tangents, &anchors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionResidual {
    pub node: usize,
    pub string: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Per string, max over the grid of `|[G(R_x)]_x - rho g e|`.
    pub interior: Vec<f64>,
    pub junction: Vec<JunctionResidual>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.interior.iter().chain(self.junction.iter().map(|j| &j.residual)).fold(0.0, |a, &b| a.max(b))
    }
}

/// Residuals of the static system on an `n`-cell grid per string, normalized
/// by the largest `V_ss(1)`. Clamped and controlled ends hold by definition.
pub fn equilibrium_residual(spec: &NetworkSpec, eq: &EquilibriumConfig, n: usize) -> ResidualReport {
    let scale = spec.materials.values().map(|l| l.vss(1.0)).fold(0.0, f64::max).max(1e-300);
    let interior = (0..spec.strings.len())
        .map(|i| {
            let s = &spec.strings[i];
            let law = spec.law(i);
            let (_, rx) = eq.sample(spec, i, n);
            let g: Vec<Vec3> = rx.iter().map(|v| stress(law, v).unwrap_or_else(|_| Vec3::repeat(f64::NAN))).collect();
            let h = s.length / n as f64;
            let load = spec.gravity_dir * (s.density * spec.gravity);
            (0..=n)
                .map(|k| {
                    let (start, w) = stencil(k, n + 1, h, 1, 4);
                    let d = w.iter().enumerate().fold(Vec3::zeros(), |a, (j, c)| a + g[start + j] * *c);
                    (d - load).norm() / scale
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let mut junction = Vec::new();
    for node in &spec.nodes {
        if let NodeKind::Multiple(graph) = &node.kind {
            let lap = laplacian_int(graph);
            let pos: Vec<Vec3> =
                graph.incidence.iter().map(|&(sid, end)| eq.end_position(spec, spec.string_index(sid).unwrap(), end)).collect();
            for (a, &(sid, end)) in graph.incidence.iter().enumerate() {
                let i = spec.string_index(sid).unwrap();
                let g = stress(spec.law(i), &eq.end_strain(spec, i, end)).unwrap_or_else(|_| Vec3::repeat(f64::NAN));
                let lr: Vec3 = (0..graph.size()).map(|b| pos[b] * lap[a][b] as f64).sum();
                let r = g * end.epsilon() + lr * graph.stiffness;
                junction.push(JunctionResidual { node: node.id, string: sid, residual: r.norm() / scale });
            }
        }
    }
    ResidualReport { interior, junction }
}

const GL_X: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL_W: [f64; 5] =
    [0.236_926_885_056_189_08, 0.478_628_670_499_366_47, 0.568_888_888_888_888_9, 0.478_628_670_499_366_47, 0.236_926_885_056_189_08];

fn loaded_strain(law: &MaterialLaw, g0: &Vec3, load: &Vec3, x: f64) -> Result<Vec3, MaterialError> {
    let v = invert_stress(law, &(g0 + load * x))?;
    check_stretched(v.norm())?;
    Ok(v)
}

/// Tabulates `R` on `k + 1` points by composite Gauss-Legendre quadrature of
/// the strain.
fn tabulate(law: &MaterialLaw, r0: Vec3, v0: &Vec3, load: &Vec3, length: f64, k: usize) -> Result<Vec<Vec3>, MaterialError> {
    let g0 = stress(law, v0)?;
    let h = length / k as f64;
    let mut table = Vec::with_capacity(k + 1);
    let mut r = r0;
    table.push(r);
    for c in 0..k {
        let mid = (c as f64 + 0.5) * h;
        let mut acc = Vec3::zeros();
        for q in 0..5 {
            acc += loaded_strain(law, &g0, load, mid + 0.5 * h * GL_X[q])? * GL_W[q];
        }
        r += acc * (0.5 * h);
        table.push(r);
    }
    Ok(table)
}

const TABLE_CELLS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Newton shooting for the static problem. Each string's strain at `x = 0`
/// is unknown; strings starting at the multiple node also have an unknown
/// start position and contribute the nodal balance. `anchors[i]` is the fixed
/// position of the simple node at `x = L` (and `starts[i]` the fixed start
/// for strings whose `x = 0` end is simple). `guess[i]` is the initial strain.
pub fn shooting_equilibrium(
    spec: &NetworkSpec,
    anchors: &[Vec3],
    starts: &[Option<Vec3>],
    guess: &[Vec3],
) -> Result<(EquilibriumConfig, ShootingReport), EquilibriumError> {
    if spec.topology != Topology::Star && !(spec.strings.len() == 1) {
        return Err(EquilibriumError::Unsupported("shooting is limited to star topologies and single strings".into()));
    }
    let ns = spec.strings.len();
    for (i, v) in guess.iter().enumerate() {
        check_stretched(v.norm()).map_err(|source| EquilibriumError::Material { string: spec.strings[i].id, source })?;
    }
    let graph = spec.hub_graph().cloned();
    // unknown layout: v_i (3 each), then free starts (3 each)
    let free: Vec<bool> = (0..ns).map(|i| starts[i].is_none()).collect();
    let mut z = Vec::new();
    for v in guess {
        z.extend_from_slice(v.as_slice());
    }
    for i in 0..ns {
        if free[i] {
            let s = anchors[i] - guess[i] * spec.strings[i].length;
            z.extend_from_slice(s.as_slice());
        }
    }
    let unpack = |z: &[f64]| -> (Vec<Vec3>, Vec<Vec3>) {
        let v: Vec<Vec3> = (0..ns).map(|i| Vec3::new(z[3 * i], z[3 * i + 1], z[3 * i + 2])).collect();
        let mut k = 3 * ns;
        let s: Vec<Vec3> = (0..ns)
            .map(|i| match starts[i] {
                Some(p) => p,
                None => {
                    let p = Vec3::new(z[k], z[k + 1], z[k + 2]);
                    k += 3;
                    p
                }
            })
            .collect();
        (v, s)
    };
    let residual = |z: &[f64]| -> Result<Vec<f64>, EquilibriumError> {
        let (v, s) = unpack(z);
        let mut out = Vec::with_capacity(z.len());
        for i in 0..ns {
            let st = &spec.strings[i];
            let law = spec.law(i);
            let load = spec.gravity_dir * (st.density * spec.gravity);
            let table =
                tabulate(law, s[i], &v[i], &load, st.length, 64).map_err(|source| EquilibriumError::Material { string: st.id, source })?;
            let d = table[64] - anchors[i];
            out.extend_from_slice(d.as_slice());
        }
        if let Some(g) = &graph {
            let lap = laplacian_int(g);
            for a in 0..g.size() {
                let (sid, end) = g.incidence[a];
                let i = spec.string_index(sid).unwrap();
                let gi = stress(spec.law(i), &v[i]).map_err(|source| EquilibriumError::Material { string: sid, source })?;
                let lr: Vec3 = (0..g.size()).map(|b| s[spec.string_index(g.incidence[b].0).unwrap()] * lap[a][b] as f64).sum();
                let r = gi * end.epsilon() + lr * g.stiffness;
                out.extend_from_slice(r.as_slice());
            }
        }
        Ok(out)
    };
    let norm = |f: &[f64]| f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut f = residual(&z)?;
    let target = 1e-3 * TOL_EQ;
    let mut iterations = 0;
    while norm(&f) > target {
        if iterations >= 50 {
            return Err(EquilibriumError::NoConvergence { iterations, residual: norm(&f) });
        }
        iterations += 1;
        let m = z.len();
        let mut jac = DMatrix::<f64>::zeros(f.len(), m);
        for c in 0..m {
            let h = 1e-6 * z[c].abs().max(1.0);
            let mut zp = z.clone();
            zp[c] += h;
            let mut zm = z.clone();
            zm[c] -= h;
            let fp = residual(&zp)?;
            let fm = residual(&zm)?;
            for r in 0..f.len() {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(f.len(), f.iter().map(|x| -x));
        let step = jac.clone().svd(true, true).solve(&rhs, 1e-14).map_err(|e| EquilibriumError::Unsupported(e.to_string()))?;
        let f0 = norm(&f);
        let mut lambda = 1.0;
        loop {
            let zt: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            match residual(&zt) {
                Ok(ft) if norm(&ft) < f0 || lambda < 1e-4 => {
                    z = zt;
                    f = ft;
                    break;
                }
                _ => lambda *= 0.5,
            }
            if lambda < 1e-6 {
                return Err(EquilibriumError::NoConvergence { iterations, residual: f0 });
            }
        }
    }
    let (v, s) = unpack(&z);
    let mut strings = Vec::with_capacity(ns);
    for i in 0..ns {
        let st = &spec.strings[i];
        let law = spec.law(i).clone();
        let load = spec.gravity_dir * (st.density * spec.gravity);
        let table = tabulate(&law, s[i], &v[i], &load, st.length, TABLE_CELLS)
            .map_err(|source| EquilibriumError::Material { string: st.id, source })?;
        strings.push(StringEquilibrium::Loaded { law, v0: v[i], load, length: st.length, table });
    }
    let residual = norm(&f);
    Ok((EquilibriumConfig { strings, construction: Construction::ShootingSolved }, ShootingReport { iterations, residual }))
}
