//! Time stepping: Richtmyer two-step Lax-Wendroff in the interior, traced
//! outgoing characteristics at the ends, Heun on the junction mass ODE.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::exec::{map_range, ExecPolicy};
use crate::material::CharacteristicFrame;
use crate::network::End;
use crate::profile::NetworkData;
use crate::Vec3;

use super::energy::total_energy;
use super::medium::{force, EndRole, Grid, Medium, StringMedium};
use super::trace::TraceRecord;
use super::{SolverConfig, SolverError};

/// Perturbation `(p, q, r) = (r_x, r_t, r)` at the nodes of one string.
#[derive(Debug, Clone, PartialEq)]
pub struct StringState {
    pub p: Vec<Vec3>,
    pub q: Vec<Vec3>,
    pub r: Vec<Vec3>,
}

impl StringState {
    pub fn zeros(n: usize) -> Self {
        StringState { p: vec![Vec3::zeros(); n + 1], q: vec![Vec3::zeros(); n + 1], r: vec![Vec3::zeros(); n + 1] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub strings: Vec<StringState>,
}

impl State {
    pub fn zeros(medium: &Medium, t: f64) -> Self {
        State { t, strings: medium.strings.iter().map(|m| StringState::zeros(m.n)).collect() }
    }

    /// Samples `(r, r_t)` profiles; `r_x` is taken from the analytic slope.
    pub fn from_data(medium: &Medium, data: &NetworkData, t: f64) -> Self {
        let strings = medium
            .strings
            .iter()
            .zip(data)
            .map(|(m, d)| {
                let mut s = StringState::zeros(m.n);
                for j in 0..=m.n {
                    let (r, p, _) = d.r.eval(m.x(j));
                    s.r[j] = r;
                    s.p[j] = p;
                    s.q[j] = d.rt.value(m.x(j));
                }
                s
            })
            .collect();
        State { t, strings }
    }

    /// Per-string sup errors `(r, r_t)` against profiles.
    pub fn errors_against(&self, medium: &Medium, data: &NetworkData) -> Vec<(f64, f64)> {
        medium
            .strings
            .iter()
            .zip(&self.strings)
            .zip(data)
            .map(|((m, s), d)| {
                (0..=m.n).fold((0.0f64, 0.0f64), |(er, ev), j| {
                    let x = m.x(j);
                    (er.max((s.r[j] - d.r.value(x)).norm()), ev.max((s.q[j] - d.rt.value(x)).norm()))
                })
            })
            .collect()
    }

    /// Per-string sup differences `(r, r_t)` against another state on the same grid.
    pub fn diff(&self, other: &State) -> Vec<(f64, f64)> {
        self.strings
            .iter()
            .zip(&other.strings)
            .map(|(a, b)| {
                let d = |x: &Vec<Vec3>, y: &Vec<Vec3>| x.iter().zip(y).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
                (d(&a.r, &b.r), d(&a.q, &b.q))
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.strings.iter().flat_map(|s| s.p.iter().chain(&s.q).chain(&s.r)).map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn reversed(&self, t: f64) -> State {
        let mut s = self.clone();
        s.t = t;
        for st in &mut s.strings {
            for q in &mut st.q {
                *q = -*q;
            }
        }
        s
    }
}

/// Perturbation `(r, r_t)` of a boundary sampled uniformly; evaluated by cubic
/// Hermite interpolation between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub t0: f64,
    pub dt: f64,
    pub r: Vec<Vec3>,
    pub rt: Vec<Vec3>,
}

impl SampledSignal {
    pub fn eval(&self, t: f64) -> (Vec3, Vec3) {
        let n = self.r.len();
        let u = (t - self.t0) / self.dt;
        if u <= 0.0 {
            return (self.r[0], self.rt[0]);
        }
        if u >= (n - 1) as f64 {
            return (self.r[n - 1], self.rt[n - 1]);
        }
        let i = u.floor() as usize;
        let s = u - i as f64;
        if s < 1e-9 {
            return (self.r[i], self.rt[i]);
        }
        if s > 1.0 - 1e-9 {
            return (self.r[i + 1], self.rt[i + 1]);
        }
        let h = self.dt;
        let (p0, p1, m0, m1) = (self.r[i], self.r[i + 1], self.rt[i] * h, self.rt[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let r = p0 * (2.0 * s3 - 3.0 * s2 + 1.0) + m0 * (s3 - 2.0 * s2 + s) + p1 * (3.0 * s2 - 2.0 * s3) + m1 * (s3 - s2);
        let d = p0 * (6.0 * s2 - 6.0 * s) + m0 * (3.0 * s2 - 4.0 * s + 1.0) + p1 * (6.0 * s - 6.0 * s2) + m1 * (3.0 * s2 - 2.0 * s);
        (r, d / h)
    }
}

type SignalFn = Arc<dyn Fn(f64) -> (Vec3, Vec3) + Send + Sync>;

/// Dirichlet drive of a controlled end, as the perturbation `(r, r_t)`.
#[derive(Clone)]
pub enum Drive {
    Sampled(SampledSignal),
    Function(SignalFn),
}

impl fmt::Debug for Drive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drive::Sampled(s) => f.debug_tuple("Sampled").field(&s.r.len()).finish(),
            Drive::Function(_) => f.write_str("Function"),
        }
    }
}

impl Drive {
    pub fn function(f: impl Fn(f64) -> (Vec3, Vec3) + Send + Sync + 'static) -> Self {
        Drive::Function(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> (Vec3, Vec3) {
        match self {
            Drive::Sampled(s) => s.eval(t),
            Drive::Function(f) => f(t),
        }
    }

    /// `tau -> (r(t_end - tau), -r_t(t_end - tau))`.
    pub fn reversed(&self, t_end: f64) -> Drive {
        match self {
            Drive::Sampled(s) => {
                let n = s.r.len();
                Drive::Sampled(SampledSignal {
                    t0: t_end - (s.t0 + (n - 1) as f64 * s.dt),
                    dt: s.dt,
                    r: s.r.iter().rev().copied().collect(),
                    rt: s.rt.iter().rev().map(|v| -v).collect(),
                })
            }
            Drive::Function(f) => {
                let f = f.clone();
                Drive::function(move |tau| {
                    let (r, rt) = f(t_end - tau);
                    (r, -rt)
                })
            }
        }
    }
}

/// Drives keyed by string index; controlled ends without an entry are held.
pub type Drives = BTreeMap<usize, Drive>;

#[derive(Debug, Clone)]
pub struct SimResult {
    pub grid: Grid,
    /// Per string, the traces at `x = 0` and `x = L`.
    pub traces: Vec<[TraceRecord; 2]>,
    pub snapshots: Vec<State>,
    pub final_state: State,
    /// `(t, E)` pairs.
    pub energy: Vec<(f64, f64)>,
}

struct Outgoing {
    frame: CharacteristicFrame,
    xi: Vec3,
}

impl Outgoing {
    fn strain(&self, end: End, q: &Vec3) -> Vec3 {
        match end {
            End::Start => self.frame.strain_from_minus(&self.xi, q),
            End::Finish => self.frame.strain_from_plus(&self.xi, q),
        }
    }
}

fn stretch_error(string: usize, index: usize, t: f64, s: f64) -> SolverError {
    if s.is_finite() {
        SolverError::Stretch { string, index, t, stretch: s }
    } else {
        SolverError::NonFinite { string, index, t }
    }
}

/// Value at the new time level of the mode leaving through `end`, traced back
/// along its characteristic and interpolated quadratically.
fn trace_outgoing(m: &StringMedium, s: &StringState, end: End, dt: f64) -> Result<Outgoing, SolverError> {
    let (j0, dir): (usize, isize) = match end {
        End::Start => (0, 1),
        End::Finish => (m.n, -1),
    };
    let frame = m.frame(j0, &s.p[j0])?;
    let xi_at = |k: isize| {
        let j = (j0 as isize + dir * k) as usize;
        match end {
            End::Start => frame.xi_minus(&s.p[j], &s.q[j]),
            End::Finish => frame.xi_plus(&s.p[j], &s.q[j]),
        }
    };
    let (f0, f1, f2) = (xi_at(0), xi_at(1), xi_at(2));
    let mut xi = Vec3::zeros();
    for c in 0..3 {
        let a = frame.mu[c] * dt / m.dx;
        xi[c] = f0[c] * 0.5 * (a - 1.0) * (a - 2.0) + f1[c] * a * (2.0 - a) + f2[c] * 0.5 * a * (a - 1.0);
    }
    Ok(Outgoing { frame, xi })
}

/// Richtmyer step on nodes `1..n`; end nodes are copied and fixed later.
fn advance_interior(m: &StringMedium, s: &StringState, dt: f64, t: f64, cfl: f64) -> Result<StringState, SolverError> {
    let n = m.n;
    let lam = dt / m.dx;
    let mut fnode = Vec::with_capacity(n + 1);
    let mut ratio: f64 = 0.0;
    for j in 0..=n {
        fnode.push(m.force_at(j, &s.p[j]).map_err(|st| stretch_error(m.id, j, t, st))?);
        let (m1, m2) = m.law.speeds(m.rho, (m.rex[j] + s.p[j]).norm());
        ratio = ratio.max(m1.max(m2) * lam);
    }
    if ratio > cfl * (1.0 + 1e-9) {
        return Err(SolverError::Cfl { t, ratio, limit: cfl });
    }
    let mut qh = Vec::with_capacity(n);
    let mut fh = Vec::with_capacity(n);
    for j in 0..n {
        let ph = (s.p[j] + s.p[j + 1]) * 0.5 + (s.q[j + 1] - s.q[j]) * (0.5 * lam);
        qh.push((s.q[j] + s.q[j + 1]) * 0.5 + (fnode[j + 1] - fnode[j]) * (0.5 * lam / m.rho));
        fh.push(force(&m.law, &m.rex_mid[j], &m.g0_mid[j], &ph).map_err(|st| stretch_error(m.id, j, t, st))?);
    }
    let mut out = s.clone();
    for j in 1..n {
        out.p[j] = s.p[j] + (qh[j] - qh[j - 1]) * lam;
        out.q[j] = s.q[j] + (fh[j] - fh[j - 1]) * (lam / m.rho);
        out.r[j] = s.r[j] + (s.q[j] + out.q[j]) * (0.5 * dt);
    }
    Ok(out)
}

fn step(medium: &Medium, cur: &State, t_next: f64, dt: f64, drives: &Drives, policy: ExecPolicy) -> Result<State, SolverError> {
    let t = cur.t;
    let parts = map_range(policy, medium.strings.len(), |i| {
        let m = &medium.strings[i];
        let s = &cur.strings[i];
        let out = [trace_outgoing(m, s, End::Start, dt)?, trace_outgoing(m, s, End::Finish, dt)?];
        Ok((advance_interior(m, s, dt, t, medium.cfl)?, out))
    });
    let mut strings = Vec::with_capacity(parts.len());
    let mut outgoing = Vec::with_capacity(parts.len());
    for p in parts {
        let (s, o) = p?;
        strings.push(s);
        outgoing.push(o);
    }
    for (i, m) in medium.strings.iter().enumerate() {
        for end in [End::Start, End::Finish] {
            let k = m.end_index(end);
            let (r, q) = match m.roles[end as usize] {
                EndRole::Junction { .. } => continue,
                EndRole::Clamped => (cur.strings[i].r[k], Vec3::zeros()),
                EndRole::Controlled => match drives.get(&i) {
                    Some(d) => d.eval(t_next),
                    None => (cur.strings[i].r[k], Vec3::zeros()),
                },
            };
            let s = &mut strings[i];
            s.r[k] = r;
            s.q[k] = q;
            s.p[k] = outgoing[i][end as usize].strain(end, &q);
        }
    }
    for jn in &medium.junctions {
        let d = jn.members.len();
        let idx: Vec<(usize, End, usize)> = jn.members.iter().map(|&(i, end)| (i, end, medium.strings[i].end_index(end))).collect();
        let r0: Vec<Vec3> = idx.iter().map(|&(i, _, k)| cur.strings[i].r[k]).collect();
        let v0: Vec<Vec3> = idx.iter().map(|&(i, _, k)| cur.strings[i].q[k]).collect();
        let accel = |r: &[Vec3], p: &[Vec3]| -> Result<Vec<Vec3>, SolverError> {
            (0..d)
                .map(|a| {
                    let (i, end, k) = idx[a];
                    let f = medium.strings[i].force_at(k, &p[a]).map_err(|s| stretch_error(medium.strings[i].id, k, t, s))?;
                    let lr: Vec3 = (0..d).map(|b| r[b] * jn.lap[a][b]).sum();
                    Ok((-f * end.epsilon() - lr * jn.stiffness) / jn.masses[a])
                })
                .collect()
        };
        let p0: Vec<Vec3> = idx.iter().map(|&(i, _, k)| cur.strings[i].p[k]).collect();
        let a0 = accel(&r0, &p0)?;
        let rs: Vec<Vec3> = (0..d).map(|a| r0[a] + v0[a] * dt).collect();
        let vs: Vec<Vec3> = (0..d).map(|a| v0[a] + a0[a] * dt).collect();
        let ps: Vec<Vec3> = (0..d).map(|a| outgoing[idx[a].0][idx[a].1 as usize].strain(idx[a].1, &vs[a])).collect();
        let a1 = accel(&rs, &ps)?;
        for a in 0..d {
            let (i, end, k) = idx[a];
            let v = v0[a] + (a0[a] + a1[a]) * (0.5 * dt);
            let s = &mut strings[i];
            s.q[k] = v;
            s.r[k] = r0[a] + (v0[a] + v) * (0.5 * dt);
            s.p[k] = outgoing[i][end as usize].strain(end, &v);
        }
    }
    Ok(State { t: t_next, strings })
}

fn record(traces: &mut [[TraceRecord; 2]], medium: &Medium, s: &State) {
    for (i, m) in medium.strings.iter().enumerate() {
        for end in [End::Start, End::Finish] {
            let k = m.end_index(end);
            let st = &s.strings[i];
            traces[i][end as usize].push(st.r[k], st.q[k], st.p[k]);
        }
    }
}

/// Integrates from `initial` (at `grid.t0`) over `grid`.
pub fn simulate_forward(
    medium: &Medium,
    initial: &State,
    drives: &Drives,
    grid: Grid,
    cfg: &SolverConfig,
) -> Result<SimResult, SolverError> {
    if initial.strings.len() != medium.strings.len() || initial.strings.iter().zip(&medium.strings).any(|(s, m)| s.p.len() != m.n + 1) {
        return Err(SolverError::Config("initial state does not match the medium".into()));
    }
    medium.check_stiffness(grid.dt)?;
    let mut traces: Vec<[TraceRecord; 2]> = medium
        .strings
        .iter()
        .map(|m| {
            [End::Start, End::Finish].map(|e| {
                let mut tr = TraceRecord::empty(m.id, e, grid.t0, grid.dt);
                tr.order = 2;
                tr
            })
        })
        .collect();
    let mut cur = initial.clone();
    cur.t = grid.t0;
    record(&mut traces, medium, &cur);
    let mut snapshots = vec![cur.clone()];
    let mut energy = Vec::new();
    if cfg.energy_stride > 0 {
        energy.push((cur.t, total_energy(medium, &cur)));
    }
    for k in 0..grid.steps {
        cur = step(medium, &cur, grid.t(k + 1), grid.dt, drives, cfg.policy)?;
        record(&mut traces, medium, &cur);
        let done = k + 1 == grid.steps;
        if cfg.snapshot_stride > 0 && (k + 1) % cfg.snapshot_stride == 0 && !done {
            snapshots.push(cur.clone());
        }
        if cfg.energy_stride > 0 && ((k + 1) % cfg.energy_stride == 0 || done) {
            energy.push((cur.t, total_energy(medium, &cur)));
        }
    }
    snapshots.push(cur.clone());
    Ok(SimResult { grid, traces, snapshots, final_state: cur, energy })
}

/// Integrates backward from `final_state` at `grid.t_end()` down to `grid.t0`
/// by solving the time-reversed problem forward; results are indexed in
/// original time.
pub fn simulate_backward(
    medium: &Medium,
    final_state: &State,
    drives: &Drives,
    grid: Grid,
    cfg: &SolverConfig,
) -> Result<SimResult, SolverError> {
    let t_end = grid.t_end();
    let rev_drives: Drives = drives.iter().map(|(k, d)| (*k, d.reversed(t_end))).collect();
    let rev_grid = Grid { t0: 0.0, dt: grid.dt, steps: grid.steps };
    let res = simulate_forward(medium, &final_state.reversed(0.0), &rev_drives, rev_grid, cfg)?;
    let traces = res.traces.iter().map(|pair| pair.clone().map(|tr| tr.time_reversed(t_end))).collect();
    let snapshots = res.snapshots.iter().rev().map(|s| s.reversed(t_end - s.t)).collect();
    let energy = res.energy.iter().rev().map(|&(t, e)| (t_end - t, e)).collect();
    let initial = res.final_state.reversed(grid.t0);
    Ok(SimResult { grid, traces, snapshots, final_state: initial, energy })
}

/// `max |D_x r - p|` with second-order differences.
pub fn consistency_defect(medium: &Medium, state: &State) -> f64 {
    medium
        .strings
        .iter()
        .zip(&state.strings)
        .map(|(m, s)| (1..m.n).map(|j| ((s.r[j + 1] - s.r[j - 1]) / (2.0 * m.dx) - s.p[j]).norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompatibilityReport {
    pub entries: Vec<(String, f64)>,
}

impl CompatibilityReport {
    pub fn max(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

/// One-sided second-order `d/dx` of a nodal channel at `end`.
fn end_derivative(vals: &[Vec3], end: End, dx: f64) -> Vec3 {
    let n = vals.len() - 1;
    match end {
        End::Start => (vals[0] * -3.0 + vals[1] * 4.0 - vals[2]) / (2.0 * dx),
        End::Finish => (vals[n] * 3.0 - vals[n - 1] * 4.0 + vals[n - 2]) / (2.0 * dx),
    }
}

/// Residuals of the compatibility conditions at `t = initial.t`: matching of
/// position, velocity and acceleration at simple nodes, and the junction
/// equation together with its time derivative at multiple nodes.
pub fn check_compatibility(medium: &Medium, initial: &State, drives: &Drives) -> CompatibilityReport {
    let mut rep = CompatibilityReport::default();
    let t0 = initial.t;
    let mut pde = Vec::new();
    for (i, m) in medium.strings.iter().enumerate() {
        let s = &initial.strings[i];
        let f: Vec<Vec3> = (0..=m.n).map(|j| m.force_at(j, &s.p[j]).unwrap_or_else(|_| Vec3::repeat(f64::NAN))).collect();
        // d/dt of the flux: G_v(v) q_x
        let qx = crate::numerics::derivative(&s.q, m.dx, 1, 2);
        let df: Vec<Vec3> = (0..=m.n)
            .map(|j| {
                let jac = crate::material::stress_jacobian(&m.law, &(m.rex[j] + s.p[j])).unwrap_or_else(|_| crate::Mat3::repeat(f64::NAN));
                jac * qx[j]
            })
            .collect();
        let mut per_end = Vec::new();
        for end in [End::Start, End::Finish] {
            let k = m.end_index(end);
            let acc = end_derivative(&f, end, m.dx) / m.rho;
            let jerk = end_derivative(&df, end, m.dx) / m.rho;
            per_end.push((f[k], df[k], acc, jerk));
            match m.roles[end as usize] {
                EndRole::Clamped => {
                    rep.entries.push((format!("string {} {:?} position", m.id, end), s.r[k].norm()));
                    rep.entries.push((format!("string {} {:?} velocity", m.id, end), s.q[k].norm()));
                    rep.entries.push((format!("string {} {:?} acceleration", m.id, end), acc.norm()));
                }
                EndRole::Controlled => {
                    let (u, ut) = drives.get(&i).map(|d| d.eval(t0)).unwrap_or((s.r[k], Vec3::zeros()));
                    let h = 1e-5;
                    let utt = drives.get(&i).map(|d| (d.eval(t0 + h).1 - d.eval(t0).1) / h).unwrap_or_else(Vec3::zeros);
                    rep.entries.push((format!("string {} {:?} position", m.id, end), (u - s.r[k]).norm()));
                    rep.entries.push((format!("string {} {:?} velocity", m.id, end), (ut - s.q[k]).norm()));
                    rep.entries.push((format!("string {} {:?} acceleration", m.id, end), (utt - acc).norm()));
                }
                EndRole::Junction { .. } => {}
            }
        }
        pde.push(per_end);
    }
    for jn in &medium.junctions {
        let d = jn.members.len();
        for a in 0..d {
            let (i, end) = jn.members[a];
            let (f, df, acc, jerk) = pde[i][end as usize];
            let mut lr = Vec3::zeros();
            let mut lq = Vec3::zeros();
            for b in 0..d {
                let (ib, eb) = jn.members[b];
                let kb = medium.strings[ib].end_index(eb);
                lr += initial.strings[ib].r[kb] * jn.lap[a][b];
                lq += initial.strings[ib].q[kb] * jn.lap[a][b];
            }
            let r0 = acc * jn.masses[a] + f * end.epsilon() + lr * jn.stiffness;
            let r1 = jerk * jn.masses[a] + df * end.epsilon() + lq * jn.stiffness;
            let id = medium.strings[i].id;
            rep.entries.push((format!("junction {} string {id} order 0", jn.node), r0.norm()));
            rep.entries.push((format!("junction {} string {id} order 1", jn.node), r1.norm()));
        }
    }
    rep
}
