//! Constructive control synthesis on a star: forward and backward solves,
//! bridging of the clamped-end trace, sidewise solve of the clamped string,
//! junction transfer and sidewise solves of the controlled strings.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::equilibrium::EquilibriumConfig;
use crate::exec::{join, map_range};
use crate::network::{End, NetworkSpec, Topology};
use crate::numerics::derivative;
use crate::profile::NetworkData;
use crate::solver::{
    check_compatibility, default_eps0, sidewise_solve, simulate_backward, simulate_forward, traveling_times, Drive, Drives, EndRole, Grid,
    Medium, SampledSignal, SidewiseInput, SidewiseResult, SolverConfig, State, TraceRecord, TravelTimes,
};
use crate::Vec3;

use super::feasibility::{declared_controls, feasibility, Feasibility, TransferPlan};
use super::transfer::{connect_traces, interface_residual, junction_transfer, TransferInput};
use super::ControlError;

/// Order of the bridge that closes the clamped string's strain trace.
const ROOT_BRIDGE_ORDER: usize = 4;
const STATIONS: usize = 16;

#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub spec: NetworkSpec,
    pub eq: EquilibriumConfig,
    pub initial: NetworkData,
    pub target: NetworkData,
    pub horizon: f64,
    pub solver: SolverConfig,
    /// Controlled simple node ids; `None` uses the nodes declared controlled.
    pub controls_at: Option<BTreeSet<usize>>,
    /// Data smallness bound; `None` selects `1e-3` times the stretch margin.
    pub c0: Option<f64>,
    pub tol_compat: f64,
    /// Auxiliary boundary data for the forward and backward solves.
    pub aux_forward: Drives,
    pub aux_backward: Drives,
    /// Forces the time step (used to align consecutive legs).
    pub dt: Option<f64>,
}

impl ControlProblem {
    pub fn new(
        spec: NetworkSpec,
        eq: EquilibriumConfig,
        initial: NetworkData,
        target: NetworkData,
        horizon: f64,
        solver: SolverConfig,
    ) -> Self {
        ControlProblem {
            spec,
            eq,
            initial,
            target,
            horizon,
            solver,
            controls_at: None,
            c0: None,
            tol_compat: 1e-6,
            aux_forward: Drives::new(),
            aux_backward: Drives::new(),
            dt: None,
        }
    }
}

/// Absolute Dirichlet controls `U`, `U_t`, `U_tt` at one simple node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeControl {
    pub node: usize,
    pub string: usize,
    pub u: Vec<Vec3>,
    pub ut: Vec<Vec3>,
    pub utt: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    pub t0: f64,
    pub dt: f64,
    pub nodes: Vec<NodeControl>,
    pub t_bar: f64,
    pub t_star: f64,
    pub cells: usize,
}

impl ControlSet {
    pub fn len(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.u.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Drives as perturbations of `eq`, keyed by string index.
    pub fn drives(&self, spec: &NetworkSpec, eq: &EquilibriumConfig) -> Drives {
        self.nodes
            .iter()
            .map(|n| {
                let i = spec.string_index(n.string).unwrap();
                let end = if spec.strings[i].node_at_l == n.node { End::Finish } else { End::Start };
                let base = eq.end_position(spec, i, end);
                let sig = SampledSignal { t0: self.t0, dt: self.dt, r: n.u.iter().map(|u| u - base).collect(), rt: n.ut.clone() };
                (i, Drive::Sampled(sig))
            })
            .collect()
    }

    /// Largest deviation of `U` from its equilibrium value.
    pub fn max_perturbation(&self, spec: &NetworkSpec, eq: &EquilibriumConfig) -> f64 {
        let d = self.drives(spec, eq);
        d.values()
            .flat_map(|dr| match dr {
                Drive::Sampled(s) => s.r.iter().map(|v| v.norm()).collect::<Vec<_>>(),
                Drive::Function(_) => Vec::new(),
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub plan: TransferPlan,
    pub times: TravelTimes,
    pub dt: f64,
    pub steps: usize,
    /// End of the forward window and start of the backward one (`T - t_f`).
    pub t_f: f64,
    pub t_star: f64,
    pub interface_residual: f64,
    pub interface_residual_time: f64,
    /// Per string id: max deviation of the junction trace from the forward
    /// trace on `[0, T*]` and from the backward trace on `[T - T*, T]`.
    pub trace_mismatch: Vec<(usize, f64, f64)>,
    /// Per string id: max `|r_t - psi|` on `t = 0` and `|r_t - Psi|` on `t = T`
    /// over the sidewise stations.
    pub rail_velocity_mismatch: Vec<(usize, f64, f64)>,
    /// Per string id: max over median of fourth differences of the junction position.
    pub smoothness: Vec<(usize, f64)>,
    pub compat_start: f64,
    pub compat_end: f64,
    pub advisories: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub controls: ControlSet,
    /// Sidewise solutions per string index.
    pub fields: Vec<SidewiseResult>,
    /// Junction traces per string index.
    pub junction_traces: Vec<TraceRecord>,
    pub diagnostics: Diagnostics,
}

fn end_with_role(medium: &Medium, i: usize, pred: impl Fn(EndRole) -> bool) -> Option<End> {
    [End::Start, End::Finish].into_iter().find(|&e| pred(medium.strings[i].roles[e as usize]))
}

fn sup_data(data: &NetworkData, spec: &NetworkSpec) -> f64 {
    data.iter().zip(&spec.strings).map(|(d, s)| d.r.sup_norm(s.length, 256).max(d.rt.sup_norm(s.length, 256))).fold(0.0, f64::max)
}

fn fourth_difference_ratio(r: &[Vec3]) -> f64 {
    if r.len() < 6 {
        return 0.0;
    }
    let mut d: Vec<f64> = (0..r.len() - 4).map(|k| (r[k] - r[k + 1] * 4.0 + r[k + 2] * 6.0 - r[k + 3] * 4.0 + r[k + 4]).norm()).collect();
    let max = d.iter().copied().fold(0.0, f64::max);
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = d[d.len() / 2];
    if max == 0.0 {
        0.0
    } else {
        max / med.max(1e-300)
    }
}

/// Steps 1 to 5 of the construction. Refuses `T <= 2 T_bar` before solving.
pub fn synthesize_local(problem: &ControlProblem) -> Result<Synthesis, ControlError> {
    let spec = &problem.spec;
    let eq = &problem.eq;
    let cfg = &problem.solver;
    if spec.topology != Topology::Star {
        return Err(ControlError::NotStar);
    }
    if problem.initial.len() != spec.strings.len() || problem.target.len() != spec.strings.len() {
        return Err(ControlError::Data("initial and target data need one entry per string".into()));
    }
    let controls_at = problem.controls_at.clone().unwrap_or_else(|| declared_controls(spec));
    let plan = match feasibility(spec, &controls_at) {
        Feasibility::Feasible(p) => p,
        Feasibility::Infeasible(reason) => return Err(ControlError::Infeasible(reason)),
    };
    let eps0 = cfg.eps0.unwrap_or_else(|| default_eps0(spec, eq));
    let times = traveling_times(spec, eq, eps0).map_err(|e| ControlError::Solver { stage: "traveling times".into(), source: e })?;
    let t = problem.horizon;
    if !(t > times.t_min_control) {
        return Err(ControlError::Horizon { horizon: t, t_bar: times.t_bar });
    }
    let root = plan.root;
    let medium = Medium::new(spec, eq, cfg).map_err(|e| ControlError::Solver { stage: "setup".into(), source: e })?;
    let dt_max = medium.max_dt();
    let (dt, steps) = match problem.dt {
        Some(dt) if dt <= dt_max * (1.0 + 1e-12) => (dt, (t / dt - 1e-9).ceil() as usize),
        Some(dt) => return Err(ControlError::Data(format!("forced time step {dt} exceeds the CFL limit {dt_max}"))),
        None => {
            let g = Grid::covering(0.0, t, dt_max);
            (g.dt, g.steps)
        }
    };
    let t = steps as f64 * dt;
    let t_f_target = times.t_bar + 0.25 * (t - 2.0 * times.t_bar);
    let k_f = (t_f_target / dt - 1e-9).ceil() as usize;
    if steps < 2 * k_f + ROOT_BRIDGE_ORDER + 1 {
        return Err(ControlError::Gap(format!("horizon {t} leaves no room to bridge the forward and backward windows")));
    }
    let t_f = k_f as f64 * dt;
    let t_star = t_f - times.per_string[root];
    for (i, ti) in times.per_string.iter().enumerate() {
        if i != root && !(t_star - ti > 0.0) {
            return Err(ControlError::TStar { string: spec.strings[i].id, t_star, t_i: *ti });
        }
    }
    let k_star = (t_star / dt + 1e-9).floor() as usize;

    let ic = State::from_data(&medium, &problem.initial, 0.0);
    let fc = State::from_data(&medium, &problem.target, t);
    let compat_start = check_compatibility(&medium, &ic, &problem.aux_forward).max();
    let compat_end = check_compatibility(&medium, &fc, &problem.aux_backward).max();
    for (at, r) in [(0.0, compat_start), (t, compat_end)] {
        if !(r <= problem.tol_compat) {
            return Err(ControlError::Compatibility { at, residual: r, tol: problem.tol_compat });
        }
    }
    let mut advisories = Vec::new();
    let c0 = problem.c0.unwrap_or(1e-3 * eq.stretch_margin(spec));
    let amp = sup_data(&problem.initial, spec).max(sup_data(&problem.target, spec));
    if amp > c0 {
        advisories.push(format!("data amplitude {amp:.3e} exceeds c0 = {c0:.3e}; the stretched-regime guards remain active"));
    }
    {
        let s = &spec.strings[root];
        let n = medium.strings[root].n;
        let h = s.length / n as f64;
        let samples: Vec<Vec3> = (0..=n).map(|j| problem.initial[root].r.value(j as f64 * h)).collect();
        let d4 = derivative(&samples, h, 4, 2).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !d4.is_finite() {
            advisories.push(format!("string {}: fourth derivative of the initial position is not bounded", s.id));
        }
    }

    // Steps 1 and 2.
    let fgrid = Grid { t0: 0.0, dt, steps: k_f };
    let bgrid = Grid { t0: (steps - k_f) as f64 * dt, dt, steps: k_f };
    let run_cfg = SolverConfig { snapshot_stride: 0, energy_stride: 0, ..cfg.clone() };
    let (fwd, bwd) = join(
        cfg.policy,
        || simulate_forward(&medium, &ic, &problem.aux_forward, fgrid, &run_cfg),
        || simulate_backward(&medium, &fc, &problem.aux_backward, bgrid, &run_cfg),
    );
    let fwd = fwd.map_err(|e| ControlError::Solver { stage: "forward".into(), source: e })?;
    let bwd = bwd.map_err(|e| ControlError::Solver { stage: "backward".into(), source: e })?;

    // Step 3: bridge the clamped-end trace and march the clamped string.
    let clamped_end = end_with_role(&medium, root, |r| r == EndRole::Clamped)
        .ok_or_else(|| ControlError::Data("root string has no clamped end".into()))?;
    let junction_end = |i: usize| end_with_role(&medium, i, |r| matches!(r, EndRole::Junction { .. })).unwrap();
    let a_full =
        connect_traces(&fwd.traces[root][clamped_end as usize], &bwd.traces[root][clamped_end as usize], steps + 1, ROOT_BRIDGE_ORDER)?;
    let side = |i: usize, from: End, cauchy: &TraceRecord| {
        sidewise_solve(
            spec,
            eq,
            &SidewiseInput {
                string: i,
                from,
                cauchy,
                rail_start: &problem.initial[i].r,
                rail_end: &problem.target[i].r,
                cfl: cfg.cfl,
                speed_floor: medium.strings[i].speed_min,
                stations: STATIONS,
            },
        )
        .map_err(|e| ControlError::Solver { stage: format!("sidewise string {}", spec.strings[i].id), source: e })
    };
    let root_field = side(root, clamped_end, &a_full)?;

    // Step 4: junction transfer.
    let forward_j: Vec<TraceRecord> = (0..spec.strings.len()).map(|i| fwd.traces[i][junction_end(i) as usize].clone()).collect();
    let backward_j: Vec<TraceRecord> = (0..spec.strings.len()).map(|i| bwd.traces[i][junction_end(i) as usize].clone()).collect();
    let junction_traces = junction_transfer(&TransferInput {
        spec,
        eq,
        plan: &plan,
        root: &root_field.far,
        forward: &forward_j,
        backward: &backward_j,
        k_star,
        total: steps + 1,
    })?;
    let (interface, interface_time) = interface_residual(spec, eq, &junction_traces)?;

    // Step 5: march the controlled strings from the junction.
    let others: Vec<usize> = (0..spec.strings.len()).filter(|&i| i != root).collect();
    let solved = map_range(cfg.policy, others.len(), |k| {
        let i = others[k];
        side(i, junction_end(i), &junction_traces[i])
    });
    let mut fields: Vec<Option<SidewiseResult>> = vec![None; spec.strings.len()];
    fields[root] = Some(root_field);
    for (k, r) in solved.into_iter().enumerate() {
        fields[others[k]] = Some(r?);
    }
    let fields: Vec<SidewiseResult> = fields.into_iter().map(|f| f.unwrap()).collect();

    let mut nodes = Vec::new();
    for &i in &others {
        if !plan.controlled.contains(&i) {
            continue;
        }
        let s = &spec.strings[i];
        let far = &fields[i].far;
        let end = far.end;
        let base = eq.end_position(spec, i, end);
        nodes.push(NodeControl {
            node: s.node_at(end),
            string: s.id,
            u: far.r.iter().map(|r| base + r).collect(),
            ut: far.rt.clone(),
            utt: derivative(&far.rt, dt, 1, 4),
        });
    }
    nodes.sort_by_key(|n| n.node);

    let mut trace_mismatch = Vec::new();
    for &i in &others {
        let b = &junction_traces[i];
        let f = &forward_j[i];
        let bb = &backward_j[i];
        let off = steps - k_f;
        let d = |x: &Vec3, y: &Vec3| (x - y).norm();
        let early = (0..=k_star).map(|k| d(&b.r[k], &f.r[k]).max(d(&b.rx[k], &f.rx[k]))).fold(0.0, f64::max);
        let late = (steps - k_star..=steps).map(|k| d(&b.r[k], &bb.r[k - off]).max(d(&b.rx[k], &bb.rx[k - off]))).fold(0.0, f64::max);
        trace_mismatch.push((spec.strings[i].id, early, late));
    }
    let rail_velocity_mismatch = fields
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let (mut a, mut b) = (0.0f64, 0.0f64);
            for st in &f.stations {
                a = a.max((st.q[0] - problem.initial[i].rt.value(st.x)).norm());
                b = b.max((st.q[steps] - problem.target[i].rt.value(st.x)).norm());
            }
            (spec.strings[i].id, a, b)
        })
        .collect();
    let smoothness = junction_traces.iter().map(|tr| (tr.string, fourth_difference_ratio(&tr.r))).collect();

    let controls = ControlSet { t0: 0.0, dt, nodes, t_bar: times.t_bar, t_star, cells: cfg.cells };
    Ok(Synthesis {
        controls,
        fields,
        junction_traces,
        diagnostics: Diagnostics {
            plan,
            times,
            dt,
            steps,
            t_f,
            t_star,
            interface_residual: interface,
            interface_residual_time: interface_time,
            trace_mismatch,
            rail_velocity_mismatch,
            smoothness,
            compat_start,
            compat_end,
            advisories,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StringError {
    pub string: usize,
    pub terminal_error_r: f64,
    pub terminal_error_rt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub horizon: f64,
    pub steps: usize,
    pub strings: Vec<StringError>,
    pub max_terminal_error_r: f64,
    pub max_terminal_error_rt: f64,
    /// Junction equation residual along the replay's own traces.
    pub replay_interface_residual: f64,
    /// Residual of the synthesized junction traces, when known.
    pub max_interface_residual: Option<f64>,
    pub energy_initial: f64,
    pub energy_final: f64,
    /// `(E(T) - E(0)) / E(0)`; with active controls this measures the energy
    /// exchanged through the boundary.
    pub energy_drift: f64,
}

/// Replays `controls` from the initial data and measures the terminal error.
pub fn verify_controls(
    spec: &NetworkSpec,
    eq: &EquilibriumConfig,
    solver: &SolverConfig,
    initial: &NetworkData,
    target: &NetworkData,
    controls: &ControlSet,
) -> Result<(VerificationReport, crate::solver::SimResult), ControlError> {
    let medium = Medium::new(spec, eq, solver).map_err(|e| ControlError::Solver { stage: "replay setup".into(), source: e })?;
    let steps = controls.len().saturating_sub(1).max(1);
    let grid = Grid { t0: controls.t0, dt: controls.dt, steps };
    let cfg = SolverConfig { energy_stride: (steps / 200).max(1), ..solver.clone() };
    let ic = State::from_data(&medium, initial, controls.t0);
    let drives = if controls.nodes.is_empty() { Drives::new() } else { controls.drives(spec, eq) };
    let res =
        simulate_forward(&medium, &ic, &drives, grid, &cfg).map_err(|e| ControlError::Solver { stage: "replay".into(), source: e })?;
    let errs = res.final_state.errors_against(&medium, target);
    let strings: Vec<StringError> = errs
        .iter()
        .enumerate()
        .map(|(i, &(r, rt))| StringError { string: spec.strings[i].id, terminal_error_r: r, terminal_error_rt: rt })
        .collect();
    let replay_interface_residual = if spec.topology == Topology::Star {
        let tr: Vec<TraceRecord> = (0..spec.strings.len())
            .map(|i| {
                let e = end_with_role(&medium, i, |r| matches!(r, EndRole::Junction { .. })).unwrap();
                res.traces[i][e as usize].clone()
            })
            .collect();
        interface_residual(spec, eq, &tr)?.0
    } else {
        0.0
    };
    let e0 = res.energy.first().map_or(0.0, |e| e.1);
    let e1 = res.energy.last().map_or(0.0, |e| e.1);
    let report = VerificationReport {
        horizon: grid.t_end() - grid.t0,
        steps,
        max_terminal_error_r: strings.iter().map(|s| s.terminal_error_r).fold(0.0, f64::max),
        max_terminal_error_rt: strings.iter().map(|s| s.terminal_error_rt).fold(0.0, f64::max),
        strings,
        replay_interface_residual,
        max_interface_residual: None,
        energy_initial: e0,
        energy_final: e1,
        energy_drift: if e0 > 0.0 { (e1 - e0) / e0 } else { e1 },
    };
    Ok((report, res))
}

/// One leg of a global-local path: data near `eq`, steered over `horizon`.
#[derive(Debug, Clone)]
pub struct Leg {
    pub eq: EquilibriumConfig,
    pub initial: NetworkData,
    pub target: NetworkData,
    pub horizon: f64,
}

#[derive(Debug, Clone)]
pub struct GlobalSynthesis {
    pub controls: ControlSet,
    pub legs: Vec<Synthesis>,
}

fn absolute_mismatch(spec: &NetworkSpec, a: (&EquilibriumConfig, &NetworkData), b: (&EquilibriumConfig, &NetworkData)) -> f64 {
    let mut m: f64 = 0.0;
    for (i, s) in spec.strings.iter().enumerate() {
        for k in 0..=256 {
            let x = s.length * k as f64 / 256.0;
            let ra = a.0.strings[i].position(x) + a.1[i].r.value(x);
            let rb = b.0.strings[i].position(x) + b.1[i].r.value(x);
            m = m.max((ra - rb).norm()).max((a.1[i].rt.value(x) - b.1[i].rt.value(x)).norm());
        }
    }
    m
}

/// Chains local syntheses along `legs` on a common time step and concatenates
/// the controls. Consecutive legs must meet in the same absolute state.
pub fn synthesize_global_local(spec: &NetworkSpec, solver: &SolverConfig, legs: &[Leg]) -> Result<GlobalSynthesis, ControlError> {
    if legs.is_empty() {
        return Err(ControlError::Data("no legs given".into()));
    }
    for k in 0..legs.len() - 1 {
        let mismatch = absolute_mismatch(spec, (&legs[k].eq, &legs[k].target), (&legs[k + 1].eq, &legs[k + 1].initial));
        if mismatch > 1e-12 {
            return Err(ControlError::Seam { seam: k + 1, mismatch });
        }
    }
    let mut dt = f64::INFINITY;
    for leg in legs {
        let m = Medium::new(spec, &leg.eq, solver).map_err(|e| ControlError::Solver { stage: "setup".into(), source: e })?;
        dt = dt.min(Grid::covering(0.0, leg.horizon, m.max_dt()).dt);
    }
    let mut out: Vec<Synthesis> = Vec::new();
    for (k, leg) in legs.iter().enumerate() {
        let mut p = ControlProblem::new(spec.clone(), leg.eq.clone(), leg.initial.clone(), leg.target.clone(), leg.horizon, solver.clone());
        p.dt = Some(dt);
        let s = synthesize_local(&p).map_err(|e| ControlError::Leg { leg: k, source: Box::new(e) })?;
        out.push(s);
    }
    let mut controls = out[0].controls.clone();
    for s in &out[1..] {
        for (a, b) in controls.nodes.iter_mut().zip(&s.controls.nodes) {
            a.u.extend_from_slice(&b.u[1..]);
            a.ut.extend_from_slice(&b.ut[1..]);
            a.utt.extend_from_slice(&b.utt[1..]);
        }
        controls.t_bar = controls.t_bar.max(s.controls.t_bar);
        controls.t_star = controls.t_star.min(s.controls.t_star);
    }
    Ok(GlobalSynthesis { controls, legs: out })
}
