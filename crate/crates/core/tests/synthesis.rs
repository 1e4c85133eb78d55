mod common;

use common::*;
use stringnet::control::*;
use stringnet::equilibrium::{star_affine_equilibrium, symmetric_tangents, EquilibriumConfig, EquilibriumError};
use stringnet::exec::ExecPolicy;
use stringnet::network::NetworkSpec;
use stringnet::profile::{zero_data, NetworkData, StringData};
use stringnet::solver::{default_eps0, simulate_forward, traveling_times, Drives, Grid, Medium, SolverConfig, State, TraceRecord};
use stringnet::Vec3;

const AMP: f64 = 1e-3;

fn bump_data() -> StringData {
    StringData { r: bump(Vec3::new(0.0, 0.0, AMP), 0.5, 0.4), rt: bump(Vec3::new(AMP, 0.0, 0.0), 0.5, 0.4) }
}

fn problem(cells: usize, edges: Option<Vec<(usize, usize)>>, factor: f64) -> ControlProblem {
    let (spec, eq) = star(3, edges);
    let d = bump_data();
    let initial = data_on(3, 1, d.clone());
    let target = data_on(3, 2, StringData { r: d.r.scaled(-1.0), rt: d.rt });
    let t_bar = traveling_times(&spec, &eq, default_eps0(&spec, &eq)).unwrap().t_bar;
    ControlProblem::new(spec, eq, initial, target, factor * t_bar, SolverConfig::with_cells(cells))
}

fn replay(p: &ControlProblem, controls: &ControlSet) -> VerificationReport {
    verify_controls(&p.spec, &p.eq, &p.solver, &p.initial, &p.target, controls).unwrap().0
}

fn worst(r: &VerificationReport) -> f64 {
    r.max_terminal_error_r.max(r.max_terminal_error_rt)
}

/// Hookean stress in closed form, `h (1 - 1/|v|) v`.
fn g(v: &Vec3) -> Vec3 {
    v * (1.0 - 1.0 / v.norm())
}

/// Junction equations by direct substitution with the five-point second difference.
fn substituted_residual(spec: &NetworkSpec, eq: &EquilibriumConfig, traces: &[TraceRecord]) -> f64 {
    let NodeKindRef { lap, masses, kappa } = hub(spec);
    let n = traces.len();
    let dt = traces[0].dt;
    let mut worst: f64 = 0.0;
    for k in 2..traces[0].len() - 2 {
        for a in 0..n {
            let r = &traces[a].r;
            let acc = (-r[k - 2] + r[k - 1] * 16.0 - r[k] * 30.0 + r[k + 1] * 16.0 - r[k + 2]) / (12.0 * dt * dt);
            let rex = eq.strings[a].strain(0.0);
            let f = g(&(rex + traces[a].rx[k])) - g(&rex);
            let lr: Vec3 = (0..n).map(|b| traces[b].r[k] * lap[a][b]).sum();
            worst = worst.max((acc * masses[a] - f + lr * kappa).norm());
        }
    }
    worst
}

struct NodeKindRef {
    lap: Vec<Vec<f64>>,
    masses: Vec<f64>,
    kappa: f64,
}

fn hub(spec: &NetworkSpec) -> NodeKindRef {
    let g = spec.hub_graph().unwrap();
    let n = g.size();
    let lap = (0..n)
        .map(|a| {
            (0..n).map(|b| if a == b { g.adjacency[a].iter().map(|&v| v as f64).sum() } else { -(g.adjacency[a][b] as f64) }).collect()
        })
        .collect();
    NodeKindRef { lap, masses: g.masses.clone(), kappa: g.stiffness }
}

#[test]
fn zero_problem_gives_zero_controls() {
    let (spec, eq) = star(3, None);
    let t_bar = traveling_times(&spec, &eq, default_eps0(&spec, &eq)).unwrap().t_bar;
    let p = ControlProblem::new(spec.clone(), eq.clone(), zero_data(3), zero_data(3), 2.2 * t_bar, SolverConfig::with_cells(100));
    let s = synthesize_local(&p).unwrap();
    assert_eq!(s.controls.max_perturbation(&spec, &eq), 0.0);
    assert!(s.controls.nodes.iter().all(|n| n.ut.iter().chain(&n.utt).all(|v| v.norm() == 0.0)));
    let r = replay(&p, &s.controls);
    assert_eq!(worst(&r), 0.0);
}

#[test]
fn full_graph_replay_converges() {
    let mut errs = Vec::new();
    for n in [200, 400] {
        let p = problem(n, None, 2.2);
        let s = synthesize_local(&p).unwrap();
        assert!(s.diagnostics.interface_residual <= 1e-8);
        let sub = substituted_residual(&p.spec, &p.eq, &s.junction_traces);
        assert!(sub <= 1e-8, "substituted residual {sub:e}");
        errs.push(worst(&replay(&p, &s.controls)));
    }
    assert!(errs[1] < errs[0] / 2.0, "{errs:?}");
    assert!(errs[1] <= 0.1 * AMP);
}

#[test]
fn free_extension_copies_traces_on_windows() {
    let p = problem(200, Some(vec![(0, 1), (1, 2)]), 2.2);
    let s = synthesize_local(&p).unwrap();
    let d = &s.diagnostics;
    assert_eq!(d.plan.variant, PlanVariant::DamagedCase1);
    assert_eq!(d.plan.pivot(), Some(1));
    assert_eq!(d.plan.components[0].free, vec![2]);
    let medium = Medium::new(&p.spec, &p.eq, &p.solver).unwrap();
    let k_f = (d.t_f / d.dt).round() as usize;
    let fwd = simulate_forward(
        &medium,
        &State::from_data(&medium, &p.initial, 0.0),
        &Drives::new(),
        Grid { t0: 0.0, dt: d.dt, steps: k_f },
        &p.solver,
    )
    .unwrap();
    let k_star = (d.t_star / d.dt + 1e-9).floor() as usize;
    let free = &s.junction_traces[2];
    for k in 0..=k_star {
        assert_eq!(free.r[k], fwd.traces[2][0].r[k]);
    }
    let pivot = &s.junction_traces[1];
    let dev = (0..=k_star).map(|k| (pivot.r[k] - fwd.traces[1][0].r[k]).norm()).fold(0.0, f64::max);
    assert!(dev < 5e-3 * AMP, "{dev:e}");
}

#[test]
fn damaged_cases_synthesize() {
    for edges in [vec![(0, 1), (1, 2)], vec![(0, 1), (0, 2)]] {
        let p = problem(400, Some(edges.clone()), 2.2);
        let s = synthesize_local(&p).unwrap();
        assert!(s.diagnostics.interface_residual <= 1e-8);
        let e = worst(&replay(&p, &s.controls));
        assert!(e <= 0.1 * AMP, "{edges:?}: {e:e}");
    }
}

#[test]
fn orphan_component_is_infeasible() {
    let mut p = stringnet::network::StarParams::uniform(3);
    p.edges = vec![(1, 2)];
    let spec = p.build();
    match feasibility(&spec, &declared_controls(&spec)) {
        Feasibility::Infeasible(m) => assert!(m.contains("component {1} unreachable"), "{m}"),
        f => panic!("{f:?}"),
    }
}

#[test]
fn isolated_controlled_string_has_no_stretched_equilibrium() {
    let mut p = stringnet::network::StarParams::uniform(3);
    p.edges = vec![(0, 1)];
    let spec3 = p.build();
    let err = star_affine_equilibrium(&spec3, &symmetric_tangents(3, STRETCH), Vec3::zeros()).unwrap_err();
    assert!(matches!(err, EquilibriumError::Unbalanced(_)), "{err}");
}

#[test]
fn horizon_guard() {
    let p = problem(100, None, 1.9);
    assert!(matches!(synthesize_local(&p), Err(ControlError::Horizon { .. })));
    let p = problem(100, None, 2.05);
    synthesize_local(&p).unwrap();
}

#[test]
fn incompatible_data_is_refused() {
    let mut p = problem(100, None, 2.2);
    p.initial[1].r = bump(Vec3::new(0.0, 0.0, AMP), 0.9, 0.4);
    assert!(matches!(synthesize_local(&p), Err(ControlError::Compatibility { .. })));
}

#[test]
fn perturbed_controls_stay_bounded() {
    let p = problem(200, None, 2.2);
    let s = synthesize_local(&p).unwrap();
    let base = worst(&replay(&p, &s.controls));
    let mut c = s.controls.clone();
    for u in &mut c.nodes[0].u {
        *u += Vec3::new(0.0, 0.0, 1e-4);
    }
    let e = worst(&replay(&p, &c));
    assert!(e > 0.3e-4 && e <= 3.0e-4 + base, "{e:e}");
}

#[test]
fn policies_give_identical_controls() {
    let mut p = problem(100, None, 2.2);
    p.solver.policy = ExecPolicy::Sequential;
    let a = synthesize_local(&p).unwrap();
    p.solver.policy = ExecPolicy::Parallel;
    let b = synthesize_local(&p).unwrap();
    assert_eq!(a.controls, b.controls);
    assert_eq!(stringnet::io::controls_csv(&a.controls), stringnet::io::controls_csv(&b.controls));
}

fn leg(p: &ControlProblem, initial: NetworkData, target: NetworkData) -> Leg {
    Leg { eq: p.eq.clone(), initial, target, horizon: p.horizon }
}

#[test]
fn global_local_legs() {
    let p = problem(200, None, 2.2);
    let single = synthesize_local(&p).unwrap();
    let one = synthesize_global_local(&p.spec, &p.solver, &[leg(&p, p.initial.clone(), p.target.clone())]).unwrap();
    assert_eq!(one.controls, single.controls);

    let bound = worst(&replay(&p, &single.controls));
    let two =
        synthesize_global_local(&p.spec, &p.solver, &[leg(&p, p.initial.clone(), zero_data(3)), leg(&p, zero_data(3), p.target.clone())])
            .unwrap();
    let mut q = p.clone();
    q.horizon = 2.0 * p.horizon;
    let e = worst(&replay(&q, &two.controls));
    assert!(e <= 2.0 * bound, "{e:e} vs {bound:e}");

    let err =
        synthesize_global_local(&p.spec, &p.solver, &[leg(&p, p.initial.clone(), p.target.clone()), leg(&p, zero_data(3), zero_data(3))])
            .unwrap_err();
    assert!(matches!(err, ControlError::Seam { seam: 1, .. }), "{err}");
}
