mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stringnet::control::*;
use stringnet::equilibrium::{
    equilibrium_residual, shooting_equilibrium, star_affine_equilibrium, symmetric_tangents, zero_gravity_equilibrium, EquilibriumError,
};
use stringnet::material::{characteristic_frame, default_skew_axis, stress, stress_jacobian, MaterialLaw};
use stringnet::network::{
    laplacian, laplacian_int, laplacian_rank, End, NetworkSpec, NodeKind, NodeSpec, SpringGraph, StarParams, StringSpec, RANK_TOL,
};
use stringnet::profile::{Shape, StringData};
use stringnet::solver::*;
use stringnet::Vec3;

const AMP: f64 = 1e-3;

/// Outcome of one criterion: `Ok(detail)` passes, `Err(detail)` fails.
type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_strain(rng: &mut ChaCha8Rng) -> Vec3 {
    let s = rng.random_range(1.01..3.0);
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z) * s
}

fn c1_laplacians() -> Outcome {
    let graph = |edges: &[(usize, usize)]| SpringGraph::from_edges(4, edges, 1.0, vec![1.0; 4], (1..=4).map(|i| (i, End::Start)).collect());
    let cases: [(&str, Vec<(usize, usize)>, [[i64; 4]; 4], usize); 3] = [
        (
            "L_l",
            vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            [[3, -1, -1, -1], [-1, 3, -1, -1], [-1, -1, 3, -1], [-1, -1, -1, 3]],
            3,
        ),
        ("L_m", vec![(0, 1), (0, 2), (1, 3)], [[2, -1, -1, 0], [-1, 2, 0, -1], [-1, 0, 1, 0], [0, -1, 0, 1]], 3),
        ("L_r", vec![(0, 1), (2, 3)], [[1, -1, 0, 0], [-1, 1, 0, 0], [0, 0, 1, -1], [0, 0, -1, 1]], 2),
    ];
    let mut ranks = Vec::new();
    for (name, edges, printed, rank) in cases {
        let g = graph(&edges);
        let l = laplacian_int(&g);
        if l.iter().zip(&printed).any(|(a, b)| a.as_slice() != b.as_slice()) {
            return Err(format!("{name} entries differ: {l:?}"));
        }
        let r = laplacian_rank(&laplacian(&g), RANK_TOL).map_err(|e| e.to_string())?;
        if r != rank {
            return Err(format!("{name} rank {r}, expected {rank}"));
        }
        ranks.push(r);
    }
    Ok(format!("entries exact, ranks {ranks:?}"))
}

fn c2_characteristics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_frame, mut worst_fd): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let v = random_strain(&mut rng);
        let law = MaterialLaw::hookean(rng.random_range(0.2..5.0));
        let rho = rng.random_range(0.2..5.0);
        let gv = stress_jacobian(&law, &v).map_err(|e| e.to_string())?;
        let f = characteristic_frame(&law, rho, &v, &default_skew_axis(&v)).map_err(|e| e.to_string())?;
        worst_frame = worst_frame.max((gv / rho - f.reconstruct()).norm() / (gv / rho).norm());
        let d = 1e-6;
        for c in 0..3 {
            let mut e = Vec3::zeros();
            e[c] = d;
            let fd = (stress(&law, &(v + e)).unwrap() - stress(&law, &(v - e)).unwrap()) / (2.0 * d);
            worst_fd = worst_fd.max((fd - gv.column(c)).norm() / gv.norm());
        }
    }
    check(worst_frame <= 1e-10 && worst_fd <= 1e-6, format!("frame {worst_frame:.2e} (<= 1e-10), jacobian vs FD {worst_fd:.2e} (<= 1e-6)"))
}

fn c3_riemann() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let law = MaterialLaw::hookean(1.0);
    let mut worst: f64 = 0.0;
    let mut w = || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut rng2 = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..1000 {
        let v = random_strain(&mut rng2);
        let f = characteristic_frame(&law, 1.0, &v, &default_skew_axis(&v)).map_err(|e| e.to_string())?;
        let (w1, w2, w3) = (w(), w(), w());
        let xi = f.to_riemann(&w1, &w2, &w3);
        let (a, b, c) = f.from_riemann(&xi);
        worst = worst.max((a - w1).norm()).max((b - w2).norm()).max((c - w3).norm());
        let xi2 = f.to_riemann(&a, &b, &c);
        worst = worst.max((xi2.xi_plus - xi.xi_plus).norm()).max((xi2.xi_minus - xi.xi_minus).norm());
    }
    check(worst <= 1e-12, format!("max round-trip error {worst:.2e} (<= 1e-12)"))
}

fn odd_periodic(f: &Shape, x: f64, l: f64) -> Vec3 {
    let p = 2.0 * l;
    let y = x.rem_euclid(p);
    if y <= l {
        f.value(y)
    } else {
        -f.value(p - y)
    }
}

fn c4_dalembert() -> Outcome {
    let (spec, eq) = clamped_string();
    let amp = 1e-6;
    let shape = bump(Vec3::new(0.6, 0.8, 0.0) * amp, 0.5, 0.4);
    let cfg = SolverConfig { snapshot_stride: 10, ..SolverConfig::with_cells(400) };
    let medium = Medium::new(&spec, &eq, &cfg).map_err(|e| e.to_string())?;
    let init = State::from_data(&medium, &vec![StringData { r: shape.clone(), rt: Shape::Zero }], 0.0);
    // Hookean, |v| = 1.25: longitudinal speed 1, transverse sqrt(1 - 1/1.25)
    let ct = 0.2f64.sqrt();
    let grid = Grid::covering(0.0, 1.0 / ct, medium.max_dt());
    let res = simulate_forward(&medium, &init, &Drives::new(), grid, &cfg).map_err(|e| e.to_string())?;
    let speeds = [1.0, ct, ct];
    let m = &medium.strings[0];
    let mut err: f64 = 0.0;
    for s in &res.snapshots {
        for j in 0..=m.n {
            let x = m.x(j);
            let mut exact = Vec3::zeros();
            for c in 0..3 {
                exact[c] = 0.5 * (odd_periodic(&shape, x - speeds[c] * s.t, 1.0)[c] + odd_periodic(&shape, x + speeds[c] * s.t, 1.0)[c]);
            }
            err = err.max((s.strings[0].r[j] - exact).norm());
        }
    }
    let rel = err / amp;
    check(rel <= 1e-3, format!("N=400 max error {rel:.2e} x amplitude (<= 1e-3) over {} snapshots", res.snapshots.len()))
}

/// Star with every outer node clamped.
fn clamped_star() -> (NetworkSpec, stringnet::equilibrium::EquilibriumConfig) {
    let mut spec = StarParams::uniform(3).build();
    for n in &mut spec.nodes {
        if matches!(n.kind, NodeKind::ControlledSimple) {
            n.kind = NodeKind::ClampedSimple;
        }
    }
    let eq = star_affine_equilibrium(&spec, &symmetric_tangents(3, STRETCH), Vec3::zeros()).unwrap();
    (spec, eq)
}

fn bump_data() -> StringData {
    StringData { r: bump(Vec3::new(0.0, 0.0, AMP), 0.5, 0.4), rt: bump(Vec3::new(AMP, 0.0, 0.0), 0.5, 0.4) }
}

fn star_run(
    spec: &NetworkSpec,
    eq: &stringnet::equilibrium::EquilibriumConfig,
    cells: usize,
    horizon: f64,
    energy_stride: usize,
) -> Result<(Medium, SimResult), String> {
    let cfg = SolverConfig { energy_stride, ..SolverConfig::with_cells(cells) };
    let medium = Medium::new(spec, eq, &cfg).map_err(|e| e.to_string())?;
    let init = State::from_data(&medium, &data_on(3, 1, bump_data()), 0.0);
    let grid = Grid::covering(0.0, horizon, medium.max_dt());
    let res = simulate_forward(&medium, &init, &Drives::new(), grid, &cfg).map_err(|e| e.to_string())?;
    Ok((medium, res))
}

fn c5_energy() -> Outcome {
    let (spec, eq) = clamped_star();
    let t_bar = traveling_times(&spec, &eq, default_eps0(&spec, &eq)).map_err(|e| e.to_string())?.t_bar;
    let drift = |cells| -> Result<f64, String> {
        let (_, res) = star_run(&spec, &eq, cells, t_bar, 1)?;
        let e0 = res.energy[0].1;
        Ok(res.energy.iter().map(|&(_, e)| (e - e0).abs() / e0).fold(0.0, f64::max))
    };
    let (d800, d1600) = (drift(800)?, drift(1600)?);
    check(d800 <= 1e-3 && d1600 < d800, format!("drift N=800 {d800:.2e} (<= 1e-3), N=1600 {d1600:.2e} (< N=800), T̄ = {t_bar:.4}"))
}

fn c6_convergence() -> Outcome {
    let (spec, eq) = star(3, None);
    let runs: Vec<(Medium, SimResult)> = [200, 400, 800].iter().map(|&n| star_run(&spec, &eq, n, 2.0, 0)).collect::<Result<_, _>>()?;
    let diff = |a: usize, b: usize| {
        let (ma, ra) = &runs[a];
        let rb = &runs[b].1;
        let stride = 1 << (b - a);
        let mut e: f64 = 0.0;
        for (i, m) in ma.strings.iter().enumerate() {
            for j in 0..=m.n {
                e = e.max((ra.final_state.strings[i].r[j] - rb.final_state.strings[i].r[j * stride]).norm());
            }
        }
        e
    };
    let (d1, d2) = (diff(0, 1), diff(1, 2));
    let order = (d1 / d2).log2();
    check(order >= 1.9, format!("observed order {order:.3} (>= 1.9); |u200-u400| {d1:.2e}, |u400-u800| {d2:.2e}"))
}

fn problem(cells: usize, edges: Option<Vec<(usize, usize)>>, factor: f64) -> ControlProblem {
    let (spec, eq) = star(3, edges);
    let d = bump_data();
    let initial = data_on(3, 1, d.clone());
    let target = data_on(3, 2, StringData { r: d.r.scaled(-1.0), rt: d.rt });
    let t_bar = traveling_times(&spec, &eq, default_eps0(&spec, &eq)).unwrap().t_bar;
    ControlProblem::new(spec, eq, initial, target, factor * t_bar, SolverConfig::with_cells(cells))
}

/// Synthesizes and replays; returns `(err_r, err_rt, interface residual)`.
fn replay(p: &ControlProblem) -> Result<(f64, f64, f64), String> {
    let s = synthesize_local(p).map_err(|e| e.to_string())?;
    let (rep, _) = verify_controls(&p.spec, &p.eq, &p.solver, &p.initial, &p.target, &s.controls).map_err(|e| e.to_string())?;
    Ok((rep.max_terminal_error_r, rep.max_terminal_error_rt, s.diagnostics.interface_residual))
}

/// Criterion-7 bounds on one spring graph: N=800 within 5% amplitude,
/// monotone decrease over N, interface residual within 1e-8.
fn replay_bounds(edges: Option<Vec<(usize, usize)>>) -> Outcome {
    let mut rows = Vec::new();
    for n in [200, 400, 800] {
        rows.push(replay(&problem(n, edges.clone(), 2.2))?);
    }
    let monotone = rows.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
    let last = rows[2];
    let iface = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let detail = format!(
        "N=800 r {:.2e} rt {:.2e} (<= {:.0e}); r {:.2e}/{:.2e}/{:.2e}, rt {:.2e}/{:.2e}/{:.2e} over N=200/400/800 ({}); interface {iface:.1e} (<= 1e-8)",
        last.0,
        last.1,
        0.05 * AMP,
        rows[0].0,
        rows[1].0,
        rows[2].0,
        rows[0].1,
        rows[1].1,
        rows[2].1,
        if monotone { "monotone" } else { "not monotone" },
    );
    check(last.0 <= 0.05 * AMP && last.1 <= 0.05 * AMP && monotone && iface <= 1e-8, detail)
}

fn c7_replay() -> Outcome {
    replay_bounds(None)
}

fn c8_damage() -> Vec<(String, Outcome)> {
    let mut out = Vec::new();
    for (name, edges, variant) in
        [("case 1", vec![(0, 1), (1, 2)], PlanVariant::DamagedCase1), ("case 2", vec![(0, 1), (0, 2)], PlanVariant::DamagedCase2)]
    {
        let spec = {
            let mut p = StarParams::uniform(3);
            p.edges = edges.clone();
            p.build()
        };
        let r = match feasibility(&spec, &declared_controls(&spec)) {
            Feasibility::Feasible(plan) if plan.variant == variant => replay_bounds(Some(edges)),
            f => Err(format!("unexpected plan {f:?}")),
        };
        out.push((name.to_string(), r));
    }

    let mut p = StarParams::uniform(3);
    p.edges = vec![(1, 2)];
    let spec = p.build();
    let r = match feasibility(&spec, &declared_controls(&spec)) {
        Feasibility::Infeasible(m) => check(m.contains("component {1} unreachable"), format!("Infeasible: {m}")),
        f => Err(format!("expected Infeasible, got {f:?}")),
    };
    out.push(("case 5".into(), r));

    // Case 6: the plan is a component split, but string 3 meets the junction
    // with no spring, so its static balance forces G = 0 at the junction end.
    // A stretched equilibrium (|R_x| > 1) cannot exist; the junction end is
    // slack and the transverse wave speed vanishes there.
    p.edges = vec![(0, 1)];
    let spec = p.build();
    let plan = feasibility(&spec, &declared_controls(&spec));
    let split = matches!(&plan, Feasibility::Feasible(pl) if pl.variant == PlanVariant::ComponentSplit);
    let eq = star_affine_equilibrium(&spec, &symmetric_tangents(3, STRETCH), Vec3::zeros());
    let r = match (split, eq) {
        (true, Err(EquilibriumError::Unbalanced(m))) => Err(format!(
            "plan ComponentSplit, but no stretched equilibrium exists: the springless string 3 needs zero junction stress ({m}); not synthesizable"
        )),
        (true, Ok(eq)) => {
            let t_bar = traveling_times(&spec, &eq, default_eps0(&spec, &eq)).unwrap().t_bar;
            let d = bump_data();
            let mut cp = ControlProblem::new(spec.clone(), eq, data_on(3, 1, d.clone()), data_on(3, 2, d), 2.2 * t_bar, SolverConfig::with_cells(800));
            cp.controls_at = None;
            replay(&cp).and_then(|(r, rt, i)| check(r <= 0.05 * AMP && rt <= 0.05 * AMP && i <= 1e-8, format!("r {r:.2e} rt {rt:.2e}")))
        }
        (_, e) => Err(format!("plan {plan:?}, equilibrium {:?}", e.map(|_| ()))),
    };
    out.push(("case 6".into(), r));
    out
}

fn c9_horizon() -> Outcome {
    let refused = match synthesize_local(&problem(100, None, 1.9)) {
        Err(ControlError::Horizon { .. }) => true,
        other => return Err(format!("1.9 T̄ not refused by the horizon guard: {:?}", other.map(|_| ()))),
    };
    let p = problem(100, None, 2.05);
    let s = synthesize_local(&p).map_err(|e| format!("2.05 T̄: {e}"))?;
    check(
        refused && s.diagnostics.t_star > 0.0,
        format!("1.9 T̄ refused before solving; 2.05 T̄ proceeds with T* = {:.4}", s.diagnostics.t_star),
    )
}

fn single_string(gravity: f64) -> NetworkSpec {
    let mut m = BTreeMap::new();
    m.insert("a".to_string(), MaterialLaw::hookean(1.0));
    NetworkSpec::new(
        vec![StringSpec { id: 1, length: 1.0, density: 1.0, material: "a".into(), node_at_0: 1, node_at_l: 2 }],
        vec![NodeSpec { id: 1, kind: NodeKind::ClampedSimple }, NodeSpec { id: 2, kind: NodeKind::ClampedSimple }],
        m,
        gravity,
    )
}

fn c10_equilibrium() -> Outcome {
    let v = Vec3::new(STRETCH, 0.0, 0.0);
    let anchor = Vec3::new(STRETCH, 0.0, 0.0);
    let guess = [Vec3::new(1.2, 0.0, 0.01)];
    let spec0 = single_string(0.0);
    let aff = zero_gravity_equilibrium(&spec0, &[v], &[Vec3::zeros()]).map_err(|e| e.to_string())?;
    let (sh, _) = shooting_equilibrium(&spec0, &[anchor], &[Some(Vec3::zeros())], &guess).map_err(|e| e.to_string())?;
    let dev = (0..=100)
        .map(|k| (sh.strings[0].position(k as f64 / 100.0) - aff.strings[0].position(k as f64 / 100.0)).norm())
        .fold(0.0, f64::max);

    let (spec_s, eq_s) = star(3, None);
    let anchors: Vec<Vec3> = (0..3).map(|i| eq_s.end_position(&spec_s, i, End::Finish)).collect();
    let guess_s: Vec<Vec3> = symmetric_tangents(3, STRETCH).iter().map(|t| t * 0.98 + Vec3::new(0.0, 0.0, 0.01)).collect();
    let (sh_s, _) = shooting_equilibrium(&spec_s, &anchors, &[None, None, None], &guess_s).map_err(|e| e.to_string())?;
    let dev_s = (0..3)
        .flat_map(|i| (0..=100).map(move |k| (i, k as f64 / 100.0)))
        .map(|(i, x)| (sh_s.strings[i].position(x) - eq_s.strings[i].position(x)).norm())
        .fold(0.0, f64::max);

    // rho g / h = 1e-3 with rho = h = 1
    let spec = single_string(1e-3);
    let (eq, _) = shooting_equilibrium(&spec, &[anchor], &[Some(Vec3::zeros())], &guess).map_err(|e| e.to_string())?;
    let res = equilibrium_residual(&spec, &eq, 400).interior[0];
    let sag = eq.strings[0].position(0.5) - anchor * 0.5;
    let dir = sag.normalize();
    let e = spec.gravity_dir;
    let along = -dir.dot(&e);
    check(
        dev <= 1e-10 && dev_s <= 1e-10 && res <= 1e-9 && along > 1.0 - 1e-6,
        format!(
            "g=0 deviation from affine {:.1e} (string), {dev_s:.1e} (star) (<= 1e-10); g>0 interior residual {res:.1e} (<= 1e-9), sag {:.3e} with direction . (-e) = {along:.9}",
            dev,
            sag.norm()
        ),
    )
}

fn main() -> ExitCode {
    // Case 6 of criterion 8 is not attainable: no stretched equilibrium exists.
    const EXPECTED_FAIL: &[&str] = &["8 case 6"];
    let mut lines: Vec<(String, Outcome, f64)> = Vec::new();
    let timed = |lines: &mut Vec<(String, Outcome, f64)>, label: &str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let r = f();
        lines.push((label.to_string(), r, t.elapsed().as_secs_f64()));
    };
    timed(&mut lines, "1 laplacians", &c1_laplacians);
    timed(&mut lines, "2 characteristics", &c2_characteristics);
    timed(&mut lines, "3 riemann round trip", &c3_riemann);
    timed(&mut lines, "4 linear wave", &c4_dalembert);
    timed(&mut lines, "5 energy", &c5_energy);
    timed(&mut lines, "6 self-convergence", &c6_convergence);
    timed(&mut lines, "7 replay", &c7_replay);
    let t = Instant::now();
    let damage = c8_damage();
    let dt = t.elapsed().as_secs_f64() / damage.len() as f64;
    for (name, r) in damage {
        lines.push((format!("8 {name}"), r, dt));
    }
    timed(&mut lines, "9 horizon guard", &c9_horizon);
    timed(&mut lines, "10 equilibrium", &c10_equilibrium);

    let mut unexpected = 0;
    for (label, r, secs) in &lines {
        let (tag, detail) = match r {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} criterion {label}: {detail} [{secs:.2}s]");
        if r.is_err() != EXPECTED_FAIL.contains(&label.as_str()) {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria deviate from the expected outcome");
        ExitCode::FAILURE
    }
}
