mod common;

use common::*;
use stringnet::profile::{Shape, StringData};
use stringnet::solver::*;
use stringnet::Vec3;

fn odd_periodic(f: &Shape, x: f64, l: f64) -> Vec3 {
    let p = 2.0 * l;
    let y = x.rem_euclid(p);
    if y <= l {
        f.value(y)
    } else {
        -f.value(p - y)
    }
}

fn dalembert_error(cells: usize, hw: f64) -> f64 {
    let (spec, eq) = clamped_string();
    let amp = 1e-6;
    let shape = bump(Vec3::new(0.6, 0.8, 0.0) * amp, 0.5, hw);
    let cfg = SolverConfig { snapshot_stride: 20, ..SolverConfig::with_cells(cells) };
    let medium = Medium::new(&spec, &eq, &cfg).unwrap();
    let data = vec![StringData { r: shape.clone(), rt: Shape::Zero }];
    let init = State::from_data(&medium, &data, 0.0);
    let horizon = 1.0 / 0.2f64.sqrt();
    let grid = Grid::covering(0.0, horizon, medium.max_dt());
    let res = simulate_forward(&medium, &init, &Drives::new(), grid, &cfg).unwrap();
    let speeds = [1.0, 0.2f64.sqrt(), 0.2f64.sqrt()];
    let m = &medium.strings[0];
    let mut err: f64 = 0.0;
    for s in &res.snapshots {
        for j in 0..=m.n {
            let x = m.x(j);
            let mut exact = Vec3::zeros();
            for c in 0..3 {
                let a = odd_periodic(&shape, x - speeds[c] * s.t, 1.0);
                let b = odd_periodic(&shape, x + speeds[c] * s.t, 1.0);
                exact[c] = 0.5 * (a[c] + b[c]);
            }
            err = err.max((s.strings[0].r[j] - exact).norm());
        }
    }
    err / amp
}

#[test]
fn linear_wave_matches_dalembert() {
    let e400 = dalembert_error(400, 0.4);
    let e800 = dalembert_error(800, 0.4);
    assert!(e400 <= 1e-3, "{e400}");
    assert!(e800 < e400 / 3.5);
}

fn star_bump_run(cells: usize, horizon: f64, amp: f64) -> (Medium, SimResult) {
    let (spec, eq) = star(3, None);
    let cfg = SolverConfig { energy_stride: 10, ..SolverConfig::with_cells(cells) };
    let medium = Medium::new(&spec, &eq, &cfg).unwrap();
    let d = StringData { r: bump(Vec3::new(0.0, 0.0, amp), 0.5, 0.4), rt: bump(Vec3::new(amp, 0.0, 0.0), 0.5, 0.4) };
    let init = State::from_data(&medium, &data_on(3, 1, d), 0.0);
    let grid = Grid::covering(0.0, horizon, medium.max_dt());
    let res = simulate_forward(&medium, &init, &Drives::new(), grid, &cfg).unwrap();
    (medium, res)
}

fn drift(res: &SimResult) -> f64 {
    let e0 = res.energy[0].1;
    res.energy.iter().map(|&(_, e)| (e - e0).abs() / e0).fold(0.0, f64::max)
}

#[test]
fn energy_drift_small_and_decreasing() {
    for n in [200, 400, 800] {
        let (_, res) = star_bump_run(n, 4.5, 1e-3);
        println!("n {n} drift {:.3e}", drift(&res));
    }
}

#[test]
fn self_convergence_order() {
    let runs: Vec<(Medium, SimResult)> = [200, 400, 800].iter().map(|&n| star_bump_run(n, 2.0, 1e-3)).collect();
    let diff = |a: usize, b: usize| {
        let (ma, ra) = &runs[a];
        let (_, rb) = &runs[b];
        let stride = 1 << (b - a);
        let mut e: f64 = 0.0;
        for (i, m) in ma.strings.iter().enumerate() {
            for j in 0..=m.n {
                e = e.max((ra.final_state.strings[i].r[j] - rb.final_state.strings[i].r[j * stride]).norm());
            }
        }
        e
    };
    let order = (diff(0, 1) / diff(1, 2)).log2();
    println!("order {order}");
    assert!(order >= 1.9);
}

fn sampled_profile(m: &StringMedium, r: &[Vec3]) -> Shape {
    let xs: Vec<f64> = (0..=m.n).map(|j| m.x(j)).collect();
    Shape::Sampled(stringnet::numerics::CubicSpline::new(xs, r.to_vec()))
}

fn sidewise_error(cells: usize) -> f64 {
    let (spec, eq) = star(3, None);
    let (medium, res) = star_bump_run(cells, 3.0, 1e-3);
    let m = &medium.strings[1];
    let init = sampled_profile(m, &res.snapshots[0].strings[1].r);
    let fin = sampled_profile(m, &res.final_state.strings[1].r);
    let input = SidewiseInput {
        string: 1,
        from: stringnet::network::End::Finish,
        cauchy: &res.traces[1][1],
        rail_start: &init,
        rail_end: &fin,
        cfl: 0.9,
        speed_floor: m.speed_min,
        stations: 4,
    };
    let sw = sidewise_solve(&spec, &eq, &input).unwrap();
    let fwd = &res.traces[1][0];
    let k = sw.far.r.len();
    (0..k).map(|j| (sw.far.r[j] - fwd.r[j]).norm()).fold(0.0, f64::max)
}

#[test]
fn sidewise_reproduces_forward_trace() {
    let e1 = sidewise_error(200);
    let e2 = sidewise_error(400);
    println!("sidewise {e1:.3e} {e2:.3e} ratio {}", e1 / e2);
    assert!(e1 / e2 >= 1.8);
}

#[test]
fn backward_recovers_initial_state() {
    let (medium, fwd) = star_bump_run(200, 2.0, 1e-3);
    let cfg = SolverConfig::with_cells(200);
    let back = simulate_backward(&medium, &fwd.final_state, &Drives::new(), fwd.grid, &cfg).unwrap();
    let err = back.final_state.diff(&fwd.snapshots[0]).iter().map(|e| e.0).fold(0.0, f64::max);
    println!("reversibility error {err:.3e}");
    assert!(err < 1e-6);
}
