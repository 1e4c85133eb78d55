use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stringnet::control::{
    declared_controls, feasibility, synthesize_global_local, synthesize_local, verify_controls, ControlError, ControlProblem, ControlSet,
    Feasibility, Leg, VerificationReport,
};
use stringnet::equilibrium::{equilibrium_residual, EquilibriumConfig, EquilibriumError};
use stringnet::io::{self, IoError, NetworkFile, Scenario, Series};
use stringnet::network::NetworkSpec;
use stringnet::solver::{simulate_forward, traveling_times, Drives, Grid, Medium, SimResult, SolverError, State};

#[derive(Parser)]
#[command(name = "stringnet", version, about = "Elastic string networks: simulation and boundary control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory for CSV, reports and plots.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed recorded in reports; the commands themselves are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Junction adjacency, Laplacian, rank, components and feasibility.
    Analyze {
        /// Network file; defaults to the scenario's network.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Forward simulation from the scenario's initial data.
    Simulate,
    /// Control synthesis followed by a replay.
    Synthesize,
    /// Replays a control CSV and reports terminal errors.
    Verify {
        /// Control CSV; defaults to the scenario's `verify.controls`.
        #[arg(long)]
        controls: Option<PathBuf>,
    },
    /// Builds the equilibrium and reports its residuals.
    Equilibrium,
}

enum Failure {
    Config(String),
    Numerical(String),
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Infeasible(_) => 4,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Equilibrium(EquilibriumError::NoConvergence { .. }) => Failure::Numerical(e.to_string()),
            e => Failure::Config(e.to_string()),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Config(_) => Failure::Config(e.to_string()),
            e => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<ControlError> for Failure {
    fn from(e: ControlError) -> Self {
        let inner = match &e {
            ControlError::Leg { source, .. } => source.as_ref(),
            other => other,
        };
        match inner {
            ControlError::NotStar | ControlError::Infeasible(_) | ControlError::Horizon { .. } | ControlError::TStar { .. } => {
                Failure::Infeasible(e.to_string())
            }
            ControlError::Compatibility { .. } | ControlError::Data(_) | ControlError::Seam { .. } => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

struct Ctx {
    out: Option<PathBuf>,
    svg: bool,
    seed: Option<u64>,
}

impl Ctx {
    fn write(&self, name: &str, text: &str) -> Result<(), Failure> {
        let Some(dir) = &self.out else { return Ok(()) };
        fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        println!("wrote {}", p.display());
        Ok(())
    }

    fn plot(&self, name: &str, title: &str, xl: &str, yl: &str, series: &[Series]) -> Result<(), Failure> {
        if self.svg {
            self.write(name, &io::plot_svg(title, xl, yl, series))?;
        }
        Ok(())
    }
}

fn load(cli: &Cli) -> Result<Scenario, Failure> {
    let path = cli.scenario.as_ref().ok_or_else(|| Failure::Config("--scenario is required for this command".into()))?;
    Ok(Scenario::load(path)?)
}

fn analyze(cli: &Cli, ctx: &Ctx, network: &Option<PathBuf>) -> Result<(), Failure> {
    let spec = match network {
        Some(p) => NetworkFile::parse(&io::read_text(p)?)
            .map_err(|e| match e {
                IoError::Parse { message, .. } => IoError::Parse { what: p.display().to_string(), message },
                e => e,
            })?
            .build(&Default::default())?,
        None => load(cli)?.spec,
    };
    let report = io::analyze_report(&spec);
    print!("{report}");
    ctx.write("analyze.txt", &report)
}

fn equilibrium(cli: &Cli, ctx: &Ctx) -> Result<(), Failure> {
    let sc = load(cli)?;
    let res = equilibrium_residual(&sc.spec, &sc.eq, sc.solver.cells);
    println!("construction {:?}", sc.eq.construction);
    println!("stretch_margin {:.6e}", sc.eq.stretch_margin(&sc.spec));
    for (i, r) in res.interior.iter().enumerate() {
        println!("interior_residual_{} {r:.3e}", sc.spec.strings[i].id);
    }
    for j in &res.junction {
        println!("junction_residual node {} string {} {:.3e}", j.node, j.string, j.residual);
    }
    let mut rows = String::from("string,x,r1,r2,r3,rx1,rx2,rx3\n");
    let mut series = Vec::new();
    for (i, s) in sc.spec.strings.iter().enumerate() {
        let n = sc.solver.cells;
        let (r, rx) = sc.eq.sample(&sc.spec, i, n);
        let mut pts = Vec::new();
        for j in 0..=n {
            let x = s.length * j as f64 / n as f64;
            let f: Vec<String> = r[j].iter().chain(rx[j].iter()).map(|v| io::fmt_f64(*v)).collect();
            rows.push_str(&format!("{},{},{}\n", s.id, io::fmt_f64(x), f.join(",")));
            pts.push((r[j].x, r[j].y));
        }
        series.push(Series { label: format!("string {}", s.id), points: pts });
    }
    ctx.write("equilibrium.csv", &rows)?;
    ctx.plot("equilibrium.svg", "equilibrium (x-y projection)", "x", "y", &series)
}

fn trace_series(spec: &NetworkSpec, res: &SimResult) -> Vec<Series> {
    res.traces
        .iter()
        .enumerate()
        .flat_map(|(i, pair)| {
            pair.iter().map(move |tr| Series {
                label: format!("string {} {:?}", spec.strings[i].id, tr.end),
                points: (0..tr.len()).map(|k| (tr.time(k), tr.r[k].norm())).collect(),
            })
        })
        .collect()
}

fn simulate(cli: &Cli, ctx: &Ctx) -> Result<(), Failure> {
    let sc = load(cli)?;
    let block = sc.file.simulate.as_ref().ok_or_else(|| Failure::Config("scenario has no [simulate] block".into()))?;
    if !(block.horizon > 0.0) {
        return Err(Failure::Config("simulate.horizon must be positive".into()));
    }
    let medium = Medium::new(&sc.spec, &sc.eq, &sc.solver)?;
    let grid = match block.dt {
        Some(dt) if dt > 0.0 => Grid { t0: 0.0, dt, steps: (block.horizon / dt).ceil() as usize },
        Some(_) => return Err(Failure::Config("simulate.dt must be positive".into())),
        None => Grid::covering(0.0, block.horizon, medium.max_dt()),
    };
    let init = State::from_data(&medium, &sc.initial, 0.0);
    let res = simulate_forward(&medium, &init, &Drives::new(), grid, &sc.solver)?;
    let e0 = res.energy.first().map_or(0.0, |e| e.1);
    let drift = res.energy.iter().map(|e| (e.1 - e0).abs()).fold(0.0, f64::max) / if e0 > 0.0 { e0 } else { 1.0 };
    println!("steps {} dt {:.6e} horizon {:.6e}", grid.steps, grid.dt, grid.t_end());
    println!("energy_initial {e0:.6e} energy_drift {drift:.3e}");
    ctx.write("traces.csv", &io::sim_traces_csv(&sc.spec, &res))?;
    ctx.write("energy.csv", &io::energy_csv(&res.energy))?;
    if !res.snapshots.is_empty() {
        ctx.write("snapshots.csv", &io::snapshots_csv(&sc.spec, &res.snapshots))?;
    }
    ctx.plot("traces.svg", "end displacement |r|", "t", "|r|", &trace_series(&sc.spec, &res))?;
    ctx.plot("energy.svg", "energy", "t", "E", &[Series { label: "E".into(), points: res.energy.clone() }])
}

fn report_text(ctx: &Ctx, r: &VerificationReport) -> String {
    let mut s = io::verification_report(r);
    if let Some(seed) = ctx.seed {
        s.push_str(&format!("seed = {seed}\n"));
    }
    s
}

fn control_series(spec: &NetworkSpec, eq: &EquilibriumConfig, set: &ControlSet) -> Vec<Series> {
    let drives = set.drives(spec, eq);
    set.nodes
        .iter()
        .flat_map(|n| {
            let i = spec.string_index(n.string).unwrap();
            let d = &drives[&i];
            (0..3)
                .map(|c| Series {
                    label: format!("node {} U{}", n.node, c + 1),
                    points: (0..set.len()).map(|k| (set.time(k), d.eval(set.time(k)).0[c])).collect(),
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Refuses infeasible control placements before any equilibrium is built;
/// some of them (an orphan junction string) admit no stretched equilibrium.
fn preflight(cli: &Cli) -> Result<(), Failure> {
    let path = cli.scenario.as_ref().ok_or_else(|| Failure::Config("--scenario is required for this command".into()))?;
    let (file, _, spec) = Scenario::load_network(path, &Default::default())?;
    let controls = match file.control.as_ref().and_then(|c| c.nodes.as_ref()) {
        Some(v) => v.iter().copied().collect(),
        None => declared_controls(&spec),
    };
    match feasibility(&spec, &controls) {
        Feasibility::Infeasible(m) => Err(Failure::Infeasible(m)),
        Feasibility::Feasible(_) => Ok(()),
    }
}

fn synthesize(cli: &Cli, ctx: &Ctx) -> Result<(), Failure> {
    preflight(cli)?;
    let sc = load(cli)?;
    if !sc.file.legs.is_empty() {
        return synthesize_legs(&sc, ctx);
    }
    let block = sc.file.control.as_ref().ok_or_else(|| Failure::Config("scenario has no [control] block".into()))?;
    let horizon = match (block.horizon, block.horizon_factor) {
        (Some(t), None) => t,
        (None, Some(f)) => {
            let eps0 = sc.solver.eps0.unwrap_or_else(|| stringnet::solver::default_eps0(&sc.spec, &sc.eq));
            f * traveling_times(&sc.spec, &sc.eq, eps0)?.t_bar
        }
        _ => return Err(Failure::Config("control needs exactly one of horizon and horizon_factor".into())),
    };
    let mut p = ControlProblem::new(sc.spec.clone(), sc.eq.clone(), sc.initial.clone(), sc.target.clone(), horizon, sc.solver.clone());
    p.controls_at = block.nodes.as_ref().map(|v| v.iter().copied().collect::<BTreeSet<_>>());
    p.c0 = block.c0;
    p.tol_compat = sc.file.numerics.tol_compat;
    let s = synthesize_local(&p)?;
    let diag = io::diagnostics_report(&sc.spec, &s.diagnostics);
    print!("{diag}");
    ctx.write("controls.csv", &io::controls_csv(&s.controls))?;
    ctx.write("diagnostics.txt", &diag)?;
    let (mut report, _) = verify_controls(&sc.spec, &sc.eq, &sc.solver, &sc.initial, &sc.target, &s.controls)?;
    report.max_interface_residual = Some(s.diagnostics.interface_residual);
    let text = report_text(ctx, &report);
    print!("{text}");
    ctx.write("verification.toml", &text)?;
    ctx.plot("controls.svg", "boundary controls U - U_eq", "t", "U - U_eq", &control_series(&sc.spec, &sc.eq, &s.controls))
}

/// Global-local path: controls are concatenated; each leg is replayed
/// against its own equilibrium.
fn synthesize_legs(sc: &Scenario, ctx: &Ctx) -> Result<(), Failure> {
    let mut legs = Vec::new();
    for l in &sc.file.legs {
        legs.push(Leg {
            eq: io::build_equilibrium(&sc.spec, &l.equilibrium, &sc.dir)?,
            initial: io::build_data(&sc.spec, &l.initial, &sc.dir)?,
            target: io::build_data(&sc.spec, &l.target, &sc.dir)?,
            horizon: l.horizon,
        });
    }
    let g = synthesize_global_local(&sc.spec, &sc.solver, &legs)?;
    ctx.write("controls.csv", &io::controls_csv(&g.controls))?;
    for (k, (leg, s)) in legs.iter().zip(&g.legs).enumerate() {
        let diag = io::diagnostics_report(&sc.spec, &s.diagnostics);
        print!("[leg_{k}]\n{diag}");
        ctx.write(&format!("diagnostics_leg_{k}.txt"), &diag)?;
        let (mut report, _) = verify_controls(&sc.spec, &leg.eq, &sc.solver, &leg.initial, &leg.target, &s.controls)?;
        report.max_interface_residual = Some(s.diagnostics.interface_residual);
        let text = report_text(ctx, &report);
        print!("{text}");
        ctx.write(&format!("verification_leg_{k}.toml"), &text)?;
    }
    Ok(())
}

fn verify(cli: &Cli, ctx: &Ctx, controls: &Option<PathBuf>) -> Result<(), Failure> {
    let sc = load(cli)?;
    let path: PathBuf = match (controls, &sc.file.verify) {
        (Some(p), _) => p.clone(),
        (None, Some(v)) => sc.dir.join(&v.controls),
        (None, None) => return Err(Failure::Config("no control CSV given (--controls or [verify] controls)".into())),
    };
    let set = io::read_controls(Path::new(&path), &sc.spec)?;
    let (report, _) = verify_controls(&sc.spec, &sc.eq, &sc.solver, &sc.initial, &sc.target, &set)?;
    let text = report_text(ctx, &report);
    print!("{text}");
    ctx.write("verification.toml", &text)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        stringnet::exec::set_threads(n).map_err(Failure::Config)?;
    }
    let ctx = Ctx { out: cli.out.clone(), svg: cli.svg, seed: cli.seed };
    if ctx.svg && ctx.out.is_none() {
        return Err(Failure::Config("--svg needs --out".into()));
    }
    match &cli.command {
        Command::Analyze { network } => analyze(cli, &ctx, network),
        Command::Simulate => simulate(cli, &ctx),
        Command::Synthesize => synthesize(cli, &ctx),
        Command::Verify { controls } => verify(cli, &ctx, controls),
        Command::Equilibrium => equilibrium(cli, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, msg) = match &f {
                Failure::Config(m) => ("config", m),
                Failure::Numerical(m) => ("numerical", m),
                Failure::Infeasible(m) => ("infeasible", m),
            };
            eprintln!("stringnet: error code={} kind={kind}: {}", f.code(), msg.replace('\n', " "));
            ExitCode::from(f.code())
        }
    }
}
