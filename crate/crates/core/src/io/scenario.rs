//! TOML scenario files: network reference, equilibrium, data, numerics and task.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    equilibrium_residual, shooting_equilibrium, star_affine_equilibrium, symmetric_tangents, zero_gravity_equilibrium, Construction,
    EquilibriumConfig, StringEquilibrium,
};
use crate::material::MaterialLaw;
use crate::network::NetworkSpec;
use crate::numerics::CubicSpline;
use crate::profile::{NetworkData, Shape, StringData};
use crate::solver::SolverConfig;
use crate::Vec3;

use super::network_file::NetworkFile;
use super::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Analyze,
    Simulate,
    Synthesize,
    Verify,
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartEntry {
    pub string: usize,
    pub at: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EquilibriumBlock {
    /// `R(x) = anchor + x tangent` per string, zero gravity.
    Affine { tangents: Vec<[f64; 3]>, anchors: Vec<[f64; 3]> },
    /// Star with all junction ends at `hub`; `tangents` default to a symmetric
    /// fan in the xy-plane with the given `stretch`.
    StarAffine {
        #[serde(default)]
        tangents: Option<Vec<[f64; 3]>>,
        #[serde(default)]
        stretch: Option<f64>,
        #[serde(default)]
        hub: [f64; 3],
    },
    /// Shooting from fixed simple-node positions at `x = L` (`anchors`),
    /// optional fixed starts, and strain guesses.
    Shooting {
        anchors: Vec<[f64; 3]>,
        guess: Vec<[f64; 3]>,
        #[serde(default)]
        starts: Vec<StartEntry>,
    },
    /// CSV with columns `string,x,r1,r2,r3,rx1,rx2,rx3`.
    UserSampled {
        csv: String,
        #[serde(default = "default_sampled_tol")]
        tol: f64,
    },
}

fn default_sampled_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeEntry {
    Zero,
    Gaussian {
        amplitude: [f64; 3],
        center: f64,
        width: f64,
    },
    Sine {
        amplitude: [f64; 3],
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
    Bump {
        amplitude: [f64; 3],
        center: f64,
        half_width: f64,
    },
    /// CSV with columns `x,v1,v2,v3`, interpolated by a natural cubic spline.
    Sampled {
        csv: String,
    },
    Sum {
        parts: Vec<ShapeEntry>,
    },
}

impl Default for ShapeEntry {
    fn default() -> Self {
        ShapeEntry::Zero
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataEntry {
    pub string: usize,
    #[serde(default)]
    pub r: ShapeEntry,
    #[serde(default)]
    pub rt: ShapeEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub eps0: Option<f64>,
    #[serde(default = "default_tol_compat")]
    pub tol_compat: f64,
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default = "default_energy_stride")]
    pub energy_stride: usize,
}

fn default_cells() -> usize {
    400
}
fn default_cfl() -> f64 {
    0.9
}
fn default_tol_compat() -> f64 {
    1e-6
}
fn default_energy_stride() -> usize {
    10
}

impl Default for NumericsBlock {
    fn default() -> Self {
        NumericsBlock {
            cells: default_cells(),
            cfl: default_cfl(),
            eps0: None,
            tol_compat: default_tol_compat(),
            snapshot_stride: 0,
            energy_stride: default_energy_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub horizon: f64,
    /// Forces the time step; by default the largest CFL-stable step is used.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    /// Absolute horizon; exclusive with `horizon_factor`.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Horizon as a multiple of `T_bar`.
    #[serde(default)]
    pub horizon_factor: Option<f64>,
    /// Controlled node ids; defaults to the nodes declared controlled.
    #[serde(default)]
    pub nodes: Option<Vec<usize>>,
    #[serde(default)]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegEntry {
    pub equilibrium: EquilibriumBlock,
    #[serde(default)]
    pub initial: Vec<DataEntry>,
    #[serde(default)]
    pub target: Vec<DataEntry>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    /// Control CSV to replay.
    pub controls: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Network file, relative to the scenario file.
    pub network: String,
    #[serde(default)]
    pub task: Option<Task>,
    pub equilibrium: EquilibriumBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub initial: Vec<DataEntry>,
    #[serde(default)]
    pub target: Vec<DataEntry>,
    #[serde(default)]
    pub simulate: Option<SimulateBlock>,
    #[serde(default)]
    pub control: Option<ControlBlock>,
    /// Global-local path; when present `synthesize` chains the legs.
    #[serde(default)]
    pub legs: Vec<LegEntry>,
    #[serde(default)]
    pub verify: Option<VerifyBlock>,
}

/// A scenario with all references resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub dir: PathBuf,
    pub spec: NetworkSpec,
    pub eq: EquilibriumConfig,
    pub initial: NetworkData,
    pub target: NetworkData,
    pub solver: SolverConfig,
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let heads = rd.headers().map_err(|e| IoError::Parse { what: path.display().to_string(), message: e.to_string() })?.clone();
    let cols: Vec<usize> = header
        .iter()
        .map(|h| {
            heads
                .iter()
                .position(|x| x == *h)
                .ok_or_else(|| IoError::Parse { what: path.display().to_string(), message: format!("missing column {h}") })
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| IoError::Parse { what: path.display().to_string(), message: e.to_string() })?;
        let row = cols
            .iter()
            .map(|&c| {
                rec.get(c)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| IoError::Parse { what: path.display().to_string(), message: format!("line {}: {e}", line + 2) })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads `header` columns of a CSV file as numbers.
pub fn read_csv_columns(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, IoError> {
    read_rows(path, header)
}

fn spline_from_rows(what: &str, rows: &[(f64, Vec3)]) -> Result<CubicSpline, IoError> {
    if rows.len() < 2 || rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(IoError::Invalid(format!("{what}: need at least two samples with increasing x")));
    }
    Ok(CubicSpline::new(rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()))
}

pub fn build_shape(entry: &ShapeEntry, dir: &Path) -> Result<Shape, IoError> {
    Ok(match entry {
        ShapeEntry::Zero => Shape::Zero,
        ShapeEntry::Gaussian { amplitude, center, width } => {
            if !(*width > 0.0) {
                return Err(IoError::Invalid("gaussian width must be positive".into()));
            }
            Shape::Gaussian { amplitude: v3(amplitude), center: *center, width: *width }
        }
        ShapeEntry::Sine { amplitude, wavenumber, phase } => {
            Shape::Sine { amplitude: v3(amplitude), wavenumber: *wavenumber, phase: *phase }
        }
        ShapeEntry::Bump { amplitude, center, half_width } => {
            if !(*half_width > 0.0) {
                return Err(IoError::Invalid("bump half_width must be positive".into()));
            }
            Shape::Bump { amplitude: v3(amplitude), center: *center, half_width: *half_width }
        }
        ShapeEntry::Sampled { csv } => {
            let path = dir.join(csv);
            let rows = read_rows(&path, &["x", "v1", "v2", "v3"])?;
            let pts: Vec<(f64, Vec3)> = rows.iter().map(|r| (r[0], Vec3::new(r[1], r[2], r[3]))).collect();
            Shape::Sampled(spline_from_rows(&path.display().to_string(), &pts)?)
        }
        ShapeEntry::Sum { parts } => Shape::Sum(parts.iter().map(|p| build_shape(p, dir)).collect::<Result<_, _>>()?),
    })
}

pub fn build_data(spec: &NetworkSpec, entries: &[DataEntry], dir: &Path) -> Result<NetworkData, IoError> {
    let mut data = vec![StringData::zero(); spec.strings.len()];
    for e in entries {
        let i = spec.string_index(e.string).ok_or_else(|| IoError::Invalid(format!("data refers to unknown string {}", e.string)))?;
        data[i] = StringData { r: build_shape(&e.r, dir)?, rt: build_shape(&e.rt, dir)? };
    }
    Ok(data)
}

pub fn build_equilibrium(spec: &NetworkSpec, block: &EquilibriumBlock, dir: &Path) -> Result<EquilibriumConfig, IoError> {
    let n = spec.strings.len();
    let count = |what: &str, len: usize| {
        if len == n {
            Ok(())
        } else {
            Err(IoError::Invalid(format!("equilibrium {what}: expected {n} entries, found {len}")))
        }
    };
    match block {
        EquilibriumBlock::Affine { tangents, anchors } => {
            count("tangents", tangents.len())?;
            count("anchors", anchors.len())?;
            let t: Vec<Vec3> = tangents.iter().map(v3).collect();
            let a: Vec<Vec3> = anchors.iter().map(v3).collect();
            Ok(zero_gravity_equilibrium(spec, &t, &a)?)
        }
        EquilibriumBlock::StarAffine { tangents, stretch, hub } => {
            let t: Vec<Vec3> = match (tangents, stretch) {
                (Some(t), None) => {
                    count("tangents", t.len())?;
                    t.iter().map(v3).collect()
                }
                (None, Some(s)) => symmetric_tangents(n, *s),
                _ => return Err(IoError::Invalid("star_affine needs exactly one of tangents and stretch".into())),
            };
            Ok(star_affine_equilibrium(spec, &t, v3(hub))?)
        }
        EquilibriumBlock::Shooting { anchors, guess, starts } => {
            count("anchors", anchors.len())?;
            count("guess", guess.len())?;
            let mut st = vec![None; n];
            for s in starts {
                let i =
                    spec.string_index(s.string).ok_or_else(|| IoError::Invalid(format!("start refers to unknown string {}", s.string)))?;
                st[i] = Some(v3(&s.at));
            }
            let a: Vec<Vec3> = anchors.iter().map(v3).collect();
            let g: Vec<Vec3> = guess.iter().map(v3).collect();
            Ok(shooting_equilibrium(spec, &a, &st, &g)?.0)
        }
        EquilibriumBlock::UserSampled { csv, tol } => {
            let path = dir.join(csv);
            let rows = read_rows(&path, &["string", "x", "r1", "r2", "r3", "rx1", "rx2", "rx3"])?;
            let mut per: BTreeMap<usize, (Vec<(f64, Vec3)>, Vec<(f64, Vec3)>)> = BTreeMap::new();
            for r in rows {
                let e = per.entry(r[0] as usize).or_default();
                e.0.push((r[1], Vec3::new(r[2], r[3], r[4])));
                e.1.push((r[1], Vec3::new(r[5], r[6], r[7])));
            }
            let mut strings = Vec::with_capacity(n);
            for s in &spec.strings {
                let (r, rx) =
                    per.get(&s.id).ok_or_else(|| IoError::Invalid(format!("{}: no samples for string {}", path.display(), s.id)))?;
                strings.push(StringEquilibrium::Sampled {
                    r: spline_from_rows(&path.display().to_string(), r)?,
                    rx: spline_from_rows(&path.display().to_string(), rx)?,
                });
            }
            let eq = EquilibriumConfig { strings, construction: Construction::UserSampled };
            let res = equilibrium_residual(spec, &eq, 256).max();
            if !(res <= *tol) {
                return Err(IoError::Invalid(format!("sampled equilibrium residual {res:.3e} exceeds {tol:.1e}")));
            }
            Ok(eq)
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, IoError> {
        Scenario::load_with(path, &BTreeMap::new())
    }

    /// Parses the scenario file and builds its network only; returns the
    /// file, its directory and the network.
    pub fn load_network(path: &Path, custom: &BTreeMap<String, MaterialLaw>) -> Result<(ScenarioFile, PathBuf, NetworkSpec), IoError> {
        let text = read_text(path)?;
        let file: ScenarioFile =
            toml::from_str(&text).map_err(|e| IoError::Parse { what: path.display().to_string(), message: e.to_string() })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let net_path = dir.join(&file.network);
        let net = NetworkFile::parse(&read_text(&net_path)?).map_err(|e| match e {
            IoError::Parse { message, .. } => IoError::Parse { what: net_path.display().to_string(), message },
            other => other,
        })?;
        let spec = net.build(custom)?;
        Ok((file, dir, spec))
    }

    /// Loads a scenario; `custom` supplies custom material laws by id.
    pub fn load_with(path: &Path, custom: &BTreeMap<String, MaterialLaw>) -> Result<Scenario, IoError> {
        let (file, dir, spec) = Scenario::load_network(path, custom)?;
        let nb = &file.numerics;
        if nb.cells == 0 || !(nb.cfl > 0.0 && nb.cfl < 1.0) || !(nb.tol_compat > 0.0) || nb.eps0.is_some_and(|e| !(e > 0.0)) {
            return Err(IoError::Invalid("numerics: cells > 0, 0 < cfl < 1 and positive tolerances required".into()));
        }
        let solver = SolverConfig {
            cfl: nb.cfl,
            eps0: nb.eps0,
            snapshot_stride: nb.snapshot_stride,
            energy_stride: nb.energy_stride,
            ..SolverConfig::with_cells(nb.cells)
        };
        let eq = build_equilibrium(&spec, &file.equilibrium, &dir)?;
        let initial = build_data(&spec, &file.initial, &dir)?;
        let target = build_data(&spec, &file.target, &dir)?;
        Ok(Scenario { file, dir, spec, eq, initial, target, solver })
    }
}
