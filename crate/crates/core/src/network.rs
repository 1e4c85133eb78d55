//! String graph, junction spring graphs and their Laplacian analysis.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::material::MaterialLaw;
use crate::Vec3;

/// Relative tolerance for the numerical rank of a Laplacian.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("matrix is not symmetric (entry ({0},{1}))")]
    NotSymmetric(usize, usize),
    #[error("matrix is not square")]
    NotSquare,
    #[error("invalid network: {0}")]
    Invalid(String),
}

/// Which end of a string, `x = 0` or `x = L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Start,
    Finish,
}

impl End {
    /// Orientation sign: `-1` at `x = 0`, `+1` at `x = L`.
    pub fn epsilon(self) -> f64 {
        match self {
            End::Start => -1.0,
            End::Finish => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StringSpec {
    pub id: usize,
    pub length: f64,
    pub density: f64,
    pub material: String,
    pub node_at_0: usize,
    pub node_at_l: usize,
}

impl StringSpec {
    pub fn node_at(&self, end: End) -> usize {
        match end {
            End::Start => self.node_at_0,
            End::Finish => self.node_at_l,
        }
    }
}

/// Local spring graph of a multiple node. Local index `a` carries mass
/// `masses[a]` and is the end `incidence[a]` of a string.
#[derive(Debug, Clone, PartialEq)]
pub struct SpringGraph {
    pub adjacency: Vec<Vec<u8>>,
    pub stiffness: f64,
    pub masses: Vec<f64>,
    pub incidence: Vec<(usize, End)>,
}

impl SpringGraph {
    pub fn size(&self) -> usize {
        self.adjacency.len()
    }

    /// Builds a graph from an edge list over local indices.
    pub fn from_edges(size: usize, edges: &[(usize, usize)], stiffness: f64, masses: Vec<f64>, incidence: Vec<(usize, End)>) -> Self {
        let mut adjacency = vec![vec![0u8; size]; size];
        for &(a, b) in edges {
            adjacency[a][b] = 1;
            adjacency[b][a] = 1;
        }
        SpringGraph { adjacency, stiffness, masses, incidence }
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.size();
        let mut out = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if self.adjacency[a][b] != 0 {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn is_complete(&self) -> bool {
        let n = self.size();
        (0..n).all(|a| (0..n).all(|b| a == b || self.adjacency[a][b] != 0))
    }

    pub fn local_index_of(&self, string_id: usize, end: End) -> Option<usize> {
        self.incidence.iter().position(|&(s, e)| s == string_id && e == end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    ClampedSimple,
    ControlledSimple,
    Multiple(SpringGraph),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: usize,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Star,
    Chain,
    Ring,
    General,
}

#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub strings: Vec<StringSpec>,
    pub nodes: Vec<NodeSpec>,
    pub materials: BTreeMap<String, MaterialLaw>,
    pub gravity: f64,
    /// Unit vector `e`; gravity acts along `-e`.
    pub gravity_dir: Vec3,
    pub topology: Topology,
}

impl NetworkSpec {
    pub fn new(strings: Vec<StringSpec>, nodes: Vec<NodeSpec>, materials: BTreeMap<String, MaterialLaw>, gravity: f64) -> Self {
        let mut spec = NetworkSpec { strings, nodes, materials, gravity, gravity_dir: Vec3::z(), topology: Topology::General };
        spec.topology = classify(&spec);
        spec
    }

    pub fn node_index(&self, id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn string_index(&self, id: usize) -> Option<usize> {
        self.strings.iter().position(|s| s.id == id)
    }

    pub fn node(&self, id: usize) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn law(&self, string: usize) -> &MaterialLaw {
        &self.materials[&self.strings[string].material]
    }

    /// Index of the star's multiple node, if the topology is a star.
    pub fn star_hub(&self) -> Option<usize> {
        if self.topology != Topology::Star {
            return None;
        }
        self.nodes.iter().position(|n| matches!(n.kind, NodeKind::Multiple(_)))
    }

    pub fn hub_graph(&self) -> Option<&SpringGraph> {
        self.star_hub().and_then(|h| match &self.nodes[h].kind {
            NodeKind::Multiple(g) => Some(g),
            _ => None,
        })
    }

    /// Kind of the node at a given string end.
    pub fn end_kind(&self, string: usize, end: End) -> Option<&NodeKind> {
        self.node(self.strings[string].node_at(end)).map(|n| &n.kind)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// `D - A` of a spring graph in exact integer arithmetic.
pub fn laplacian_int(graph: &SpringGraph) -> Vec<Vec<i64>> {
    let n = graph.size();
    let mut l = vec![vec![0i64; n]; n];
    for a in 0..n {
        let mut deg = 0i64;
        for b in 0..n {
            if a != b && graph.adjacency[a][b] != 0 {
                l[a][b] = -1;
                deg += 1;
            }
        }
        l[a][a] = deg;
    }
    l
}

pub fn laplacian(graph: &SpringGraph) -> DMatrix<f64> {
    let li = laplacian_int(graph);
    let n = li.len();
    DMatrix::from_fn(n, n, |i, j| li[i][j] as f64)
}

pub fn degrees(graph: &SpringGraph) -> Vec<usize> {
    laplacian_int(graph).iter().enumerate().map(|(i, r)| r[i] as usize).collect()
}

/// Number of eigenvalues above `tol` times the largest one.
pub fn laplacian_rank(l: &DMatrix<f64>, tol: f64) -> Result<usize, NetworkError> {
    if l.nrows() != l.ncols() {
        return Err(NetworkError::NotSquare);
    }
    let n = l.nrows();
    for i in 0..n {
        for j in 0..i {
            if (l[(i, j)] - l[(j, i)]).abs() > 1e-12 * (1.0 + l[(i, j)].abs()) {
                return Err(NetworkError::NotSymmetric(i, j));
            }
        }
    }
    if n == 0 {
        return Ok(0);
    }
    let eig = SymmetricEigen::new(l.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    if max == 0.0 {
        return Ok(0);
    }
    Ok(eig.iter().filter(|&&e| e > tol * max).count())
}

/// Connected components of the spring graph, each sorted, ordered by their
/// smallest member.
pub fn connected_components(graph: &SpringGraph) -> Vec<Vec<usize>> {
    let n = graph.size();
    let mut label = vec![usize::MAX; n];
    let mut parts = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = parts.len();
        let mut part = vec![start];
        label[start] = id;
        let mut k = 0;
        while k < part.len() {
            let a = part[k];
            for b in 0..n {
                if graph.adjacency[a][b] != 0 && label[b] == usize::MAX {
                    label[b] = id;
                    part.push(b);
                }
            }
            k += 1;
        }
        part.sort_unstable();
        parts.push(part);
    }
    parts
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(spec: &NetworkSpec) -> ValidationReport {
    let mut v = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for n in &spec.nodes {
        if !seen.insert(n.id) {
            v.push(format!("node {} declared twice", n.id));
        }
    }
    let mut sseen = std::collections::BTreeSet::new();
    for s in &spec.strings {
        if !sseen.insert(s.id) {
            v.push(format!("string {} declared twice", s.id));
        }
        if !(s.length > 0.0) {
            v.push(format!("string {}: length must be positive", s.id));
        }
        if !(s.density > 0.0) {
            v.push(format!("string {}: density must be positive", s.id));
        }
        if !spec.materials.contains_key(&s.material) {
            v.push(format!("string {}: unknown material '{}'", s.id, s.material));
        }
        for (end, node) in [("0", s.node_at_0), ("L", s.node_at_l)] {
            if spec.node(node).is_none() {
                v.push(format!("string {}: end {} references missing node {}", s.id, end, node));
            }
        }
        if s.node_at_0 == s.node_at_l {
            v.push(format!("string {}: both ends reference node {}", s.id, s.node_at_0));
        }
    }
    if !(spec.gravity >= 0.0) {
        v.push("gravity must be nonnegative".into());
    }
    for n in &spec.nodes {
        let ends: Vec<(usize, End)> = spec
            .strings
            .iter()
            .flat_map(|s| {
                let mut e = Vec::new();
                if s.node_at_0 == n.id {
                    e.push((s.id, End::Start));
                }
                if s.node_at_l == n.id {
                    e.push((s.id, End::Finish));
                }
                e
            })
            .collect();
        match &n.kind {
            NodeKind::ClampedSimple | NodeKind::ControlledSimple => {
                if ends.len() != 1 {
                    v.push(format!("simple node {} meets {} string ends (need 1)", n.id, ends.len()));
                }
            }
            NodeKind::Multiple(g) => {
                let d = g.size();
                if d == 0 {
                    v.push(format!("multiple node {}: empty spring graph", n.id));
                }
                if g.masses.len() != d || g.incidence.len() != d {
                    v.push(format!("multiple node {}: masses/incidence size differs from graph size {}", n.id, d));
                }
                for a in 0..d {
                    if g.adjacency[a].len() != d {
                        v.push(format!("multiple node {}: adjacency row {} has wrong length", n.id, a));
                        continue;
                    }
                    if g.adjacency[a][a] != 0 {
                        v.push(format!("multiple node {}: nonzero diagonal at {}", n.id, a));
                    }
                    for b in 0..d {
                        if g.adjacency[a][b] > 1 {
                            v.push(format!("multiple node {}: adjacency entry ({},{}) not 0/1", n.id, a, b));
                        }
                        if b < g.adjacency.len() && g.adjacency[b].len() == d && g.adjacency[a][b] != g.adjacency[b][a] {
                            v.push(format!("multiple node {}: adjacency not symmetric at ({},{})", n.id, a, b));
                        }
                    }
                }
                if !(g.stiffness > 0.0) {
                    v.push(format!("multiple node {}: stiffness must be positive", n.id));
                }
                for (a, m) in g.masses.iter().enumerate() {
                    if !(*m > 0.0) {
                        v.push(format!("multiple node {}: mass {} must be positive", n.id, a));
                    }
                }
                for e in &ends {
                    let hits = g.incidence.iter().filter(|x| *x == e).count();
                    if hits != 1 {
                        v.push(format!("multiple node {}: string {} end {:?} mapped {} times in incidence", n.id, e.0, e.1, hits));
                    }
                }
                for e in &g.incidence {
                    if !ends.contains(e) {
                        v.push(format!("multiple node {}: incidence lists string {} end {:?} which does not meet it", n.id, e.0, e.1));
                    }
                }
            }
        }
    }
    if v.is_empty() && !incidence_connected(spec) {
        v.push("string-node incidence graph is not connected".into());
    }
    ValidationReport { violations: v }
}

fn incidence_connected(spec: &NetworkSpec) -> bool {
    let n = spec.nodes.len();
    if n == 0 {
        return spec.strings.is_empty();
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        let id = spec.nodes[a].id;
        for s in &spec.strings {
            let other = if s.node_at_0 == id {
                Some(s.node_at_l)
            } else if s.node_at_l == id {
                Some(s.node_at_0)
            } else {
                None
            };
            if let Some(b) = other.and_then(|o| spec.node_index(o)) {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
    }
    seen.into_iter().all(|x| x)
}

fn classify(spec: &NetworkSpec) -> Topology {
    if !validate(spec).is_ok() {
        return Topology::General;
    }
    let multiples: Vec<&NodeSpec> = spec.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Multiple(_))).collect();
    if multiples.len() == 1 {
        let hub = multiples[0].id;
        let star = spec.strings.iter().all(|s| {
            s.node_at_0 == hub
                && matches!(spec.node(s.node_at_l).map(|n| &n.kind), Some(NodeKind::ClampedSimple | NodeKind::ControlledSimple))
        });
        if star {
            return Topology::Star;
        }
    }
    let degree =
        |id: usize| spec.strings.iter().filter(|s| s.node_at_0 == id).count() + spec.strings.iter().filter(|s| s.node_at_l == id).count();
    let degs: Vec<usize> = spec.nodes.iter().map(|n| degree(n.id)).collect();
    let ns = spec.strings.len();
    if ns >= 2 && spec.nodes.len() == ns && degs.iter().all(|&d| d == 2) {
        return Topology::Ring;
    }
    if spec.nodes.len() == ns + 1 && degs.iter().all(|&d| d <= 2) && degs.iter().filter(|&&d| d == 1).count() == 2 {
        return Topology::Chain;
    }
    Topology::General
}

/// Star with string ids `1..=n`, hub node id `0` and outer node id `i` for
/// string `i`. String 1 is clamped, the others carry controls. Spring edges
/// use 0-based local indices (local index `a` is string `a + 1`).
#[derive(Debug, Clone)]
pub struct StarParams {
    pub lengths: Vec<f64>,
    pub density: f64,
    pub h: f64,
    pub stiffness: f64,
    pub mass: f64,
    pub edges: Vec<(usize, usize)>,
    pub gravity: f64,
}

impl StarParams {
    pub fn uniform(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        StarParams { lengths: vec![1.0; n], density: 1.0, h: 1.0, stiffness: 1.0, mass: 0.05, edges, gravity: 0.0 }
    }

    pub fn build(&self) -> NetworkSpec {
        let n = self.lengths.len();
        let mut materials = BTreeMap::new();
        materials.insert("m".to_string(), MaterialLaw::hookean(self.h));
        let strings = (0..n)
            .map(|i| StringSpec {
                id: i + 1,
                length: self.lengths[i],
                density: self.density,
                material: "m".into(),
                node_at_0: 0,
                node_at_l: i + 1,
            })
            .collect();
        let graph =
            SpringGraph::from_edges(n, &self.edges, self.stiffness, vec![self.mass; n], (0..n).map(|i| (i + 1, End::Start)).collect());
        let mut nodes = vec![NodeSpec { id: 0, kind: NodeKind::Multiple(graph) }];
        for i in 0..n {
            let kind = if i == 0 { NodeKind::ClampedSimple } else { NodeKind::ControlledSimple };
            nodes.push(NodeSpec { id: i + 1, kind });
        }
        NetworkSpec::new(strings, nodes, materials, self.gravity)
    }
}
