//! TOML network description with sections `materials`, `strings`, `nodes`
//! and `springs`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::material::MaterialLaw;
use crate::network::{End, NetworkSpec, NodeKind, NodeSpec, SpringGraph, StringSpec};
use crate::Vec3;

use super::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Hookean,
    /// Registered programmatically and referenced by id.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    pub id: String,
    pub kind: MaterialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringEntry {
    pub id: usize,
    pub length: f64,
    pub density: f64,
    pub material: String,
    pub node_at_0: usize,
    pub node_at_l: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKindTag {
    Clamped,
    Controlled,
    Multiple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndTag {
    Start,
    Finish,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberEntry {
    pub string: usize,
    pub end: EndTag,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: usize,
    pub kind: NodeKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<f64>,
    /// Local spring-graph vertices in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<MemberEntry>,
}

/// A spring between two members of a multiple node, given by local index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringEntry {
    pub node: usize,
    pub between: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default)]
    pub gravity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity_dir: Option<[f64; 3]>,
    pub materials: Vec<MaterialEntry>,
    pub strings: Vec<StringEntry>,
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub springs: Vec<SpringEntry>,
}

fn end_of(tag: EndTag) -> End {
    match tag {
        EndTag::Start => End::Start,
        EndTag::Finish => End::Finish,
    }
}

impl NetworkFile {
    pub fn parse(text: &str) -> Result<NetworkFile, IoError> {
        toml::from_str(text).map_err(|e| IoError::Parse { what: "network".into(), message: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("network file serializes")
    }

    /// Builds and validates the spec. Custom materials are looked up in `custom`.
    pub fn build(&self, custom: &BTreeMap<String, MaterialLaw>) -> Result<NetworkSpec, IoError> {
        let mut materials = BTreeMap::new();
        for m in &self.materials {
            let law = match m.kind {
                MaterialKind::Hookean => {
                    let h = m.h.ok_or_else(|| IoError::Invalid(format!("material {}: hookean needs h", m.id)))?;
                    MaterialLaw::hookean(h)
                }
                MaterialKind::Custom => {
                    custom.get(&m.id).cloned().ok_or_else(|| IoError::Invalid(format!("material {}: custom law not registered", m.id)))?
                }
            };
            if materials.insert(m.id.clone(), law).is_some() {
                return Err(IoError::Invalid(format!("material {} defined twice", m.id)));
            }
        }
        let strings = self
            .strings
            .iter()
            .map(|s| StringSpec {
                id: s.id,
                length: s.length,
                density: s.density,
                material: s.material.clone(),
                node_at_0: s.node_at_0,
                node_at_l: s.node_at_l,
            })
            .collect();
        let mut nodes = Vec::new();
        for n in &self.nodes {
            let kind = match n.kind {
                NodeKindTag::Clamped => NodeKind::ClampedSimple,
                NodeKindTag::Controlled => NodeKind::ControlledSimple,
                NodeKindTag::Multiple => {
                    let stiffness = n.stiffness.ok_or_else(|| IoError::Invalid(format!("node {}: multiple node needs stiffness", n.id)))?;
                    let size = n.members.len();
                    let mut edges = Vec::new();
                    for s in self.springs.iter().filter(|s| s.node == n.id) {
                        let [a, b] = s.between;
                        if a >= size || b >= size || a == b {
                            return Err(IoError::Invalid(format!("node {}: spring {:?} is not between two members", n.id, s.between)));
                        }
                        edges.push((a, b));
                    }
                    NodeKind::Multiple(SpringGraph::from_edges(
                        size,
                        &edges,
                        stiffness,
                        n.members.iter().map(|m| m.mass).collect(),
                        n.members.iter().map(|m| (m.string, end_of(m.end))).collect(),
                    ))
                }
            };
            nodes.push(NodeSpec { id: n.id, kind });
        }
        for s in &self.springs {
            if !self.nodes.iter().any(|n| n.id == s.node && n.kind == NodeKindTag::Multiple) {
                return Err(IoError::Invalid(format!("spring refers to node {}, which is not a multiple node", s.node)));
            }
        }
        let mut spec = NetworkSpec::new(strings, nodes, materials, self.gravity);
        if let Some(e) = self.gravity_dir {
            let e = Vec3::from(e);
            if !(e.norm() > 0.0) {
                return Err(IoError::Invalid("gravity_dir must be nonzero".into()));
            }
            spec.gravity_dir = e.normalize();
        }
        let report = spec.validate();
        if !report.is_ok() {
            return Err(IoError::Invalid(report.violations.join("; ")));
        }
        Ok(spec)
    }

    pub fn from_spec(spec: &NetworkSpec) -> NetworkFile {
        let materials = spec
            .materials
            .iter()
            .map(|(id, law)| match law {
                MaterialLaw::Hookean { h } => MaterialEntry { id: id.clone(), kind: MaterialKind::Hookean, h: Some(*h) },
                MaterialLaw::Custom(_) => MaterialEntry { id: id.clone(), kind: MaterialKind::Custom, h: None },
            })
            .collect();
        let strings = spec
            .strings
            .iter()
            .map(|s| StringEntry {
                id: s.id,
                length: s.length,
                density: s.density,
                material: s.material.clone(),
                node_at_0: s.node_at_0,
                node_at_l: s.node_at_l,
            })
            .collect();
        let mut springs = Vec::new();
        let nodes = spec
            .nodes
            .iter()
            .map(|n| match &n.kind {
                NodeKind::ClampedSimple => NodeEntry { id: n.id, kind: NodeKindTag::Clamped, stiffness: None, members: Vec::new() },
                NodeKind::ControlledSimple => NodeEntry { id: n.id, kind: NodeKindTag::Controlled, stiffness: None, members: Vec::new() },
                NodeKind::Multiple(g) => {
                    springs.extend(g.edges().into_iter().map(|(a, b)| SpringEntry { node: n.id, between: [a, b] }));
                    let members = g
                        .incidence
                        .iter()
                        .zip(&g.masses)
                        .map(|(&(string, end), &mass)| MemberEntry {
                            string,
                            end: if end == End::Start { EndTag::Start } else { EndTag::Finish },
                            mass,
                        })
                        .collect();
                    NodeEntry { id: n.id, kind: NodeKindTag::Multiple, stiffness: Some(g.stiffness), members }
                }
            })
            .collect();
        let gravity_dir = if spec.gravity_dir == Vec3::z() { None } else { Some(spec.gravity_dir.into()) };
        NetworkFile { gravity: spec.gravity, gravity_dir, materials, strings, nodes, springs }
    }
}
