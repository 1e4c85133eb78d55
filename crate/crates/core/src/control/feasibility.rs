//! Controllability gating from the junction spring graph.

use std::collections::BTreeSet;

use crate::network::{connected_components, laplacian, laplacian_rank, NetworkSpec, NodeKind, Topology, RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanVariant {
    /// Complete spring graph.
    FullRank,
    /// Connected, incomplete, the clamped string has one spring neighbour.
    DamagedCase1,
    /// Connected, incomplete, the clamped string has several spring neighbours.
    DamagedCase2,
    /// Disconnected spring graph with a control in every component.
    ComponentSplit,
}

/// Transfer recipe for one spring-graph component (string indices).
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentPlan {
    pub strings: Vec<usize>,
    /// The clamped string, if it lies in this component.
    pub root: Option<usize>,
    /// Spring neighbours of the root.
    pub neighbours: Vec<usize>,
    /// String whose junction position is solved from the root's equation.
    pub pivot: Option<usize>,
    /// Strings whose junction positions are free extensions.
    pub free: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlan {
    pub variant: PlanVariant,
    pub rank: usize,
    pub components: Vec<ComponentPlan>,
    /// Clamped string index.
    pub root: usize,
    pub controlled: Vec<usize>,
}

impl TransferPlan {
    pub fn pivot(&self) -> Option<usize> {
        self.components.iter().find_map(|c| c.pivot)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(TransferPlan),
    Infeasible(String),
}

fn ids(spec: &NetworkSpec, idx: &[usize]) -> String {
    let v: Vec<String> = idx.iter().map(|&i| spec.strings[i].id.to_string()).collect();
    format!("{{{}}}", v.join(","))
}

/// Decides whether the star can be steered with controls at `controlled`
/// (simple node ids) and, if so, how junction information is transferred.
/// Strings whose outer node is not controlled count as clamped.
pub fn feasibility(spec: &NetworkSpec, controlled: &BTreeSet<usize>) -> Feasibility {
    if spec.topology != Topology::Star {
        return Feasibility::Infeasible("control synthesis requires a star topology".into());
    }
    let graph = spec.hub_graph().expect("star has a hub");
    let n = graph.size();
    let string_of: Vec<usize> = graph.incidence.iter().map(|&(sid, _)| spec.string_index(sid).unwrap()).collect();
    let outer = |i: usize| {
        let s = &spec.strings[i];
        let hub = spec.nodes[spec.star_hub().unwrap()].id;
        if s.node_at_0 == hub {
            s.node_at_l
        } else {
            s.node_at_0
        }
    };
    let is_controlled: Vec<bool> = string_of
        .iter()
        .map(|&i| controlled.contains(&outer(i)) && matches!(spec.node(outer(i)).map(|n| &n.kind), Some(NodeKind::ControlledSimple)))
        .collect();
    let clamped: Vec<usize> = (0..n).filter(|&a| !is_controlled[a]).collect();
    if clamped.len() > 1 {
        let c: Vec<usize> = clamped.iter().map(|&a| string_of[a]).collect();
        return Feasibility::Infeasible(format!(
            "strings {} are all uncontrolled; the construction allows one clamped string",
            ids(spec, &c)
        ));
    }
    let root_local = match clamped.first() {
        Some(&a) => a,
        None => return Feasibility::Infeasible("no clamped string: the construction starts from one clamped string".into()),
    };
    let rank = laplacian_rank(&laplacian(graph), RANK_TOL).unwrap_or(0);
    let comps = connected_components(graph);
    let mut components = Vec::new();
    for comp in &comps {
        let strings: Vec<usize> = comp.iter().map(|&a| string_of[a]).collect();
        if !comp.iter().any(|&a| is_controlled[a]) {
            return Feasibility::Infeasible(format!("component {} unreachable: it holds no controlled string", ids(spec, &strings)));
        }
        if comp.contains(&root_local) {
            let neighbours: Vec<usize> = (0..n).filter(|&b| graph.adjacency[root_local][b] != 0).map(|b| string_of[b]).collect();
            let complete = comp.iter().all(|&a| comp.iter().all(|&b| a == b || graph.adjacency[a][b] != 0));
            let mut sorted = neighbours.clone();
            sorted.sort_by_key(|&i| spec.strings[i].id);
            let pivot = if complete || sorted.len() == 1 { sorted[0] } else { *sorted.last().unwrap() };
            let root = string_of[root_local];
            let free = strings.iter().copied().filter(|&i| i != root && i != pivot).collect();
            components.push(ComponentPlan { strings, root: Some(root), neighbours: sorted, pivot: Some(pivot), free });
        } else {
            components.push(ComponentPlan { free: strings.clone(), strings, root: None, neighbours: Vec::new(), pivot: None });
        }
    }
    let variant = if comps.len() > 1 {
        PlanVariant::ComponentSplit
    } else if graph.is_complete() {
        PlanVariant::FullRank
    } else {
        let c = components.iter().find(|c| c.root.is_some()).unwrap();
        if c.neighbours.len() == 1 {
            PlanVariant::DamagedCase1
        } else {
            PlanVariant::DamagedCase2
        }
    };
    let controlled = (0..n).filter(|&a| is_controlled[a]).map(|a| string_of[a]).collect();
    Feasibility::Feasible(TransferPlan { variant, rank, components, root: string_of[root_local], controlled })
}

/// Controlled node ids declared in the network.
pub fn declared_controls(spec: &NetworkSpec) -> BTreeSet<usize> {
    spec.nodes.iter().filter(|n| matches!(n.kind, NodeKind::ControlledSimple)).map(|n| n.id).collect()
}
