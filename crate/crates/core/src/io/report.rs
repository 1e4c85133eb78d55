//! Plain-text reports for analysis, synthesis diagnostics and verification.

use std::fmt::Write;

use crate::control::{declared_controls, feasibility, Diagnostics, Feasibility, PlanVariant, VerificationReport};
use crate::network::{connected_components, degrees, laplacian, laplacian_int, laplacian_rank, NetworkSpec, NodeKind, RANK_TOL};

fn variant_name(v: PlanVariant) -> &'static str {
    match v {
        PlanVariant::FullRank => "full rank",
        PlanVariant::DamagedCase1 => "damaged, one spring neighbour",
        PlanVariant::DamagedCase2 => "damaged, several spring neighbours",
        PlanVariant::ComponentSplit => "component split",
    }
}

/// Junction structure and feasibility for the declared control placement.
pub fn analyze_report(spec: &NetworkSpec) -> String {
    let mut s = String::new();
    writeln!(s, "strings {} nodes {} topology {:?}", spec.strings.len(), spec.nodes.len(), spec.topology).unwrap();
    for node in &spec.nodes {
        let NodeKind::Multiple(g) = &node.kind else { continue };
        let members: Vec<String> = g.incidence.iter().map(|(sid, e)| format!("{sid}:{e:?}")).collect();
        writeln!(s, "junction {} members [{}] stiffness {}", node.id, members.join(", "), g.stiffness).unwrap();
        writeln!(s, "adjacency").unwrap();
        for row in &g.adjacency {
            let r: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(s, "  [{}]", r.join(" ")).unwrap();
        }
        let d: Vec<String> = degrees(g).iter().map(|v| v.to_string()).collect();
        writeln!(s, "degrees [{}]", d.join(" ")).unwrap();
        writeln!(s, "laplacian").unwrap();
        for row in laplacian_int(g) {
            let r: Vec<String> = row.iter().map(|v| format!("{v:>2}")).collect();
            writeln!(s, "  [{}]", r.join(" ")).unwrap();
        }
        let rank = laplacian_rank(&laplacian(g), RANK_TOL).map_or("undetermined".to_string(), |r| r.to_string());
        let comps = connected_components(g);
        let cs: Vec<String> = comps
            .iter()
            .map(|c| {
                let ids: Vec<String> = c.iter().map(|&a| g.incidence[a].0.to_string()).collect();
                format!("{{{}}}", ids.join(","))
            })
            .collect();
        writeln!(s, "rank {rank}, components {} {}", comps.len(), cs.join(" ")).unwrap();
    }
    let controls = declared_controls(spec);
    let c: Vec<String> = controls.iter().map(|n| n.to_string()).collect();
    match feasibility(spec, &controls) {
        Feasibility::Feasible(p) => {
            let pivot = p.pivot().map_or("none".to_string(), |i| spec.strings[i].id.to_string());
            writeln!(
                s,
                "controls [{}]: feasible ({}), clamped string {}, pivot string {}",
                c.join(" "),
                variant_name(p.variant),
                spec.strings[p.root].id,
                pivot
            )
            .unwrap();
        }
        Feasibility::Infeasible(reason) => writeln!(s, "controls [{}]: infeasible: {reason}", c.join(" ")).unwrap(),
    }
    s
}

pub fn diagnostics_report(spec: &NetworkSpec, d: &Diagnostics) -> String {
    let mut s = String::new();
    writeln!(s, "variant = \"{}\"", variant_name(d.plan.variant)).unwrap();
    writeln!(s, "laplacian_rank = {}", d.plan.rank).unwrap();
    writeln!(s, "clamped_string = {}", spec.strings[d.plan.root].id).unwrap();
    if let Some(p) = d.plan.pivot() {
        writeln!(s, "pivot_string = {}", spec.strings[p].id).unwrap();
    }
    for (i, t) in d.times.per_string.iter().enumerate() {
        writeln!(s, "traveling_time_{} = {t:.17e}", spec.strings[i].id).unwrap();
    }
    writeln!(s, "t_bar = {:.17e}", d.times.t_bar).unwrap();
    writeln!(s, "t_star = {:.17e}", d.t_star).unwrap();
    writeln!(s, "t_f = {:.17e}", d.t_f).unwrap();
    writeln!(s, "dt = {:.17e}", d.dt).unwrap();
    writeln!(s, "steps = {}", d.steps).unwrap();
    writeln!(s, "interface_residual = {:.6e}", d.interface_residual).unwrap();
    writeln!(s, "interface_residual_time = {:.6e}", d.interface_residual_time).unwrap();
    for (id, a, b) in &d.trace_mismatch {
        writeln!(s, "trace_mismatch_{id} = [{a:.6e}, {b:.6e}]").unwrap();
    }
    for (id, a, b) in &d.rail_velocity_mismatch {
        writeln!(s, "rail_velocity_mismatch_{id} = [{a:.6e}, {b:.6e}]").unwrap();
    }
    for (id, r) in &d.smoothness {
        writeln!(s, "fourth_difference_ratio_{id} = {r:.6e}").unwrap();
    }
    writeln!(s, "compatibility = [{:.6e}, {:.6e}]", d.compat_start, d.compat_end).unwrap();
    for a in &d.advisories {
        writeln!(s, "# advisory: {a}").unwrap();
    }
    s
}

/// TOML rendering of a verification report.
pub fn verification_report(r: &VerificationReport) -> String {
    toml::to_string(r).expect("report serializes")
}
