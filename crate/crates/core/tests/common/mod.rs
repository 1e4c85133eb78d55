#![allow(dead_code)]

use std::collections::BTreeMap;

use stringnet::equilibrium::{star_affine_equilibrium, symmetric_tangents, zero_gravity_equilibrium, EquilibriumConfig};
use stringnet::material::MaterialLaw;
use stringnet::network::{NetworkSpec, NodeKind, NodeSpec, StarParams, StringSpec};
use stringnet::profile::{Shape, StringData};
use stringnet::Vec3;

pub const STRETCH: f64 = 1.25;

/// Uniform Hookean star (h = rho = L = 1) with the given spring edges.
pub fn star(n: usize, edges: Option<Vec<(usize, usize)>>) -> (NetworkSpec, EquilibriumConfig) {
    let mut p = StarParams::uniform(n);
    if let Some(e) = edges {
        p.edges = e;
    }
    let spec = p.build();
    let eq = star_affine_equilibrium(&spec, &symmetric_tangents(n, STRETCH), Vec3::zeros()).unwrap();
    (spec, eq)
}

/// One Hookean string along `x`, clamped at both ends.
pub fn clamped_string() -> (NetworkSpec, EquilibriumConfig) {
    let mut m = BTreeMap::new();
    m.insert("a".to_string(), MaterialLaw::hookean(1.0));
    let spec = NetworkSpec::new(
        vec![StringSpec { id: 1, length: 1.0, density: 1.0, material: "a".into(), node_at_0: 1, node_at_l: 2 }],
        vec![NodeSpec { id: 1, kind: NodeKind::ClampedSimple }, NodeSpec { id: 2, kind: NodeKind::ClampedSimple }],
        m,
        0.0,
    );
    let eq = zero_gravity_equilibrium(&spec, &[Vec3::new(STRETCH, 0.0, 0.0)], &[Vec3::zeros()]).unwrap();
    (spec, eq)
}

pub fn bump(amplitude: Vec3, center: f64, half_width: f64) -> Shape {
    Shape::Bump { amplitude, center, half_width }
}

/// Data on string `k` only, zero elsewhere.
pub fn data_on(n: usize, k: usize, d: StringData) -> Vec<StringData> {
    let mut v = vec![StringData::zero(); n];
    v[k] = d;
    v
}
