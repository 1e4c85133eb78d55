//! Excess energy of a perturbation about the equilibrium.

use crate::material::MaterialLaw;
use crate::numerics::simpson_weights;
use crate::Vec3;

use super::{Medium, State};

/// `W = V(|v + p|) - V(|v|) - G(v) . p`, the strain energy density in excess
/// of its linearization about `v`.
fn excess_density(law: &MaterialLaw, v: &Vec3, g0: &Vec3, p: &Vec3) -> f64 {
    let s0 = v.norm();
    let w = v + p;
    let s1 = w.norm();
    let dv = match law {
        MaterialLaw::Hookean { h } => {
            let ds = (2.0 * v.dot(p) + p.norm_squared()) / (s1 + s0);
            0.5 * h * ds * (s1 + s0 - 2.0)
        }
        _ => law.potential(s1) - law.potential(s0),
    };
    dv - g0.dot(p)
}

/// Kinetic plus excess strain energy on every string (composite Simpson), plus
/// junction mass kinetic energy and spring energy of the perturbation. The
/// equilibrium part of the spring energy and all terms linear in the
/// perturbation are removed; without boundary work the result is conserved.
pub fn total_energy(medium: &Medium, state: &State) -> f64 {
    let mut e = 0.0;
    for (m, s) in medium.strings.iter().zip(&state.strings) {
        let w = simpson_weights(m.n, m.dx);
        for j in 0..=m.n {
            let dens = 0.5 * m.rho * s.q[j].norm_squared() + excess_density(&m.law, &m.rex[j], &m.g0[j], &s.p[j]);
            e += w[j] * dens;
        }
    }
    for jn in &medium.junctions {
        let ends: Vec<(Vec3, Vec3)> = jn
            .members
            .iter()
            .map(|&(i, end)| {
                let k = medium.strings[i].end_index(end);
                (state.strings[i].r[k], state.strings[i].q[k])
            })
            .collect();
        for (a, (_, q)) in ends.iter().enumerate() {
            e += 0.5 * jn.masses[a] * q.norm_squared();
        }
        for a in 0..ends.len() {
            for b in (a + 1)..ends.len() {
                if jn.lap[a][b] != 0.0 {
                    e += 0.5 * jn.stiffness * (-jn.lap[a][b]) * (ends[a].0 - ends[b].0).norm_squared();
                }
            }
        }
    }
    e
}
