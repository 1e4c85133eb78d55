//! Trace bridging and the junction transfer that extends the clamped string's
//! junction trace to every other string.

use crate::equilibrium::EquilibriumConfig;
use crate::material::{invert_stress, stress, DELTA_STRETCH};
use crate::network::{laplacian_int, End, NetworkSpec};
use crate::numerics::{derivative, HermiteBridge};
use crate::solver::TraceRecord;
use crate::Vec3;

use super::feasibility::TransferPlan;
use super::ControlError;

/// Joins `left` (samples `0..=kl` of the output) and `right` (the last
/// `right.len()` samples of a record with `total` samples) by Hermite bridges
/// of degree `2 order + 1` in the `r` and `r_x` channels. On the bridge `r_t`
/// is the bridge derivative of `r`. Native samples are copied unchanged.
pub fn connect_traces(left: &TraceRecord, right: &TraceRecord, total: usize, order: usize) -> Result<TraceRecord, ControlError> {
    let kl = left.len() - 1;
    let kr = total - right.len();
    if kr < kl + order + 1 {
        return Err(ControlError::Gap(format!("bridge gap of {} samples is shorter than {} samples", kr.saturating_sub(kl), order + 1)));
    }
    let dt = left.dt;
    let (ta, tb) = (left.time(kl), left.time(kr));
    let bridge = |strain: bool| -> Option<HermiteBridge> {
        let (lv, rv) = if strain { (&left.rx, &right.rx) } else { (&left.r, &right.r) };
        if lv.is_empty() || rv.is_empty() {
            return None;
        }
        let ld = left.derivs(strain, 0..kl + 1, kl, order);
        let rd = right.derivs(strain, 0..right.len(), 0, order);
        Some(HermiteBridge::new(ta, tb, &ld, &rd))
    };
    let br = bridge(false);
    let bx = bridge(true);
    let mut out = TraceRecord::empty(left.string, left.end, left.t0, dt);
    out.order = order;
    for k in 0..total {
        let t = left.time(k);
        let pick = |native_l: &Vec<Vec3>, native_r: &Vec<Vec3>, b: &Option<HermiteBridge>, d: usize| -> Option<Vec3> {
            if k <= kl {
                native_l.get(k).copied()
            } else if k >= kr {
                native_r.get(k - kr).copied()
            } else {
                b.as_ref().map(|b| b.eval(t, d))
            }
        };
        if let Some(v) = pick(&left.r, &right.r, &br, 0) {
            out.r.push(v);
        }
        if let Some(v) = pick(&left.rt, &right.rt, &br, 1) {
            out.rt.push(v);
        }
        if let Some(v) = pick(&left.rx, &right.rx, &bx, 0) {
            out.rx.push(v);
        }
    }
    Ok(out)
}

/// Static data of the junction equations of a star hub.
pub(crate) struct HubEquations {
    /// `(string index, end)` per local index.
    pub members: Vec<(usize, End)>,
    pub lap: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
    pub stiffness: f64,
    pub rex: Vec<Vec3>,
    pub g0: Vec<Vec3>,
}

impl HubEquations {
    pub fn new(spec: &NetworkSpec, eq: &EquilibriumConfig) -> Result<HubEquations, ControlError> {
        let g = spec.hub_graph().ok_or(ControlError::NotStar)?;
        let members: Vec<(usize, End)> = g.incidence.iter().map(|&(sid, e)| (spec.string_index(sid).unwrap(), e)).collect();
        let rex: Vec<Vec3> = members.iter().map(|&(i, e)| eq.end_strain(spec, i, e)).collect();
        let g0 = members
            .iter()
            .zip(&rex)
            .map(|(&(i, _), v)| stress(spec.law(i), v).map_err(|e| ControlError::Transfer(e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(HubEquations {
            members,
            lap: laplacian_int(g).into_iter().map(|r| r.into_iter().map(|v| v as f64).collect()).collect(),
            masses: g.masses.clone(),
            stiffness: g.stiffness,
            rex,
            g0,
        })
    }

    pub fn local_of(&self, string: usize) -> usize {
        self.members.iter().position(|m| m.0 == string).unwrap()
    }
}

/// Max over time and junction rows of `|m r_tt + eps F(r_x) + kappa (L r)|`,
/// with `r_tt` by fourth-order differences. `traces` holds the junction trace
/// of every string, indexed by string. Returns the residual and its time.
pub fn interface_residual(spec: &NetworkSpec, eq: &EquilibriumConfig, traces: &[TraceRecord]) -> Result<(f64, f64), ControlError> {
    let hub = HubEquations::new(spec, eq)?;
    let d = hub.members.len();
    let dt = traces[hub.members[0].0].dt;
    let acc: Vec<Vec<Vec3>> = hub.members.iter().map(|&(i, _)| derivative(&traces[i].r, dt, 2, 4)).collect();
    let k_len = traces[hub.members[0].0].len();
    let mut worst = (0.0, traces[hub.members[0].0].t0);
    for k in 0..k_len {
        for a in 0..d {
            let (i, end) = hub.members[a];
            let law = spec.law(i);
            let f = stress(law, &(hub.rex[a] + traces[i].rx[k])).map_err(|e| ControlError::Transfer(e.to_string()))? - hub.g0[a];
            let lr: Vec3 = (0..d).map(|b| traces[hub.members[b].0].r[k] * hub.lap[a][b]).sum();
            let res = (acc[a][k] * hub.masses[a] + f * end.epsilon() + lr * hub.stiffness).norm();
            if res > worst.0 {
                worst = (res, traces[i].time(k));
            }
        }
    }
    Ok(worst)
}

/// Inputs of the junction transfer. Traces are junction-end records indexed
/// by string; `forward` covers `[0, T_f]`, `backward` covers `[T - T_f, T]`,
/// and `k_star` is the number of steps in `[0, T*]`.
pub struct TransferInput<'a> {
    pub spec: &'a NetworkSpec,
    pub eq: &'a EquilibriumConfig,
    pub plan: &'a TransferPlan,
    pub root: &'a TraceRecord,
    pub forward: &'a [TraceRecord],
    pub backward: &'a [TraceRecord],
    pub k_star: usize,
    pub total: usize,
}

/// Junction traces `(r, r_t, r_x)` for every string on `[0, T]`; the root
/// entry is the given root trace.
pub fn junction_transfer(input: &TransferInput) -> Result<Vec<TraceRecord>, ControlError> {
    let spec = input.spec;
    let hub = HubEquations::new(spec, input.eq)?;
    let d = hub.members.len();
    let total = input.total;
    let dt = input.root.dt;
    let ks = input.k_star;
    let mut pos: Vec<Option<Vec<Vec3>>> = vec![None; spec.strings.len()];
    pos[input.plan.root] = Some(input.root.r.clone());
    let window = |tr: &TraceRecord, k0: usize, k1: usize| tr.window(k0, k1);
    for comp in &input.plan.components {
        for &i in &comp.free {
            let f = &input.forward[i];
            let b = &input.backward[i];
            let left = window(f, 0, ks);
            let right = window(b, b.len() - 1 - ks, b.len() - 1);
            pos[i] = Some(connect_traces(&left, &right, total, 3)?.r);
        }
    }
    for comp in &input.plan.components {
        let (Some(root), Some(pivot)) = (comp.root, comp.pivot) else { continue };
        let a = hub.local_of(root);
        let ap = hub.local_of(pivot);
        let (_, end) = hub.members[a];
        let law = spec.law(root);
        let acc = derivative(&input.root.r, dt, 2, 4);
        let mut out = Vec::with_capacity(total);
        for k in 0..total {
            let f = stress(law, &(hub.rex[a] + input.root.rx[k])).map_err(|e| ControlError::Transfer(e.to_string()))? - hub.g0[a];
            let mut rhs = acc[k] * hub.masses[a] + f * end.epsilon();
            for b in 0..d {
                if b != ap {
                    let r = pos[hub.members[b].0].as_ref().expect("non-pivot positions known")[k];
                    rhs += r * (hub.lap[a][b] * hub.stiffness);
                }
            }
            out.push(-rhs / (hub.stiffness * hub.lap[a][ap]));
        }
        pos[pivot] = Some(out);
    }
    let positions: Vec<Vec<Vec3>> = pos
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| ControlError::Transfer(format!("string {} received no junction position", spec.strings[i].id))))
        .collect::<Result<_, _>>()?;
    let mut result = Vec::with_capacity(spec.strings.len());
    for i in 0..spec.strings.len() {
        if i == input.plan.root {
            result.push(input.root.clone());
            continue;
        }
        let a = hub.local_of(i);
        let (_, end) = hub.members[a];
        let law = spec.law(i);
        let acc = derivative(&positions[i], dt, 2, 4);
        let mut rx = Vec::with_capacity(total);
        for k in 0..total {
            let lr: Vec3 = (0..d).map(|b| positions[hub.members[b].0][k] * hub.lap[a][b]).sum();
            let f = -(acc[k] * hub.masses[a] + lr * hub.stiffness) * end.epsilon();
            if f == Vec3::zeros() {
                rx.push(Vec3::zeros());
                continue;
            }
            let v = invert_stress(law, &(hub.g0[a] + f)).map_err(|_| {
                ControlError::Transfer(format!("string {}: stress inversion failed at t = {:.6}", spec.strings[i].id, input.root.time(k)))
            })?;
            if v.norm() < 1.0 + DELTA_STRETCH {
                return Err(ControlError::Transfer(format!(
                    "string {}: junction strain leaves the stretched regime at t = {:.6}",
                    spec.strings[i].id,
                    input.root.time(k)
                )));
            }
            rx.push(v - hub.rex[a]);
        }
        let mut tr = TraceRecord::empty(spec.strings[i].id, end, input.root.t0, dt);
        tr.r = positions[i].clone();
        tr.rx = rx;
        tr.velocity_from_position();
        tr.order = 2;
        result.push(tr);
    }
    Ok(result)
}
