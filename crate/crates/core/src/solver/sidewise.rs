//! Sidewise integration: `x` is the evolution variable and `t` the transverse
//! axis. The state is `(sigma, q)` with `sigma = G(R^e_x + r_x) - G(R^e_x)`,
//! governed by `sigma_x = rho q_t`, `q_x = (r_x)_t`.

use crate::equilibrium::EquilibriumConfig;
use crate::material::{characteristic_frame, default_skew_axis, invert_stress, stress, DELTA_STRETCH};
use crate::network::{End, NetworkSpec};
use crate::profile::Shape;
use crate::Vec3;

use super::trace::TraceRecord;
use super::SolverError;

pub struct SidewiseInput<'a> {
    /// String index.
    pub string: usize,
    /// End carrying the Cauchy data; the march goes to the opposite end.
    pub from: End,
    /// `(r, r_t, r_x)` at `from` on a uniform time grid.
    pub cauchy: &'a TraceRecord,
    /// Position profiles imposed on the rails `t = t0` and `t = t_end`.
    pub rail_start: &'a Shape,
    pub rail_end: &'a Shape,
    pub cfl: f64,
    /// Lower bound on the wave speeds met during the march.
    pub speed_floor: f64,
    /// Number of intermediate stations to keep.
    pub stations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub x: f64,
    pub r: Vec<Vec3>,
    pub q: Vec<Vec3>,
    pub p: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct SidewiseResult {
    /// Trace at the end opposite to `from`.
    pub far: TraceRecord,
    /// Stations in marching order, including both ends.
    pub stations: Vec<Station>,
    pub steps: usize,
    pub h: f64,
}

pub fn sidewise_solve(spec: &NetworkSpec, eq: &EquilibriumConfig, input: &SidewiseInput) -> Result<SidewiseResult, SolverError> {
    let i = input.string;
    let st = &spec.strings[i];
    let law = spec.law(i);
    let rho = st.density;
    let e = &eq.strings[i];
    let c = input.cauchy;
    let kk = c.len() - 1;
    if kk < 3 || c.r.len() != kk + 1 || c.rt.len() != kk + 1 || c.rx.len() != kk + 1 {
        return Err(SolverError::Config("sidewise Cauchy data needs r, r_t and r_x on at least 4 samples".into()));
    }
    if !(input.cfl > 0.0 && input.cfl < 1.0 && input.speed_floor > 0.0) {
        return Err(SolverError::Config("sidewise CFL factor or speed floor invalid".into()));
    }
    let dt = c.dt;
    let l = st.length;
    let steps = (l / (input.cfl * dt * input.speed_floor)).ceil() as usize;
    let (x0, sign) = match input.from {
        End::Start => (0.0, 1.0),
        End::Finish => (l, -1.0),
    };
    let h = sign * l / steps as f64;
    let lam = h / dt;
    let axis = default_skew_axis(&e.strain(0.0));
    let g_of = |v: &Vec3| stress(law, v).map_err(|source| SolverError::Material { string: st.id, source });
    let xat = |m: usize| if m == steps { l - x0 } else { x0 + m as f64 * h };
    let bad = |k: usize, v: f64| {
        if v.is_finite() {
            SolverError::Stretch { string: st.id, index: k, t: c.time(k), stretch: v }
        } else {
            SolverError::NonFinite { string: st.id, index: k, t: c.time(k) }
        }
    };
    // p = G^{-1}(g0 + sigma) - rex
    let strain_of = |rex: &Vec3, g0: &Vec3, sigma: &Vec3, k: usize| -> Result<Vec3, SolverError> {
        if *sigma == Vec3::zeros() {
            // keeps the trivial solution exact
            return Ok(Vec3::zeros());
        }
        let v = invert_stress(law, &(g0 + sigma)).map_err(|_| bad(k, f64::NAN))?;
        let s = v.norm();
        if !(s >= 1.0 + DELTA_STRETCH) {
            return Err(bad(k, s));
        }
        Ok(v - rex)
    };

    let rex0 = e.strain(x0);
    let g00 = g_of(&rex0)?;
    let mut sigma: Vec<Vec3> = c.rx.iter().map(|p| g_of(&(rex0 + p)).map(|g| g - g00)).collect::<Result<_, _>>()?;
    let mut q = c.rt.clone();
    let mut p = c.rx.clone();
    let mut r = c.r.clone();
    let every = if input.stations == 0 { usize::MAX } else { steps.div_ceil(input.stations + 1).max(1) };
    let mut stations = vec![Station { x: x0, r: r.clone(), q: q.clone(), p: p.clone() }];

    let mut sh = vec![Vec3::zeros(); kk];
    let mut qh = vec![Vec3::zeros(); kk];
    let mut ph = vec![Vec3::zeros(); kk];
    for m in 0..steps {
        let x = xat(m);
        let xn = xat(m + 1);
        let xm = 0.5 * (x + xn);
        let rex = e.strain(x);
        let (rex_m, rex_n) = (e.strain(xm), e.strain(xn));
        let (g0_m, g0_n) = (g_of(&rex_m)?, g_of(&rex_n)?);
        for k in 0..kk {
            sh[k] = (sigma[k] + sigma[k + 1]) * 0.5 + (q[k + 1] - q[k]) * (0.5 * lam * rho);
            qh[k] = (q[k] + q[k + 1]) * 0.5 + (p[k + 1] - p[k]) * (0.5 * lam);
            ph[k] = strain_of(&rex_m, &g0_m, &sh[k], k)?;
        }
        let mut sn = sigma.clone();
        let mut qn = q.clone();
        for k in 1..kk {
            sn[k] = sigma[k] + (qh[k] - qh[k - 1]) * (lam * rho);
            qn[k] = q[k] + (ph[k] - ph[k - 1]) * lam;
        }
        // rails: sigma from the imposed position, q from the outgoing mode
        for (k, rail, s_out, dir) in [(0usize, input.rail_start, sign, 1isize), (kk, input.rail_end, -sign, -1isize)] {
            let frame =
                characteristic_frame(law, rho, &(rex + p[k]), &axis).map_err(|source| SolverError::Material { string: st.id, source })?;
            let qt = frame.q.transpose();
            let eta_at = |o: isize| {
                let j = (k as isize + dir * o) as usize;
                qt * sigma[j] + (qt * q[j]).component_mul(&frame.mu) * (s_out * rho)
            };
            let (f0, f1, f2) = (eta_at(0), eta_at(1), eta_at(2));
            let slope = rail.slope(xn);
            let sig = g_of(&(rex_n + slope))? - g0_n;
            let sig_hat = qt * sig;
            let mut q_hat = Vec3::zeros();
            for cc in 0..3 {
                let a = h.abs() / (frame.mu[cc] * dt);
                let eta = f0[cc] * 0.5 * (a - 1.0) * (a - 2.0) + f1[cc] * a * (2.0 - a) + f2[cc] * 0.5 * a * (a - 1.0);
                q_hat[cc] = (eta - sig_hat[cc]) / (s_out * rho * frame.mu[cc]);
            }
            sn[k] = sig;
            qn[k] = frame.q * q_hat;
        }
        let mut ratio: f64 = 0.0;
        let mut pn = Vec::with_capacity(kk + 1);
        for k in 0..=kk {
            let pk = strain_of(&rex_n, &g0_n, &sn[k], k)?;
            let (m1, m2) = law.speeds(rho, (rex_n + pk).norm());
            ratio = ratio.max(h.abs() / (dt * m1.min(m2)));
            pn.push(pk);
        }
        if ratio > input.cfl * (1.0 + 1e-9) {
            return Err(SolverError::Cfl { t: xn, ratio, limit: input.cfl });
        }
        for k in 0..=kk {
            r[k] += (p[k] + pn[k]) * (0.5 * h);
        }
        r[0] = input.rail_start.value(xn);
        r[kk] = input.rail_end.value(xn);
        sigma = sn;
        q = qn;
        p = pn;
        if (m + 1) % every == 0 || m + 1 == steps {
            stations.push(Station { x: xn, r: r.clone(), q: q.clone(), p: p.clone() });
        }
    }
    let far_end = match input.from {
        End::Start => End::Finish,
        End::Finish => End::Start,
    };
    let far = TraceRecord { string: st.id, end: far_end, t0: c.t0, dt, r, rt: q, rx: p, order: c.order };
    Ok(SidewiseResult { far, stations, steps, h })
}
