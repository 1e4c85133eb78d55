//! Boundary traces sampled uniformly in time.

use crate::network::End;
use crate::numerics::{derivative, derivatives_at};
use crate::Vec3;

/// Cauchy data `(r, r_t, r_x)` along one string end. Channels not carried are
/// left empty. `order` is the number of derivatives the data is meant to have.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub string: usize,
    pub end: End,
    pub t0: f64,
    pub dt: f64,
    pub r: Vec<Vec3>,
    pub rt: Vec<Vec3>,
    pub rx: Vec<Vec3>,
    pub order: usize,
}

impl TraceRecord {
    pub fn empty(string: usize, end: End, t0: f64, dt: f64) -> Self {
        TraceRecord { string, end, t0, dt, r: Vec::new(), rt: Vec::new(), rx: Vec::new(), order: 0 }
    }

    pub fn len(&self) -> usize {
        self.r.len().max(self.rt.len()).max(self.rx.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn push(&mut self, r: Vec3, rt: Vec3, rx: Vec3) {
        self.r.push(r);
        self.rt.push(rt);
        self.rx.push(rx);
    }

    /// Samples `k0..=k1`.
    pub fn window(&self, k0: usize, k1: usize) -> TraceRecord {
        let cut = |v: &Vec<Vec3>| if v.is_empty() { Vec::new() } else { v[k0..=k1].to_vec() };
        TraceRecord { t0: self.time(k0), r: cut(&self.r), rt: cut(&self.rt), rx: cut(&self.rx), ..self.clone() }
    }

    /// Same data indexed by `t0 + t_end - t`, with the velocity negated.
    pub fn time_reversed(&self, t_end: f64) -> TraceRecord {
        let rev = |v: &Vec<Vec3>, s: f64| v.iter().rev().map(|x| x * s).collect();
        TraceRecord { t0: t_end - self.t_end(), r: rev(&self.r, 1.0), rt: rev(&self.rt, -1.0), rx: rev(&self.rx, 1.0), ..self.clone() }
    }

    /// Derivatives `0..=order` of the position channel at sample `k` (or of
    /// `rx` when `strain` is set), from samples in `range`.
    pub fn derivs(&self, strain: bool, range: std::ops::Range<usize>, k: usize, order: usize) -> Vec<Vec3> {
        derivatives_at(if strain { &self.rx } else { &self.r }, range, k, self.dt, order)
    }

    /// Replaces `rt` by the 4th-order derivative of `r`.
    pub fn velocity_from_position(&mut self) {
        self.rt = derivative(&self.r, self.dt, 1, 4);
    }

    /// Largest channel-wise sup difference against a record on the same grid.
    pub fn max_diff(&self, other: &TraceRecord) -> f64 {
        let d = |a: &Vec<Vec3>, b: &Vec<Vec3>| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        d(&self.r, &other.r).max(d(&self.rt, &other.rt)).max(d(&self.rx, &other.rx))
    }
}
