//! Elastic laws, the stress map `G(v) = V_s(|v|) v/|v|`, its Jacobian, and the
//! characteristic frame used to diagonalize the first-order system.

use std::fmt;
use std::sync::Arc;

use crate::{Mat3, Vec3};

/// Minimum admissible stretch margin `|v| - 1` in the stretched regime.
pub const DELTA_STRETCH: f64 = 1e-6;
/// Minimum angle (radians) between a strain and the frame's skew axis.
pub const THETA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaterialError {
    #[error("strain magnitude {stretch} is not stretched (need >= {required})")]
    NotStretched { stretch: f64, required: f64 },
    #[error("strain magnitude {s} outside law domain ({a}, {b})")]
    OutOfDomain { s: f64, a: f64, b: f64 },
    #[error("strain is {angle:.3e} rad from the skew axis (minimum {min:.3e})")]
    AxisAligned { angle: f64, min: f64 },
    #[error("invalid material law: {0}")]
    Invalid(String),
    #[error("stress inversion failed for |G| = {0}")]
    Inversion(f64),
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user supplied potential with explicit first and second derivatives.
#[derive(Clone)]
pub struct CustomLaw {
    pub v: ScalarFn,
    pub vs: ScalarFn,
    pub vss: ScalarFn,
    pub domain: (f64, f64),
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw").field("domain", &self.domain).finish()
    }
}

#[derive(Debug, Clone)]
pub enum MaterialLaw {
    /// `V(s) = h (s-1)^2 / 2`.
    Hookean {
        h: f64,
    },
    Custom(CustomLaw),
}

impl MaterialLaw {
    pub fn hookean(h: f64) -> Self {
        MaterialLaw::Hookean { h }
    }

    /// Builds a custom law and spot-checks it: `V(1) = V_s(1) = 0`, `V_ss > 0`
    /// on the domain, and derivative consistency by central differences.
    pub fn custom(
        v: impl Fn(f64) -> f64 + Send + Sync + 'static,
        vs: impl Fn(f64) -> f64 + Send + Sync + 'static,
        vss: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> Result<Self, MaterialError> {
        let law = MaterialLaw::Custom(CustomLaw { v: Arc::new(v), vs: Arc::new(vs), vss: Arc::new(vss), domain });
        law.check()?;
        Ok(law)
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            MaterialLaw::Hookean { .. } => (0.0, f64::INFINITY),
            MaterialLaw::Custom(c) => c.domain,
        }
    }

    pub fn potential(&self, s: f64) -> f64 {
        match self {
            MaterialLaw::Hookean { h } => 0.5 * h * (s - 1.0) * (s - 1.0),
            MaterialLaw::Custom(c) => (c.v)(s),
        }
    }

    pub fn vs(&self, s: f64) -> f64 {
        match self {
            MaterialLaw::Hookean { h } => h * (s - 1.0),
            MaterialLaw::Custom(c) => (c.vs)(s),
        }
    }

    pub fn vss(&self, s: f64) -> f64 {
        match self {
            MaterialLaw::Hookean { h } => *h,
            MaterialLaw::Custom(c) => (c.vss)(s),
        }
    }

    /// Verifies the law axioms by sampling.
    pub fn check(&self) -> Result<(), MaterialError> {
        let (a, b) = self.domain();
        if let MaterialLaw::Hookean { h } = self {
            if !(*h > 0.0 && h.is_finite()) {
                return Err(MaterialError::Invalid(format!("hookean modulus {h} must be positive")));
            }
            return Ok(());
        }
        if !(a < 1.0 && 1.0 < b) {
            return Err(MaterialError::Invalid(format!("domain ({a}, {b}) must contain 1")));
        }
        if self.potential(1.0).abs() > 1e-12 || self.vs(1.0).abs() > 1e-12 {
            return Err(MaterialError::Invalid("V(1) and V_s(1) must vanish".into()));
        }
        let hi = if b.is_finite() { b } else { 10.0 };
        let n = 64;
        for k in 1..n {
            let s = a + (hi - a) * k as f64 / n as f64;
            if self.vss(s) <= 0.0 {
                return Err(MaterialError::Invalid(format!("V_ss({s}) is not positive")));
            }
            let eps = 1e-5 * s.abs().max(1.0);
            if s - eps <= a || s + eps >= b {
                continue;
            }
            let d1 = (self.potential(s + eps) - self.potential(s - eps)) / (2.0 * eps);
            let d2 = (self.vs(s + eps) - self.vs(s - eps)) / (2.0 * eps);
            let tol = |x: f64| 1e-5 * x.abs().max(1.0);
            if (d1 - self.vs(s)).abs() > tol(self.vs(s)) || (d2 - self.vss(s)).abs() > tol(self.vss(s)) {
                return Err(MaterialError::Invalid(format!("derivatives inconsistent at s = {s}")));
            }
        }
        Ok(())
    }

    fn in_domain(&self, s: f64) -> Result<(), MaterialError> {
        let (a, b) = self.domain();
        if s > a && s < b && s > 0.0 {
            Ok(())
        } else {
            Err(MaterialError::OutOfDomain { s, a, b })
        }
    }

    /// Wave speeds `(mu_1, mu_2)` at strain magnitude `s`.
    pub fn speeds(&self, rho: f64, s: f64) -> (f64, f64) {
        ((self.vss(s) / rho).sqrt(), (self.vs(s) / (rho * s)).max(0.0).sqrt())
    }
}

/// `G(v) = V_s(|v|) v / |v|`.
pub fn stress(law: &MaterialLaw, v: &Vec3) -> Result<Vec3, MaterialError> {
    let s = v.norm();
    law.in_domain(s)?;
    Ok(v * (law.vs(s) / s))
}

/// `G_v(v) = V_ss P + (V_s/|v|)(I - P)` with `P = v v^T / |v|^2`.
pub fn stress_jacobian(law: &MaterialLaw, v: &Vec3) -> Result<Mat3, MaterialError> {
    let s = v.norm();
    law.in_domain(s)?;
    let p = v * v.transpose() / (s * s);
    let t = law.vs(s) / s;
    Ok(p * law.vss(s) + (Mat3::identity() - p) * t)
}

/// Solves `G(v) = g` on the stretched branch. The map is radial, so this
/// reduces to a monotone scalar equation `V_s(s) = |g|` for `s > 1`.
pub fn invert_stress(law: &MaterialLaw, g: &Vec3) -> Result<Vec3, MaterialError> {
    let gn = g.norm();
    if !(gn > 0.0) || !gn.is_finite() {
        return Err(MaterialError::NotStretched { stretch: 1.0, required: 1.0 + DELTA_STRETCH });
    }
    let s = invert_vs(law, gn)?;
    Ok(g * (s / gn))
}

fn invert_vs(law: &MaterialLaw, target: f64) -> Result<f64, MaterialError> {
    if let MaterialLaw::Hookean { h } = law {
        return Ok(1.0 + target / h);
    }
    let (_, b) = law.domain();
    let mut lo = 1.0;
    let mut hi = if b.is_finite() { b } else { 2.0 };
    if !b.is_finite() {
        while law.vs(hi) < target {
            hi = 1.0 + 2.0 * (hi - 1.0);
            if hi > 1e12 {
                return Err(MaterialError::Inversion(target));
            }
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = law.vs(s) - target;
        if f.abs() <= 1e-15 * target.max(1e-300) {
            return Ok(s);
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let d = law.vss(s);
        let newton = s - f / d;
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * s {
            return Ok(s);
        }
    }
    Ok(s)
}

/// Unit vector orthogonal to `tangent`, used as the default skew axis.
pub fn default_skew_axis(tangent: &Vec3) -> Vec3 {
    let t = tangent.normalize();
    let k = (0..3).min_by(|&i, &j| t[i].abs().partial_cmp(&t[j].abs()).unwrap()).unwrap();
    let mut e = Vec3::zeros();
    e[k] = 1.0;
    t.cross(&e).normalize()
}

/// Orthonormal eigenbasis `Q` and wave speeds `mu` of `rho^{-1} G_v(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFrame {
    pub q: Mat3,
    pub mu: Vec3,
    pub skew_axis: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannState {
    pub xi_plus: Vec3,
    pub xi_minus: Vec3,
    pub xi_zero: Vec3,
}

pub fn check_stretched(s: f64) -> Result<(), MaterialError> {
    if s >= 1.0 + DELTA_STRETCH {
        Ok(())
    } else {
        Err(MaterialError::NotStretched { stretch: s, required: 1.0 + DELTA_STRETCH })
    }
}

pub fn characteristic_frame(law: &MaterialLaw, rho: f64, v: &Vec3, skew_axis: &Vec3) -> Result<CharacteristicFrame, MaterialError> {
    let s = v.norm();
    law.in_domain(s)?;
    check_stretched(s)?;
    let axis = skew_axis.normalize();
    let e1 = v / s;
    // M v with M the cross-product matrix of the axis.
    let mv = axis.cross(v);
    let angle = mv.norm().atan2(axis.dot(v).abs());
    if angle < THETA_MIN {
        return Err(MaterialError::AxisAligned { angle, min: THETA_MIN });
    }
    let e2 = mv.normalize();
    let e3 = e1.cross(&e2);
    let q = Mat3::from_columns(&[e1, e2, e3]);
    let (m1, m2) = law.speeds(rho, s);
    Ok(CharacteristicFrame { q, mu: Vec3::new(m1, m2, m2), skew_axis: axis })
}

impl CharacteristicFrame {
    /// `xi_pm = (Q^T w1 -/+ D^{-1} Q^T w2) / 2`, `xi_0 = w3`.
    pub fn to_riemann(&self, w1: &Vec3, w2: &Vec3, w3: &Vec3) -> RiemannState {
        let a = self.q.transpose() * w1;
        let b = (self.q.transpose() * w2).component_div(&self.mu);
        RiemannState { xi_plus: (a - b) * 0.5, xi_minus: (a + b) * 0.5, xi_zero: *w3 }
    }

    pub fn from_riemann(&self, xi: &RiemannState) -> (Vec3, Vec3, Vec3) {
        let w1 = self.q * (xi.xi_plus + xi.xi_minus);
        let w2 = self.q * (xi.xi_minus - xi.xi_plus).component_mul(&self.mu);
        (w1, w2, xi.xi_zero)
    }

    /// `Q diag(mu^2) Q^T`, which equals `rho^{-1} G_v`.
    pub fn reconstruct(&self) -> Mat3 {
        self.q * Mat3::from_diagonal(&self.mu.component_mul(&self.mu)) * self.q.transpose()
    }

    /// Mode moving toward `+x` (`xi_plus`), evaluated without building the full state.
    pub fn xi_plus(&self, w1: &Vec3, w2: &Vec3) -> Vec3 {
        let a = self.q.transpose() * w1;
        let b = (self.q.transpose() * w2).component_div(&self.mu);
        (a - b) * 0.5
    }

    pub fn xi_minus(&self, w1: &Vec3, w2: &Vec3) -> Vec3 {
        let a = self.q.transpose() * w1;
        let b = (self.q.transpose() * w2).component_div(&self.mu);
        (a + b) * 0.5
    }

    /// Strain `w1` recovered from a known velocity and the mode leaving through
    /// the `-x` end (`xi_minus`) or the `+x` end (`xi_plus`).
    pub fn strain_from_minus(&self, xi_minus: &Vec3, w2: &Vec3) -> Vec3 {
        let b = (self.q.transpose() * w2).component_div(&self.mu);
        self.q * (xi_minus * 2.0 - b)
    }

    pub fn strain_from_plus(&self, xi_plus: &Vec3, w2: &Vec3) -> Vec3 {
        let b = (self.q.transpose() * w2).component_div(&self.mu);
        self.q * (xi_plus * 2.0 + b)
    }
}
