//! Finite-difference weights, uniform-sample derivatives, Hermite bridges and
//! cubic splines.

use nalgebra::{DMatrix, DVector};

use crate::Vec3;

/// Fornberg weights: `w[d][k]` approximates the `d`-th derivative at `z` from
/// values at nodes `x[k]`, for `d = 0..=m`.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil (first index and weights, already divided by `h^d`) for the
/// `d`-th derivative at sample `j` of `n` uniform samples with spacing `h`.
/// Central where possible, one-sided near the ends; accuracy order `acc`.
pub fn stencil(j: usize, n: usize, h: f64, d: usize, acc: usize) -> (usize, Vec<f64>) {
    let half = (d + acc - 1) / 2;
    let central = 2 * half + 1;
    let (start, width) = if j >= half && j + half < n {
        (j - half, central)
    } else {
        let w = (d + acc).min(n);
        let s = if j < half { 0 } else { n - w };
        (s, w)
    };
    let offs: Vec<f64> = (0..width).map(|k| (start + k) as f64 - j as f64).collect();
    let w = fd_weights(0.0, &offs, d);
    let scale = h.powi(d as i32);
    (start, w[d].iter().map(|c| c / scale).collect())
}

/// `d`-th derivative of uniformly sampled 3-vectors, accuracy order `acc`.
pub fn derivative(values: &[Vec3], h: f64, d: usize, acc: usize) -> Vec<Vec3> {
    let n = values.len();
    let half = (d + acc - 1) / 2;
    let (_, interior) = if n > 2 * half { stencil(half, n, h, d, acc) } else { (0, Vec::new()) };
    (0..n)
        .map(|j| {
            let local;
            let (start, w): (usize, &[f64]) = if j >= half && j + half < n {
                (j - half, &interior)
            } else {
                local = stencil(j, n, h, d, acc);
                (local.0, &local.1)
            };
            w.iter().enumerate().fold(Vec3::zeros(), |a, (k, c)| a + values[start + k] * *c)
        })
        .collect()
}

/// Derivatives `0..=order` at sample `j` using only samples inside `range`.
pub fn derivatives_at(values: &[Vec3], range: std::ops::Range<usize>, j: usize, h: f64, order: usize) -> Vec<Vec3> {
    let sub = &values[range.clone()];
    let jj = j - range.start;
    (0..=order)
        .map(|d| {
            if d == 0 {
                return sub[jj];
            }
            let (start, w) = stencil(jj, sub.len(), h, d, 4);
            w.iter().enumerate().fold(Vec3::zeros(), |a, (k, c)| a + sub[start + k] * *c)
        })
        .collect()
}

/// Polynomial of degree `2 order + 1` on `[ta, tb]` matching values and
/// derivatives up to `order` at both ends.
#[derive(Debug, Clone)]
pub struct HermiteBridge {
    ta: f64,
    span: f64,
    /// Monomial coefficients in `s = (t - ta) / span`, per component.
    coef: [Vec<f64>; 3],
}

impl HermiteBridge {
    pub fn new(ta: f64, tb: f64, left: &[Vec3], right: &[Vec3]) -> Self {
        assert_eq!(left.len(), right.len());
        let k = left.len();
        let deg = 2 * k;
        let span = tb - ta;
        let mut a = DMatrix::<f64>::zeros(deg, deg);
        for d in 0..k {
            // d-th derivative of s^p at s = 0 and s = 1
            for p in 0..deg {
                if p >= d {
                    let f = falling(p, d);
                    if p == d {
                        a[(d, p)] = f;
                    }
                    a[(k + d, p)] = f;
                }
            }
        }
        let lu = a.lu();
        let coef = [0usize, 1, 2].map(|c| {
            let mut b = DVector::<f64>::zeros(deg);
            for d in 0..k {
                let sc = span.powi(d as i32);
                b[d] = left[d][c] * sc;
                b[k + d] = right[d][c] * sc;
            }
            lu.solve(&b).expect("hermite system is nonsingular").iter().copied().collect()
        });
        HermiteBridge { ta, span, coef }
    }

    /// `d`-th time derivative at `t`.
    pub fn eval(&self, t: f64, d: usize) -> Vec3 {
        let s = (t - self.ta) / self.span;
        let mut out = Vec3::zeros();
        for c in 0..3 {
            let cf = &self.coef[c];
            let mut acc = 0.0;
            for p in (d..cf.len()).rev() {
                acc = acc * s + cf[p] * falling(p, d);
            }
            out[c] = acc / self.span.powi(d as i32);
        }
        out
    }
}

fn falling(p: usize, d: usize) -> f64 {
    (0..d).fold(1.0, |a, i| a * (p - i) as f64)
}

/// Natural cubic spline through `(x_k, y_k)` for 3-vector data.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<Vec3>,
    m: Vec<Vec3>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<Vec3>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let mut m = vec![Vec3::zeros(); n];
        if n > 2 {
            let mut c = vec![0.0; n];
            let mut d = vec![Vec3::zeros(); n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (r - d[i - 1] * a) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - m[i + 1] * c[i];
            }
        }
        CubicSpline { x, y, m }
    }

    pub fn samples(&self) -> (&[f64], &[Vec3]) {
        (&self.x, &self.y)
    }

    /// Value, first and second derivative at `t` (clamped to the data range).
    pub fn eval(&self, t: f64) -> (Vec3, Vec3, Vec3) {
        let n = self.x.len();
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(k) => k.min(n - 2),
            Err(k) => (k.max(1) - 1).min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1, y0, y1) = (self.m[i], self.m[i + 1], self.y[i], self.y[i + 1]);
        let v = y0 * a + y1 * b + (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0);
        let d1 = (y1 - y0) / h + (m1 * (3.0 * b * b - 1.0) - m0 * (3.0 * a * a - 1.0)) * (h / 6.0);
        let d2 = m0 * a + m1 * b;
        (v, d1, d2)
    }
}

/// Composite Simpson weights for `n + 1` uniform samples (trapezoid fallback on
/// the last panel when `n` is odd).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    if n == 0 {
        return w;
    }
    let even = n - n % 2;
    for k in (0..even).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if n % 2 == 1 {
        w[n - 1] += h / 2.0;
        w[n] += h / 2.0;
    }
    w
}
