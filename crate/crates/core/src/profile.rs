//! Spatial profiles used for initial and target data.

use crate::numerics::CubicSpline;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Zero,
    /// `a exp(-(x - c)^2 / (2 w^2))`.
    Gaussian {
        amplitude: Vec3,
        center: f64,
        width: f64,
    },
    /// `a sin(k x + phase)`.
    Sine {
        amplitude: Vec3,
        wavenumber: f64,
        phase: f64,
    },
    /// `a (1 - z^2)^6` with `z = (x - c) / w`, zero for `|z| >= 1`; C^5.
    Bump {
        amplitude: Vec3,
        center: f64,
        half_width: f64,
    },
    Sampled(CubicSpline),
    Sum(Vec<Shape>),
}

impl Shape {
    /// Value and first two derivatives in `x`.
    pub fn eval(&self, x: f64) -> (Vec3, Vec3, Vec3) {
        match self {
            Shape::Zero => (Vec3::zeros(), Vec3::zeros(), Vec3::zeros()),
            Shape::Gaussian { amplitude, center, width } => {
                let z = (x - center) / width;
                let g = (-0.5 * z * z).exp();
                let d1 = -z / width * g;
                let d2 = (z * z - 1.0) / (width * width) * g;
                (amplitude * g, amplitude * d1, amplitude * d2)
            }
            Shape::Sine { amplitude, wavenumber, phase } => {
                let a = wavenumber * x + phase;
                (amplitude * a.sin(), amplitude * (wavenumber * a.cos()), amplitude * (-wavenumber * wavenumber * a.sin()))
            }
            Shape::Bump { amplitude, center, half_width } => {
                let w = *half_width;
                let z = (x - center) / w;
                if z.abs() >= 1.0 {
                    return (Vec3::zeros(), Vec3::zeros(), Vec3::zeros());
                }
                let u = 1.0 - z * z;
                let u4 = u * u * u * u;
                let f = u4 * u * u;
                let d1 = -12.0 * z * u4 * u / w;
                let d2 = (-12.0 * u4 * u + 120.0 * z * z * u4) / (w * w);
                (amplitude * f, amplitude * d1, amplitude * d2)
            }
            Shape::Sampled(s) => s.eval(x),
            Shape::Sum(parts) => parts.iter().fold((Vec3::zeros(), Vec3::zeros(), Vec3::zeros()), |acc, p| {
                let v = p.eval(x);
                (acc.0 + v.0, acc.1 + v.1, acc.2 + v.2)
            }),
        }
    }

    pub fn value(&self, x: f64) -> Vec3 {
        self.eval(x).0
    }

    pub fn slope(&self, x: f64) -> Vec3 {
        self.eval(x).1
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Shape::Zero => true,
            Shape::Sum(p) => p.iter().all(Shape::is_zero),
            _ => false,
        }
    }

    pub fn scaled(&self, f: f64) -> Shape {
        match self {
            Shape::Zero => Shape::Zero,
            Shape::Gaussian { amplitude, center, width } => Shape::Gaussian { amplitude: amplitude * f, center: *center, width: *width },
            Shape::Sine { amplitude, wavenumber, phase } => {
                Shape::Sine { amplitude: amplitude * f, wavenumber: *wavenumber, phase: *phase }
            }
            Shape::Bump { amplitude, center, half_width } => {
                Shape::Bump { amplitude: amplitude * f, center: *center, half_width: *half_width }
            }
            Shape::Sampled(sp) => {
                let (xs, ys) = sp.samples();
                Shape::Sampled(CubicSpline::new(xs.to_vec(), ys.iter().map(|y| y * f).collect()))
            }
            Shape::Sum(p) => Shape::Sum(p.iter().map(|s| s.scaled(f)).collect()),
        }
    }

    /// Largest sampled magnitude on `[0, length]`.
    pub fn sup_norm(&self, length: f64, samples: usize) -> f64 {
        (0..=samples).map(|k| self.value(length * k as f64 / samples as f64).norm()).fold(0.0, f64::max)
    }
}

/// Position and velocity profiles of one string.
#[derive(Debug, Clone, PartialEq)]
pub struct StringData {
    pub r: Shape,
    pub rt: Shape,
}

impl StringData {
    pub fn zero() -> Self {
        StringData { r: Shape::Zero, rt: Shape::Zero }
    }
}

/// Per-string data `(r, r_t)` for a whole network.
pub type NetworkData = Vec<StringData>;

pub fn zero_data(n: usize) -> NetworkData {
    vec![StringData::zero(); n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_derivatives_match_differences() {
        let s = Shape::Gaussian { amplitude: Vec3::new(0.0, 1e-3, 2e-3), center: 0.4, width: 0.1 };
        let h = 1e-5;
        let x = 0.47;
        let (_, d1, d2) = s.eval(x);
        let fd1 = (s.value(x + h) - s.value(x - h)) / (2.0 * h);
        let fd2 = (s.slope(x + h) - s.slope(x - h)) / (2.0 * h);
        assert_relative_eq!(d1, fd1, epsilon = 1e-9);
        assert_relative_eq!(d2, fd2, epsilon = 1e-7);
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let s = Shape::Bump { amplitude: Vec3::new(1.0, -2.0, 0.5), center: 0.5, half_width: 0.2 };
        let h = 1e-5;
        for &x in &[0.35, 0.5, 0.61, 0.69] {
            let (_, d1, d2) = s.eval(x);
            assert_relative_eq!(d1, (s.value(x + h) - s.value(x - h)) / (2.0 * h), epsilon = 1e-6);
            assert_relative_eq!(d2, (s.slope(x + h) - s.slope(x - h)) / (2.0 * h), epsilon = 1e-4);
        }
        assert_eq!(s.value(0.2), Vec3::zeros());
    }

    #[test]
    fn scaling_is_linear() {
        let s = Shape::Sine { amplitude: Vec3::new(1.0, 0.0, 0.0), wavenumber: 3.0, phase: 0.2 };
        assert_relative_eq!(s.scaled(2.0).value(0.3), s.value(0.3) * 2.0, epsilon = 1e-15);
    }
}
