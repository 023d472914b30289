//! Closed-form reference fields.

use crate::geometry::{add3, norm3, scale3, Vec3};

/// First positive root of `tan x = x`, by bisection on `(π, 3π/2)`.
pub fn first_tan_root() -> f64 {
    use std::f64::consts::PI;
    // f(x) = sin x − x cos x changes sign on the bracket and shares the root.
    let f = |x: f64| x.sin() - x * x.cos();
    let (mut lo, mut hi) = (PI + 1e-9, 1.5 * PI - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Spherical Bessel function `j1`.
pub fn spherical_j1(s: f64) -> f64 {
    if s.abs() < 1e-3 {
        let s2 = s * s;
        return s / 3.0 * (1.0 - s2 / 10.0 + s2 * s2 / 280.0);
    }
    s.sin() / (s * s) - s.cos() / s
}

/// Lowest curl eigenfield of a ball centred at the origin, symmetric about
/// the z axis. It satisfies `curl B = λ B` with `λ = x₁ / R` and is tangent
/// to the sphere.
#[derive(Debug, Clone, Copy)]
pub struct BallEigenfield {
    pub radius: f64,
    pub lambda: f64,
}

impl BallEigenfield {
    pub fn new(radius: f64) -> Self {
        Self {
            radius,
            lambda: first_tan_root() / radius,
        }
    }

    /// `g(r) = j1(λr)/r` and `g'(r)/r`.
    fn profile(&self, r: f64) -> (f64, f64) {
        let l = self.lambda;
        let s = l * r;
        if s < 1e-3 {
            let s2 = s * s;
            let g = l / 3.0 * (1.0 - s2 / 10.0);
            let dg_over_r = -l.powi(3) / 15.0 * (1.0 - s2 / 14.0);
            return (g, dg_over_r);
        }
        let j1 = spherical_j1(s);
        let j0 = s.sin() / s;
        // j1' = j0 − 2 j1 / s, so d/dr [j1(λr)/r] = (λ j1'(s) − j1/r) / r.
        let dj1 = j0 - 2.0 * j1 / s;
        let g = j1 / r;
        let dg = (l * dj1 - j1 / r) / r;
        (g, dg / r)
    }

    pub fn value(&self, x: Vec3) -> Vec3 {
        let r = norm3(x);
        let (g, dg) = self.profile(r);
        let t = [-g * x[1], g * x[0], 0.0];
        let curl_t = [
            -dg * x[0] * x[2],
            -dg * x[1] * x[2],
            dg * (x[0] * x[0] + x[1] * x[1]) + 2.0 * g,
        ];
        add3(t, scale3(1.0 / self.lambda, curl_t))
    }

    /// A vector potential `B / λ`.
    pub fn potential(&self, x: Vec3) -> Vec3 {
        scale3(1.0 / self.lambda, self.value(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dot3;

    fn curl(f: impl Fn(Vec3) -> Vec3, x: Vec3) -> Vec3 {
        let h = 1e-5;
        let d = |i: usize, j: usize| {
            let mut p = x;
            let mut m = x;
            p[j] += h;
            m[j] -= h;
            (f(p)[i] - f(m)[i]) / (2.0 * h)
        };
        [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)]
    }

    #[test]
    fn root_solves_tan_equation() {
        let x = first_tan_root();
        assert!((x.tan() - x).abs() < 1e-9);
        assert!((x - 4.493_409_457_909_064).abs() < 1e-12);
    }

    #[test]
    fn field_is_an_eigenfield_tangent_to_the_sphere() {
        let b = BallEigenfield::new(1.3);
        for x in [[0.1, 0.2, -0.3], [0.5, -0.4, 0.6], [1e-4, 2e-4, 0.0], [-0.7, 0.1, 0.2]] {
            let c = curl(|p| b.value(p), x);
            let v = b.value(x);
            for k in 0..3 {
                assert!((c[k] - b.lambda * v[k]).abs() < 1e-6, "{c:?} {v:?}");
            }
        }
        for x in [[1.3, 0.0, 0.0], [0.0, 0.6, (1.69f64 - 0.36).sqrt()]] {
            assert!(dot3(b.value(x), x).abs() < 1e-12);
        }
    }
}
