//! Eigenfunction-decay solutions of the heat equation on circles and spheres.
//!
//! The spatial part is the restriction of a homogeneous harmonic polynomial
//! `p` of degree `n`, scaled so that it equals `sin(nθ)` on the circle and
//! the zonal Legendre polynomial `P_ℓ(z/r)` on the sphere. Its ambient
//! gradient and Hessian are exposed so callers can evaluate surface
//! operators independently of the eigenvalue formula.

use super::vec3::{Mat3, Point};
use super::{SurfaceKind, SurfaceSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExactHeatSolution {
    kind: SurfaceKind,
    radius: f64,
    mode: usize,
}

/// `u = e^{-λ t} p(x)` with `∂_t u - Δ_Γ u = 0` on a stationary circle or sphere.
pub fn exact_heat_solution(spec: &SurfaceSpec, mode: usize) -> Result<ExactHeatSolution> {
    let radius = match spec.kind() {
        SurfaceKind::Circle | SurfaceKind::Sphere => spec.params()[0],
        other => return Err(Error::UnsupportedSurface(format!("no exact heat solution on {other}"))),
    };
    if mode == 0 {
        return Err(Error::InvalidArgument("mode must be at least 1".into()));
    }
    if spec.kind() == SurfaceKind::Sphere && mode > 3 {
        return Err(Error::InvalidArgument(format!("sphere mode {mode} not tabulated (1..=3)")));
    }
    Ok(ExactHeatSolution { kind: spec.kind(), radius, mode })
}

impl ExactHeatSolution {
    pub fn mode(&self) -> usize {
        self.mode
    }

    /// Eigenvalue of `-Δ_Γ`: `n²/r²` on the circle, `ℓ(ℓ+1)/r²` on the sphere.
    pub fn eigenvalue(&self) -> f64 {
        let n = self.mode as f64;
        let r2 = self.radius * self.radius;
        match self.kind {
            SurfaceKind::Circle => n * n / r2,
            _ => n * (n + 1.0) / r2,
        }
    }

    fn decay(&self, t: f64) -> f64 {
        (-self.eigenvalue() * t).exp()
    }

    pub fn value(&self, t: f64, x: Point) -> f64 {
        self.decay(t) * self.spatial(x).0
    }

    pub fn time_derivative(&self, t: f64, x: Point) -> f64 {
        -self.eigenvalue() * self.value(t, x)
    }

    /// Right-hand side; identically zero for these solutions.
    pub fn forcing(&self, _t: f64, _x: Point) -> f64 {
        0.0
    }

    /// Initial value `u(0, x)`.
    pub fn initial(&self, x: Point) -> f64 {
        self.spatial(x).0
    }

    /// Ambient gradient of the homogeneous extension at time `t`.
    pub fn gradient(&self, t: f64, x: Point) -> Point {
        let g = self.spatial(x).1;
        let d = self.decay(t);
        [d * g[0], d * g[1], d * g[2]]
    }

    /// Ambient Hessian of the homogeneous extension at time `t`.
    pub fn hessian(&self, t: f64, x: Point) -> Mat3 {
        let mut h = self.spatial(x).2;
        let d = self.decay(t);
        for row in h.iter_mut() {
            for v in row.iter_mut() {
                *v *= d;
            }
        }
        h
    }

    fn spatial(&self, x: Point) -> (f64, Point, Mat3) {
        match self.kind {
            SurfaceKind::Circle => circle_harmonic(self.mode, self.radius, x),
            _ => sphere_harmonic(self.mode, self.radius, x),
        }
    }
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn cpow(z: (f64, f64), n: usize) -> (f64, f64) {
    (0..n).fold((1.0, 0.0), |acc, _| cmul(acc, z))
}

/// `Im((x + iy)^n) / r^n` with derivatives.
fn circle_harmonic(n: usize, r: f64, x: Point) -> (f64, Point, Mat3) {
    let z = (x[0], x[1]);
    let s = r.powi(-(n as i32));
    let nf = n as f64;
    let zn = cpow(z, n);
    let d1 = cpow(z, n - 1);
    let d2 = if n >= 2 { cpow(z, n - 2) } else { (0.0, 0.0) };
    let c2 = nf * (nf - 1.0);
    let val = s * zn.1;
    let grad = [s * nf * d1.1, s * nf * d1.0, 0.0];
    let hxx = s * c2 * d2.1;
    let hxy = s * c2 * d2.0;
    let hess = [[hxx, hxy, 0.0], [hxy, -hxx, 0.0], [0.0, 0.0, 0.0]];
    (val, grad, hess)
}

/// Homogeneous zonal harmonics `r^ℓ P_ℓ(z/|x|) / r^ℓ` for `ℓ = 1, 2, 3`.
fn sphere_harmonic(l: usize, r: f64, x: Point) -> (f64, Point, Mat3) {
    let (a, b, c) = (x[0], x[1], x[2]);
    let rr = a * a + b * b + c * c;
    let (val, grad, hess) = match l {
        1 => (c, [0.0, 0.0, 1.0], [[0.0; 3]; 3]),
        2 => (
            // (3z² - |x|²)/2
            0.5 * (3.0 * c * c - rr),
            [-a, -b, 2.0 * c],
            [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]],
        ),
        _ => (
            // (5z³ - 3z|x|²)/2 = z³ - 1.5 z (x² + y²)
            c * c * c - 1.5 * c * (a * a + b * b),
            [-3.0 * a * c, -3.0 * b * c, 3.0 * c * c - 1.5 * (a * a + b * b)],
            [[-3.0 * c, 0.0, -3.0 * a], [0.0, -3.0 * c, -3.0 * b], [-3.0 * a, -3.0 * b, 6.0 * c]],
        ),
    };
    let s = r.powi(-(l as i32));
    let mut h = hess;
    for row in h.iter_mut() {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    (s * val, [s * grad[0], s * grad[1], s * grad[2]], h)
}

#[cfg(test)]
mod tests {
    use super::super::vec3;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Laplace–Beltrami of an ambient extension: `tr(P Hess P) - H ∂_ν u`,
    /// with mean curvature `H = m / r` for circles and spheres.
    fn laplace_beltrami(hess: &Mat3, grad: Point, normal: Point, mean_curvature: f64) -> f64 {
        let p = vec3::tangent_projector(normal);
        let php = vec3::mat_mul(&p, &vec3::mat_mul(hess, &p));
        let trace = php[0][0] + php[1][1] + php[2][2];
        trace - mean_curvature * vec3::dot(grad, normal)
    }

    #[test]
    fn circle_examples() {
        let s = SurfaceSpec::circle(1.0);
        let u1 = exact_heat_solution(&s, 1).unwrap();
        assert!((u1.value(0.0, [0.0, 1.0, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(u1.forcing(0.0, [0.0, 1.0, 0.0]), 0.0);
        let u2 = exact_heat_solution(&s, 2).unwrap();
        let th: f64 = 0.3;
        let x = [th.cos(), th.sin(), 0.0];
        assert!((u2.value(0.25, x) - (-1.0f64).exp() * (2.0 * th).sin()).abs() < 1e-15);
    }

    #[test]
    fn sphere_example() {
        let s = SurfaceSpec::sphere(1.0);
        let u = exact_heat_solution(&s, 1).unwrap();
        let x = vec3::normalize([0.2, -0.4, 0.7]);
        assert!((u.value(0.5, x) - (-1.0f64).exp() * x[2]).abs() < 1e-15);
    }

    #[test]
    fn flows_are_rejected() {
        assert!(matches!(
            exact_heat_solution(&SurfaceSpec::scaled_sphere_flow(1.0), 1),
            Err(Error::UnsupportedSurface(_))
        ));
    }

    #[test]
    fn residual_vanishes_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cases = [
            (SurfaceSpec::circle(1.0), 1usize),
            (SurfaceSpec::circle(1.0), 3),
            (SurfaceSpec::circle(1.7), 5),
            (SurfaceSpec::sphere(1.0), 1),
            (SurfaceSpec::sphere(1.0), 2),
            (SurfaceSpec::sphere(0.8), 3),
        ];
        for (s, mode) in cases {
            let u = exact_heat_solution(&s, mode).unwrap();
            let r = s.params()[0];
            let m = s.dim() as f64;
            for _ in 0..100 {
                let t: f64 = rng.gen_range(0.0..1.0);
                let dir = if s.dim() == 1 {
                    let a: f64 = rng.gen_range(0.0..2.0 * PI);
                    [a.cos(), a.sin(), 0.0]
                } else {
                    vec3::normalize([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                };
                let x = vec3::scale(r, dir);
                let lap = laplace_beltrami(&u.hessian(t, x), u.gradient(t, x), dir, m / r);
                let residual = u.time_derivative(t, x) - lap - u.forcing(t, x);
                assert!(residual.abs() <= 1e-10, "{:?} mode {mode}: {residual}", s.kind());
            }
        }
    }
}
