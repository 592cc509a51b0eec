//! Analytic closed curves and surfaces, their flow maps, and closest-point
//! projections.
//!
//! Every surface in the catalog is the image of a fixed reference shape
//! under a diagonal scaling `X(t, y) = diag(s(t)) y`. Stationary kinds use
//! `s ≡ 1`. Circles live in the `z = 0` plane of R^3; their third coordinate
//! is carried along but always zero.

pub mod exact;
pub mod forcing;
pub mod vec3;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use vec3::{Mat3, Point};

pub use exact::{exact_heat_solution, ExactHeatSolution};
pub use forcing::{forcing_for_study, ForcingProfile};

const ELLIPSOID_TOL: f64 = 1e-12;
const ELLIPSOID_MAX_ITER: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    Circle,
    Sphere,
    Torus,
    ScaledSphereFlow,
    EllipsoidFlow,
}

impl SurfaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Circle => "circle",
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::Torus => "torus",
            SurfaceKind::ScaledSphereFlow => "scaled_sphere_flow",
            SurfaceKind::EllipsoidFlow => "ellipsoid_flow",
        }
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurfaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(SurfaceKind::Circle),
            "sphere" => Ok(SurfaceKind::Sphere),
            "torus" => Ok(SurfaceKind::Torus),
            "scaled_sphere_flow" => Ok(SurfaceKind::ScaledSphereFlow),
            "ellipsoid_flow" => Ok(SurfaceKind::EllipsoidFlow),
            other => Err(Error::UnsupportedSurface(other.to_string())),
        }
    }
}

/// Result of projecting a point onto `Γ(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPointResult {
    pub point: Point,
    /// Positive outside the enclosed region.
    pub signed_distance: f64,
    /// Outward unit normal at `point`.
    pub normal: Point,
}

/// Analytic description of `Γ(t)`, `t ∈ [0, T]`.
///
/// Shape parameters by kind:
/// - `circle`: `[r]`
/// - `sphere`: `[r]`
/// - `torus`: `[R, r]` with `R > r`
/// - `scaled_sphere_flow`: `[r0]` or `[r0, amplitude]`, radius `r0 (1 + amplitude sin 2πt)`,
///   amplitude defaults to 0.25
/// - `ellipsoid_flow`: `[a, b, c]` or `[a, b, c, ea, eb, ec]`, axis `i` scaled by
///   `1 + e_i sin 2πt`, amplitudes default to `(0.2, -0.1, 0.1)`
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSpec {
    kind: SurfaceKind,
    params: Vec<f64>,
    horizon: f64,
}

const DEFAULT_ELLIPSOID_AMPLITUDES: [f64; 3] = [0.2, -0.1, 0.1];

impl SurfaceSpec {
    pub fn new(kind: SurfaceKind, params: Vec<f64>, horizon: f64) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("{kind}: {msg}")));
        if !(horizon > 0.0 && horizon.is_finite()) {
            return bad("time horizon must be positive");
        }
        if params.iter().any(|p| !p.is_finite()) {
            return bad("non-finite shape parameter");
        }
        let params = match kind {
            SurfaceKind::Circle | SurfaceKind::Sphere => {
                let p = if params.is_empty() { vec![1.0] } else { params };
                if p.len() != 1 || p[0] <= 0.0 {
                    return bad("expected one positive radius");
                }
                p
            }
            SurfaceKind::Torus => {
                let p = if params.is_empty() { vec![2.0, 0.7] } else { params };
                if p.len() != 2 || p[1] <= 0.0 || p[0] <= p[1] {
                    return bad("expected [R, r] with R > r > 0");
                }
                p
            }
            SurfaceKind::ScaledSphereFlow => {
                let mut p = if params.is_empty() { vec![1.0] } else { params };
                if p.len() == 1 {
                    p.push(0.25);
                }
                if p.len() != 2 || p[0] <= 0.0 || p[1].abs() >= 1.0 {
                    return bad("expected [r0, amplitude] with r0 > 0 and |amplitude| < 1");
                }
                p
            }
            SurfaceKind::EllipsoidFlow => {
                let mut p = if params.is_empty() { vec![1.0, 0.8, 0.6] } else { params };
                if p.len() == 3 {
                    p.extend_from_slice(&DEFAULT_ELLIPSOID_AMPLITUDES);
                }
                if p.len() != 6 || p[..3].iter().any(|&a| a <= 0.0) || p[3..].iter().any(|e| e.abs() >= 1.0) {
                    return bad("expected [a, b, c(, ea, eb, ec)] with positive axes and |e| < 1");
                }
                p
            }
        };
        Ok(Self { kind, params, horizon })
    }

    pub fn circle(r: f64) -> Self {
        Self::new(SurfaceKind::Circle, vec![r], 1.0).expect("valid circle")
    }

    pub fn sphere(r: f64) -> Self {
        Self::new(SurfaceKind::Sphere, vec![r], 1.0).expect("valid sphere")
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        Self::new(SurfaceKind::Torus, vec![major, minor], 1.0).expect("valid torus")
    }

    /// Sphere of radius `r0 (1 + 0.25 sin 2πt)`.
    pub fn scaled_sphere_flow(r0: f64) -> Self {
        Self::new(SurfaceKind::ScaledSphereFlow, vec![r0], 1.0).expect("valid flow")
    }

    pub fn ellipsoid_flow(axes: [f64; 3]) -> Self {
        Self::new(SurfaceKind::EllipsoidFlow, axes.to_vec(), 1.0).expect("valid flow")
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        assert!(horizon > 0.0);
        self.horizon = horizon;
        self
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Intrinsic dimension `m` (1 for the circle, 2 otherwise).
    pub fn dim(&self) -> usize {
        match self.kind {
            SurfaceKind::Circle => 1,
            _ => 2,
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.kind, SurfaceKind::Circle | SurfaceKind::Sphere | SurfaceKind::Torus)
    }

    /// Diagonal scaling `s(t)` and its derivative `s'(t)`.
    pub fn scaling(&self, t: f64) -> ([f64; 3], [f64; 3]) {
        let w = 2.0 * PI;
        match self.kind {
            SurfaceKind::ScaledSphereFlow => {
                let a = self.params[1];
                let s = 1.0 + a * (w * t).sin();
                let ds = a * w * (w * t).cos();
                ([s; 3], [ds; 3])
            }
            SurfaceKind::EllipsoidFlow => {
                let mut s = [1.0; 3];
                let mut ds = [0.0; 3];
                for i in 0..3 {
                    let e = self.params[3 + i];
                    s[i] = 1.0 + e * (w * t).sin();
                    ds[i] = e * w * (w * t).cos();
                }
                (s, ds)
            }
            _ => ([1.0; 3], [0.0; 3]),
        }
    }

    /// Radius of a circle or (scaled) sphere at time `t`.
    pub fn radius(&self, t: f64) -> Option<f64> {
        match self.kind {
            SurfaceKind::Circle | SurfaceKind::Sphere => Some(self.params[0]),
            SurfaceKind::ScaledSphereFlow => Some(self.params[0] * self.scaling(t).0[0]),
            _ => None,
        }
    }

    fn ellipsoid_axes(&self, t: f64) -> [f64; 3] {
        let (s, _) = self.scaling(t);
        [self.params[0] * s[0], self.params[1] * s[1], self.params[2] * s[2]]
    }

    /// Half-width δ of the tube in which the distance projection is unique.
    pub fn tube_radius(&self, t: f64) -> f64 {
        match self.kind {
            SurfaceKind::Circle | SurfaceKind::Sphere | SurfaceKind::ScaledSphereFlow => 0.5 * self.radius(t).unwrap(),
            SurfaceKind::Torus => 0.5 * self.params[1],
            SurfaceKind::EllipsoidFlow => {
                let a = self.ellipsoid_axes(t);
                let amin = a.iter().cloned().fold(f64::INFINITY, f64::min);
                let amax = a.iter().cloned().fold(0.0, f64::max);
                0.5 * amin * amin / amax
            }
        }
    }

    /// Implicit-equation residual of `x` with respect to `Γ(t)`; zero on the surface.
    pub fn level_set(&self, t: f64, x: Point) -> f64 {
        match self.kind {
            SurfaceKind::Circle => (x[0] * x[0] + x[1] * x[1]).sqrt() - self.params[0] + x[2].abs(),
            SurfaceKind::Sphere | SurfaceKind::ScaledSphereFlow => vec3::norm(x) - self.radius(t).unwrap(),
            SurfaceKind::Torus => {
                let (big, small) = (self.params[0], self.params[1]);
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                ((rho - big).powi(2) + x[2] * x[2]).sqrt() - small
            }
            SurfaceKind::EllipsoidFlow => {
                let a = self.ellipsoid_axes(t);
                (0..3).map(|i| (x[i] / a[i]).powi(2)).sum::<f64>() - 1.0
            }
        }
    }

    /// Closest point `q(t, x)`, signed distance and outward normal. Fails with
    /// `PointOutsideTube` when `|x - q| > δ`.
    pub fn closest_point(&self, t: f64, x: Point) -> Result<ClosestPointResult> {
        let res = self.closest_point_unchecked(t, x)?;
        let tube = self.tube_radius(t);
        if res.signed_distance.abs() > tube {
            return Err(Error::PointOutsideTube { distance: res.signed_distance.abs(), tube });
        }
        Ok(res)
    }

    /// Closest point without the tube restriction. Still fails at points where
    /// the projection is undefined (the circle/sphere center, the torus axis).
    pub fn closest_point_unchecked(&self, t: f64, x: Point) -> Result<ClosestPointResult> {
        let tube = self.tube_radius(t);
        let res = match self.kind {
            SurfaceKind::Circle => {
                let r = self.params[0];
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if rho == 0.0 || x[2] != 0.0 {
                    return Err(Error::PointOutsideTube { distance: (r * r + x[2] * x[2]).sqrt(), tube });
                }
                let n = [x[0] / rho, x[1] / rho, 0.0];
                ClosestPointResult { point: vec3::scale(r, n), signed_distance: rho - r, normal: n }
            }
            SurfaceKind::Sphere | SurfaceKind::ScaledSphereFlow => {
                let r = self.radius(t).unwrap();
                let len = vec3::norm(x);
                if len == 0.0 {
                    return Err(Error::PointOutsideTube { distance: r, tube });
                }
                let n = vec3::scale(1.0 / len, x);
                ClosestPointResult { point: vec3::scale(r, n), signed_distance: len - r, normal: n }
            }
            SurfaceKind::Torus => {
                let (big, small) = (self.params[0], self.params[1]);
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if rho == 0.0 {
                    return Err(Error::PointOutsideTube { distance: (big * big + x[2] * x[2]).sqrt() - small, tube });
                }
                let center = [big * x[0] / rho, big * x[1] / rho, 0.0];
                let w = vec3::sub(x, center);
                let wl = vec3::norm(w);
                if wl == 0.0 {
                    return Err(Error::PointOutsideTube { distance: small, tube });
                }
                let n = vec3::scale(1.0 / wl, w);
                ClosestPointResult {
                    point: vec3::add(center, vec3::scale(small, n)),
                    signed_distance: wl - small,
                    normal: n,
                }
            }
            SurfaceKind::EllipsoidFlow => self.ellipsoid_closest_point(t, x)?.0,
        };
        Ok(res)
    }

    /// Damped Newton on the scalar Lagrange condition
    /// `Σ a_i² x_i² / (a_i² + μ)² = 1`, with `q_i = a_i² x_i / (a_i² + μ)`.
    fn ellipsoid_closest_point(&self, t: f64, x: Point) -> Result<(ClosestPointResult, f64)> {
        let a = self.ellipsoid_axes(t);
        let a2 = [a[0] * a[0], a[1] * a[1], a[2] * a[2]];
        let amin2 = a2.iter().cloned().fold(f64::INFINITY, f64::min);
        let g = |mu: f64| -> (f64, f64) {
            let mut val = -1.0;
            let mut der = 0.0;
            for i in 0..3 {
                let d = a2[i] + mu;
                val += a2[i] * x[i] * x[i] / (d * d);
                der -= 2.0 * a2[i] * x[i] * x[i] / (d * d * d);
            }
            (val, der)
        };
        let mut mu = 0.0;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..ELLIPSOID_MAX_ITER {
            let (val, der) = g(mu);
            residual = val.abs();
            if residual <= ELLIPSOID_TOL * 1e-2 {
                converged = true;
                break;
            }
            if der == 0.0 || !der.is_finite() {
                break;
            }
            let mut step = -val / der;
            // keep a_i² + μ positive and the residual decreasing
            let mut accepted = false;
            for _ in 0..30 {
                let trial = mu + step;
                if trial > -amin2 && g(trial).0.abs() < residual {
                    mu = trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                converged = residual <= ELLIPSOID_TOL;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                context: "ellipsoid closest point",
                iterations: ELLIPSOID_MAX_ITER,
                residual,
            });
        }
        let q = [a2[0] * x[0] / (a2[0] + mu), a2[1] * x[1] / (a2[1] + mu), a2[2] * x[2] / (a2[2] + mu)];
        let grad = [q[0] / a2[0], q[1] / a2[1], q[2] / a2[2]];
        let n = vec3::normalize(grad);
        let d = vec3::dist(x, q);
        let sd = if mu >= 0.0 { d } else { -d };
        Ok((ClosestPointResult { point: q, signed_distance: sd, normal: n }, mu))
    }

    /// Outward unit normal at a point of `Γ(t)`.
    pub fn normal(&self, t: f64, x: Point) -> Point {
        match self.kind {
            SurfaceKind::Circle => vec3::normalize([x[0], x[1], 0.0]),
            SurfaceKind::Sphere | SurfaceKind::ScaledSphereFlow => vec3::normalize(x),
            SurfaceKind::Torus => {
                let big = self.params[0];
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                vec3::normalize(vec3::sub(x, [big * x[0] / rho, big * x[1] / rho, 0.0]))
            }
            SurfaceKind::EllipsoidFlow => {
                let a = self.ellipsoid_axes(t);
                vec3::normalize([x[0] / (a[0] * a[0]), x[1] / (a[1] * a[1]), x[2] / (a[2] * a[2])])
            }
        }
    }

    /// Jacobian `Dq(t, x)` of the closest-point map at `x` in the tube.
    pub fn projection_jacobian(&self, t: f64, x: Point) -> Result<Mat3> {
        let tube = self.tube_radius(t);
        match self.kind {
            SurfaceKind::Circle => {
                let r = self.params[0];
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if rho == 0.0 || (rho - r).abs() > tube {
                    return Err(Error::PointOutsideTube { distance: (rho - r).abs(), tube });
                }
                let n = [x[0] / rho, x[1] / rho, 0.0];
                let mut p = vec3::tangent_projector(n);
                p[2] = [0.0; 3];
                for row in p.iter_mut() {
                    row[2] = 0.0;
                }
                Ok(vec3::mat_scale(r / rho, &p))
            }
            SurfaceKind::Sphere | SurfaceKind::ScaledSphereFlow => {
                let r = self.radius(t).unwrap();
                let len = vec3::norm(x);
                if len == 0.0 || (len - r).abs() > tube {
                    return Err(Error::PointOutsideTube { distance: (len - r).abs(), tube });
                }
                let n = vec3::scale(1.0 / len, x);
                Ok(vec3::mat_scale(r / len, &vec3::tangent_projector(n)))
            }
            SurfaceKind::Torus => {
                let cp = self.closest_point(t, x)?;
                let (big, small) = (self.params[0], self.params[1]);
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let rh = [x[0] / rho, x[1] / rho, 0.0];
                // D(center) = (R/ρ)(P_xy - ρ̂ρ̂ᵀ)
                let mut dc = [[0.0; 3]; 3];
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        dc[i][j] = big / rho * (delta - rh[i] * rh[j]);
                    }
                }
                let w = vec3::sub(x, [big * rh[0], big * rh[1], 0.0]);
                let wl = vec3::norm(w);
                let pw = vec3::mat_scale(small / wl, &vec3::tangent_projector(cp.normal));
                let i_minus_dc = vec3::mat_add(&vec3::identity(), &vec3::mat_scale(-1.0, &dc));
                Ok(vec3::mat_add(&dc, &vec3::mat_mul(&pw, &i_minus_dc)))
            }
            SurfaceKind::EllipsoidFlow => {
                let (cp, mu) = self.ellipsoid_closest_point(t, x)?;
                if cp.signed_distance.abs() > tube {
                    return Err(Error::PointOutsideTube { distance: cp.signed_distance.abs(), tube });
                }
                let a = self.ellipsoid_axes(t);
                let mut w = [0.0; 3];
                let mut n = [0.0; 3];
                for i in 0..3 {
                    let a2 = a[i] * a[i];
                    w[i] = a2 / (a2 + mu);
                    n[i] = cp.point[i] / a2;
                }
                let wn = [w[0] * n[0], w[1] * n[1], w[2] * n[2]];
                let denom = vec3::dot(n, wn);
                let mut m = vec3::mat_scale(-1.0 / denom, &vec3::outer(wn, wn));
                for i in 0..3 {
                    m[i][i] += w[i];
                }
                Ok(m)
            }
        }
    }

    /// Flow map `X(t, y)` taking a point of `Γ(0)` to `Γ(t)`.
    pub fn flow_position(&self, t: f64, y: Point) -> Point {
        let (s, _) = self.scaling(t);
        [s[0] * y[0], s[1] * y[1], s[2] * y[2]]
    }

    /// Inverse flow map `X(t, ·)^{-1}`.
    pub fn inverse_flow(&self, t: f64, x: Point) -> Point {
        let (s, _) = self.scaling(t);
        [x[0] / s[0], x[1] / s[1], x[2] / s[2]]
    }

    /// Velocity `v(t, x)` at a point of `Γ(t)`.
    pub fn velocity(&self, t: f64, x: Point) -> Point {
        let (s, ds) = self.scaling(t);
        [ds[0] / s[0] * x[0], ds[1] / s[1] * x[1], ds[2] / s[2] * x[2]]
    }

    /// Closed-form measure `|Γ(t)|` where available.
    pub fn measure(&self, t: f64) -> Option<f64> {
        match self.kind {
            SurfaceKind::Circle => Some(2.0 * PI * self.params[0]),
            SurfaceKind::Sphere | SurfaceKind::ScaledSphereFlow => {
                let r = self.radius(t).unwrap();
                Some(4.0 * PI * r * r)
            }
            SurfaceKind::Torus => Some(4.0 * PI * PI * self.params[0] * self.params[1]),
            SurfaceKind::EllipsoidFlow => None,
        }
    }

    /// Geodesic distance between two points of `Γ(t)`. The flag is false when
    /// the value is the chord-length approximation (torus, ellipsoid).
    pub fn geodesic_distance(&self, t: f64, a: Point, b: Point) -> (f64, bool) {
        match self.radius(t) {
            Some(r) => {
                let c = vec3::norm(vec3::cross(a, b));
                let d = vec3::dot(a, b);
                (r * c.atan2(d), true)
            }
            None => (vec3::dist(a, b), false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn circle_projection() {
        let s = SurfaceSpec::circle(1.0);
        let cp = s.closest_point(0.0, [1.4, 0.0, 0.0]).unwrap();
        assert_eq!(cp.point, [1.0, 0.0, 0.0]);
        assert!((cp.signed_distance - 0.4).abs() < 1e-15);
        assert_eq!(cp.normal, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn circle_point_far_away_is_outside_tube() {
        let s = SurfaceSpec::circle(1.0);
        // tube radius r/2 = 0.5; the spec example x=(2,0) sits at distance 1
        match s.closest_point(0.0, [2.0, 0.0, 0.0]) {
            Err(Error::PointOutsideTube { distance, tube }) => {
                assert!((distance - 1.0).abs() < 1e-15);
                assert!((tube - 0.5).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        let cp = s.closest_point_unchecked(0.0, [2.0, 0.0, 0.0]).unwrap();
        assert_eq!(cp.point, [1.0, 0.0, 0.0]);
        assert_eq!(cp.signed_distance, 1.0);
        assert_eq!(cp.normal, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn sphere_projection() {
        let s = SurfaceSpec::sphere(1.0);
        let cp = s.closest_point(0.0, [0.0, 0.0, 0.5]).unwrap();
        assert!(vec3::dist(cp.point, [0.0, 0.0, 1.0]) < 1e-15);
        assert!((cp.signed_distance + 0.5).abs() < 1e-15);
    }

    #[test]
    fn torus_projection_in_cross_section() {
        let s = SurfaceSpec::torus(2.0, 0.7);
        let cp = s.closest_point(0.0, [2.9, 0.0, 0.0]).unwrap();
        assert!(vec3::dist(cp.point, [2.7, 0.0, 0.0]) < 1e-14);
        assert!((cp.signed_distance - 0.2).abs() < 1e-14);
        assert!(s.level_set(0.0, cp.point).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_projection_satisfies_lagrange_condition() {
        let s = SurfaceSpec::ellipsoid_flow([1.0, 0.8, 0.6]);
        for &t in &[0.0, 0.13, 0.5, 0.77] {
            let x = s.flow_position(t, [0.55, 0.4, 0.31]);
            let cp = s.closest_point(t, x).unwrap();
            assert!(s.level_set(t, cp.point).abs() < 1e-12);
            let d = vec3::sub(x, cp.point);
            let c = vec3::norm(vec3::cross(d, cp.normal));
            assert!(c <= 1e-10 * vec3::norm(d).max(1e-300) + 1e-15, "t={t} c={c}");
        }
    }

    #[test]
    fn scaled_sphere_velocity_is_radial() {
        let s = SurfaceSpec::scaled_sphere_flow(1.0);
        for &t in &[0.0, 0.1, 0.25, 0.6] {
            let x = s.flow_position(t, vec3::normalize([0.3, -0.5, 0.8]));
            let v = s.velocity(t, x);
            let r = 1.0 + 0.25 * (2.0 * PI * t).sin();
            let dr = 0.25 * 2.0 * PI * (2.0 * PI * t).cos();
            for i in 0..3 {
                assert!((v[i] - dr / r * x[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flow_identity_at_zero_and_velocity_matches_difference_quotient() {
        for s in [SurfaceSpec::scaled_sphere_flow(1.0), SurfaceSpec::ellipsoid_flow([1.0, 0.8, 0.6])] {
            let y = s.closest_point(0.0, [0.2, 0.7, 0.4]).unwrap().point;
            assert_eq!(s.flow_position(0.0, y), y);
            let big_t = s.horizon();
            let step = 1e-4 * big_t;
            for &t in &[0.1, 0.35, 0.8] {
                let fd = vec3::scale(0.5 / step, vec3::sub(s.flow_position(t + step, y), s.flow_position(t - step, y)));
                let v = s.velocity(t, s.flow_position(t, y));
                assert!(vec3::dist(fd, v) < 1e-6);
            }
        }
    }

    #[test]
    fn projection_jacobian_matches_difference_quotients() {
        let cases = [
            (SurfaceSpec::sphere(1.3), [0.5, -0.6, 0.9]),
            (SurfaceSpec::torus(2.0, 0.7), [2.1, 0.9, 0.5]),
            (SurfaceSpec::ellipsoid_flow([1.0, 0.8, 0.6]), [0.6, 0.35, 0.3]),
        ];
        for (s, x0) in cases {
            let x = vec3::add(s.closest_point(0.0, x0).unwrap().point, [0.01, -0.02, 0.015]);
            let jac = s.projection_jacobian(0.0, x).unwrap();
            let eps = 1e-6;
            for j in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += eps;
                xm[j] -= eps;
                let qp = s.closest_point(0.0, xp).unwrap().point;
                let qm = s.closest_point(0.0, xm).unwrap().point;
                for i in 0..3 {
                    let fd = (qp[i] - qm[i]) / (2.0 * eps);
                    assert!((fd - jac[i][j]).abs() < 1e-7, "{:?} ({i},{j}) {fd} vs {}", s.kind(), jac[i][j]);
                }
            }
        }
    }

    #[test]
    fn ellipsoid_nonconvergence_is_reported_outside_domain() {
        let s = SurfaceSpec::ellipsoid_flow([1.0, 0.8, 0.6]);
        assert!(s.closest_point(0.0, [0.0, 0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn closest_point_is_idempotent(theta in 0.0..(2.0 * PI), phi in 0.05..(PI - 0.05), off in -0.2f64..0.2) {
            let dir = [phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()];
            for s in [SurfaceSpec::sphere(1.0), SurfaceSpec::torus(2.0, 0.7), SurfaceSpec::ellipsoid_flow([1.0, 0.8, 0.6])] {
                let probe = match s.kind() {
                    SurfaceKind::Torus => [ (2.0 + 0.7 * phi.cos()) * theta.cos(), (2.0 + 0.7 * phi.cos()) * theta.sin(), 0.7 * phi.sin()],
                    SurfaceKind::EllipsoidFlow => [dir[0] * 0.9, dir[1] * 0.7, dir[2] * 0.55],
                    _ => dir,
                };
                let base = s.closest_point(0.0, probe).unwrap().point;
                let x = vec3::add(base, vec3::scale(off * 0.4, s.normal(0.0, base)));
                let q = s.closest_point(0.0, x).unwrap();
                prop_assert!(s.level_set(0.0, q.point).abs() <= 1e-12);
                let again = s.closest_point(0.0, q.point).unwrap();
                prop_assert!(vec3::dist(again.point, q.point) <= 1e-12);
                // x - q parallel to the normal
                let d = vec3::sub(x, q.point);
                let dl = vec3::norm(d);
                if dl > 1e-8 {
                    let sin_angle = vec3::norm(vec3::cross(d, q.normal)) / dl;
                    prop_assert!(sin_angle <= 1e-10);
                }
            }
        }

        #[test]
        fn circle_projection_idempotent(theta in 0.0..(2.0 * PI), off in -0.4f64..0.4) {
            let s = SurfaceSpec::circle(1.0);
            let x = [(1.0 + off) * theta.cos(), (1.0 + off) * theta.sin(), 0.0];
            let q = s.closest_point(0.0, x).unwrap();
            prop_assert!(s.level_set(0.0, q.point).abs() <= 1e-12);
            let again = s.closest_point(0.0, q.point).unwrap();
            prop_assert!(vec3::dist(again.point, q.point) <= 1e-12);
        }
    }
}
