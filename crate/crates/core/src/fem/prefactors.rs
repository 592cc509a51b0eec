//! Measure and gradient prefactors of the lift:
//! `∫_{Γ_h} u v = ∫_Γ a_h u^ℓ v^ℓ` and
//! `∫_{Γ_h} ∇u·∇v = ∫_Γ B_h ∇u^ℓ·∇v^ℓ`.
//!
//! With `J_ℓ = Dq·J_h` the frame of `q ∘ F_K`, `a_h = √det G_h / √det G_ℓ`
//! and `B_h = a_h J_ℓ G_h⁻¹ J_ℓᵀ`. On the tangent space `B_h − P` has the
//! eigenvalues of `a_h G_h⁻¹ G_ℓ − I`.

use crate::element::{Frame, QuadratureRule, RefPoint};
use crate::error::Result;
use crate::geometry::vec3::{self, Mat3, Point};
use crate::geometry::SurfaceKind;
use crate::mesh::SurfaceMesh;

#[derive(Clone, Copy, Debug)]
pub struct PrefactorSample {
    pub element: usize,
    pub xi: RefPoint,
    pub lifted: Point,
    pub a_h: f64,
    pub b_h: Mat3,
    /// Tangent projector `P = I − ννᵀ` at the lifted point.
    pub projector: Mat3,
    /// Operator norm of `B_h − P` on the tangent space.
    pub b_deviation: f64,
}

#[derive(Clone, Debug)]
pub struct PrefactorField {
    pub samples: Vec<PrefactorSample>,
    /// `max |a_h − 1|`.
    pub sup_a: f64,
    /// `max ‖B_h − P‖`.
    pub sup_b: f64,
}

/// `B_h` and the tangent deviation from the two frames.
fn gradient_prefactor(discrete: &Frame, lifted: &Frame, a_h: f64) -> (Mat3, f64) {
    let gi = discrete.inv_metric;
    let j = lifted.cols;
    let dim = discrete.dim;
    let mut b = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let mut s = 0.0;
            for a in 0..dim {
                for bb in 0..dim {
                    s += j[a][r] * gi[a][bb] * j[bb][c];
                }
            }
            b[r][c] = a_h * s;
        }
    }
    let gl = lifted.metric;
    let dev = if dim == 1 {
        (a_h * gi[0][0] * gl[0][0] - 1.0).abs()
    } else {
        // eigenvalues of D = G_h⁻¹ (a_h G_ℓ − G_h) = a_h G_h⁻¹ G_ℓ − I, formed
        // directly so small deviations do not cancel
        let e = [
            [a_h * gl[0][0] - discrete.metric[0][0], a_h * gl[0][1] - discrete.metric[0][1]],
            [a_h * gl[1][0] - discrete.metric[1][0], a_h * gl[1][1] - discrete.metric[1][1]],
        ];
        let mut d = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                d[r][c] = gi[r][0] * e[0][c] + gi[r][1] * e[1][c];
            }
        }
        let mean = 0.5 * (d[0][0] + d[1][1]);
        let half = 0.5 * (d[0][0] - d[1][1]);
        let disc = (half * half + d[0][1] * d[1][0]).max(0.0).sqrt();
        (mean + disc).abs().max((mean - disc).abs())
    };
    (b, dev)
}

/// Prefactors of `mesh` at the points of a degree `2k + 2` rule, the
/// element nodes and the barycenter.
pub fn compute_prefactors(mesh: &SurfaceMesh) -> Result<PrefactorField> {
    let surface = mesh.surface();
    let t = mesh.time();
    let rule = QuadratureRule::for_degree(mesh.dim(), mesh.degree());
    let mut points: Vec<RefPoint> = rule.points().to_vec();
    points.extend_from_slice(mesh.reference().nodes());
    points.push(mesh.reference().barycenter());
    let mut samples = Vec::with_capacity(mesh.n_elements() * points.len());
    let (mut sup_a, mut sup_b) = (0.0f64, 0.0f64);
    for e in 0..mesh.n_elements() {
        for &xi in &points {
            let (x, frame) = mesh.map(e, xi);
            let cp = surface.closest_point(t, x)?;
            let dq = surface.projection_jacobian(t, x)?;
            let lifted = frame.transformed(&dq);
            let a_h = frame.sqrt_det / lifted.sqrt_det;
            let (b_h, dev) = gradient_prefactor(&frame, &lifted, a_h);
            sup_a = sup_a.max((a_h - 1.0).abs());
            sup_b = sup_b.max(dev);
            samples.push(PrefactorSample {
                element: e,
                xi,
                lifted: cp.point,
                a_h,
                b_h,
                projector: vec3::tangent_projector(cp.normal),
                b_deviation: dev,
            });
        }
    }
    Ok(PrefactorField { samples, sup_a, sup_b })
}

/// Density of the lifted measure with respect to the reference element,
/// computed from the radial projection alone: for a circle of radius `R`
/// it is `R |x × F'| / |x|²`, for a sphere `R² |x · (F_ξ × F_η)| / |x|³`.
/// `None` for other surfaces.
pub fn radial_lift_density(mesh: &SurfaceMesh, x: Point, frame: &Frame) -> Option<f64> {
    let s = mesh.surface();
    let r = s.radius(mesh.time())?;
    let len = vec3::norm(x);
    match s.kind() {
        SurfaceKind::Circle => Some(r * vec3::cross(x, frame.cols[0])[2].abs() / (len * len)),
        _ => Some(r * r * vec3::dot(x, vec3::cross(frame.cols[0], frame.cols[1])).abs() / len.powi(3)),
    }
}
