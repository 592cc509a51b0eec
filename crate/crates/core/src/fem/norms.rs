//! Quadrature norms. `L^∞` is the maximum over quadrature points and nodes.

use super::{ElementValues, FeSpace, SurfaceTag};
use crate::error::{Error, Result};
use crate::geometry::vec3::{self, Point};

/// Lebesgue exponent; `f64::INFINITY` selects the sup norm.
pub type Exponent = f64;

fn check(q: Exponent) -> Result<()> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::InvalidExponent(q));
    }
    Ok(())
}

#[derive(Default)]
struct Acc {
    sum: f64,
    max: f64,
}

fn reduce(parts: Vec<Acc>, q: Exponent) -> f64 {
    if q.is_infinite() {
        parts.iter().fold(0.0, |m, a| m.max(a.max))
    } else {
        parts.iter().map(|a| a.sum).sum::<f64>().powf(1.0 / q)
    }
}

/// Integrates `|g(ev, q)|^q` over the tagged surface.
fn integrate_power<G>(space: &FeSpace, tag: SurfaceTag, q: Exponent, g: G) -> Result<Vec<Acc>>
where
    G: Fn(&ElementValues, usize) -> f64 + Sync,
{
    space.map_chunks(tag, |ev, acc: &mut Acc| {
        for k in 0..ev.n_qp {
            let v = g(ev, k).abs();
            if q.is_infinite() {
                acc.max = acc.max.max(v);
            } else {
                acc.sum += ev.weights[k] * v.powf(q);
            }
        }
        Ok(())
    })
}

fn local(space: &FeSpace, e: usize, coeffs: &[f64], out: &mut [f64]) {
    for (o, &i) in out.iter_mut().zip(space.mesh().element(e)) {
        *o = coeffs[i];
    }
}

fn check_len(space: &FeSpace, coeffs: &[f64]) -> Result<()> {
    if coeffs.len() != space.ndofs() {
        return Err(Error::DimensionMismatch { expected: space.ndofs(), got: coeffs.len() });
    }
    Ok(())
}

fn node_max(coeffs: &[f64]) -> f64 {
    coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `‖u_h‖_{L^q}` of the finite element function with coefficients `coeffs`.
pub fn lq_norm(space: &FeSpace, tag: SurfaceTag, coeffs: &[f64], q: Exponent) -> Result<f64> {
    check(q)?;
    check_len(space, coeffs)?;
    let n_loc = space.mesh().nodes_per_element();
    let parts = integrate_power(space, tag, q, |ev, k| {
        let mut c = [0.0; 8];
        local(space, ev.element, coeffs, &mut c[..n_loc]);
        ev.eval(k, &c[..n_loc]).0
    })?;
    let r = reduce(parts, q);
    Ok(if q.is_infinite() { r.max(node_max(coeffs)) } else { r })
}

/// `‖∇u_h‖_{L^q}` (Euclidean length of the surface gradient).
pub fn gradient_lq_norm(space: &FeSpace, tag: SurfaceTag, coeffs: &[f64], q: Exponent) -> Result<f64> {
    check(q)?;
    check_len(space, coeffs)?;
    let n_loc = space.mesh().nodes_per_element();
    let parts = integrate_power(space, tag, q, |ev, k| {
        let mut c = [0.0; 8];
        local(space, ev.element, coeffs, &mut c[..n_loc]);
        vec3::norm(ev.eval(k, &c[..n_loc]).1)
    })?;
    Ok(reduce(parts, q))
}

/// `‖u_h‖_{W^{1,q}} = (‖u_h‖_q^q + ‖∇u_h‖_q^q)^{1/q}`, the larger of the two for `q = ∞`.
pub fn w1q_norm(space: &FeSpace, tag: SurfaceTag, coeffs: &[f64], q: Exponent) -> Result<f64> {
    let a = lq_norm(space, tag, coeffs, q)?;
    let b = gradient_lq_norm(space, tag, coeffs, q)?;
    Ok(if q.is_infinite() { a.max(b) } else { (a.powf(q) + b.powf(q)).powf(1.0 / q) })
}

/// `‖f‖_{L^q}` of a function evaluated at points of the tagged surface.
pub fn lq_norm_fn<F>(space: &FeSpace, tag: SurfaceTag, f: F, q: Exponent) -> Result<f64>
where
    F: Fn(Point) -> f64 + Sync,
{
    check(q)?;
    let parts = integrate_power(space, tag, q, |ev, k| f(ev.points[k]))?;
    let r = reduce(parts, q);
    if q.is_infinite() {
        let nodes = space.mesh().nodes().iter().fold(0.0f64, |m, &x| m.max(f(x).abs()));
        return Ok(r.max(nodes));
    }
    Ok(r)
}

/// `‖u_h - f‖_{L^q}`.
pub fn lq_error<F>(space: &FeSpace, tag: SurfaceTag, coeffs: &[f64], f: F, q: Exponent) -> Result<f64>
where
    F: Fn(Point) -> f64 + Sync,
{
    check(q)?;
    check_len(space, coeffs)?;
    let n_loc = space.mesh().nodes_per_element();
    let parts = integrate_power(space, tag, q, |ev, k| {
        let mut c = [0.0; 8];
        local(space, ev.element, coeffs, &mut c[..n_loc]);
        ev.eval(k, &c[..n_loc]).0 - f(ev.points[k])
    })?;
    Ok(reduce(parts, q))
}

/// `‖u_h - f‖_{W^{1,q}}` with `grad_f` the (tangential or ambient) gradient of `f`;
/// its normal part is removed before comparison.
pub fn w1q_error<F, G>(space: &FeSpace, tag: SurfaceTag, coeffs: &[f64], f: F, grad_f: G, q: Exponent) -> Result<f64>
where
    F: Fn(Point) -> f64 + Sync,
    G: Fn(Point) -> Point + Sync,
{
    let a = lq_error(space, tag, coeffs, &f, q)?;
    let n_loc = space.mesh().nodes_per_element();
    let surface = space.mesh().surface();
    let t = space.mesh().time();
    let parts = integrate_power(space, tag, q, |ev, k| {
        let mut c = [0.0; 8];
        local(space, ev.element, coeffs, &mut c[..n_loc]);
        let gh = ev.eval(k, &c[..n_loc]).1;
        let y = ev.points[k];
        let n = surface.closest_point_unchecked(t, y).map(|cp| cp.normal).unwrap_or([0.0; 3]);
        let g = grad_f(y);
        let gt = vec3::sub(g, vec3::scale(vec3::dot(g, n), n));
        vec3::norm(vec3::sub(gh, gt))
    })?;
    let b = reduce(parts, q);
    Ok(if q.is_infinite() { a.max(b) } else { (a.powf(q) + b.powf(q)).powf(1.0 / q) })
}
