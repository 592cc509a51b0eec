//! Lagrange finite element spaces on `Γ_h(t)` and on its lift to `Γ(t)`.
//!
//! A space is tied to one mesh snapshot. Integrals carry a [`SurfaceTag`]:
//! `Discrete` integrates over `Γ_h(t)`, `Lifted` over `Γ(t)` with the lifted
//! basis `φ_j ∘ (q|_{Γ_h})⁻¹`, realized by pulling back through `q ∘ F_K`.

mod assembly;
pub mod io;
mod norms;
mod prefactors;
mod projection;

use std::sync::{Arc, OnceLock};

use crate::element::QuadratureRule;
use crate::error::{Error, Result};
use crate::geometry::vec3::{self, Point};
use crate::mesh::{BasisTable, LiftTable, Locator, MeshPoint, SurfaceMesh};

pub use assembly::{
    assemble_load, assemble_load_pulled, assemble_mass, assemble_operators, assemble_stiffness, Operators,
};
pub use norms::{gradient_lq_norm, lq_error, lq_norm, lq_norm_fn, w1q_error, w1q_norm, Exponent};
pub use prefactors::{compute_prefactors, radial_lift_density, PrefactorField, PrefactorSample};
pub use projection::{discrete_delta, discrete_laplacian, interpolate, l2_project, load_at_point, ritz_project};

/// Elements per parallel work item. Fixed so that reductions do not depend
/// on the number of workers.
pub(crate) const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SurfaceTag {
    Discrete,
    Lifted,
}

pub struct FeSpace {
    mesh: Arc<SurfaceMesh>,
    rule: QuadratureRule,
    basis: BasisTable,
    lift: OnceLock<LiftTable>,
}

impl std::fmt::Debug for FeSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeSpace")
            .field("ndofs", &self.ndofs())
            .field("degree", &self.degree())
            .field("quadrature_order", &self.rule.order())
            .finish()
    }
}

/// Quadrature data of one element on the chosen surface.
#[derive(Clone, Debug, Default)]
pub struct ElementValues {
    pub element: usize,
    pub n_loc: usize,
    pub n_qp: usize,
    /// Quadrature weight times area element.
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
    /// `phi[q * n_loc + l]`.
    pub phi: Vec<f64>,
    /// Surface gradients, same layout as `phi`.
    pub grads: Vec<Point>,
}

impl ElementValues {
    #[inline]
    pub fn phi(&self, q: usize) -> &[f64] {
        &self.phi[q * self.n_loc..(q + 1) * self.n_loc]
    }

    #[inline]
    pub fn grads(&self, q: usize) -> &[Point] {
        &self.grads[q * self.n_loc..(q + 1) * self.n_loc]
    }

    /// Value and gradient at quadrature point `q` of the function with local
    /// coefficients `c`.
    #[inline]
    pub fn eval(&self, q: usize, c: &[f64]) -> (f64, Point) {
        let mut v = 0.0;
        let mut g = [0.0; 3];
        for (l, (&p, &d)) in self.phi(q).iter().zip(self.grads(q)).enumerate() {
            v += c[l] * p;
            g = vec3::add(g, vec3::scale(c[l], d));
        }
        (v, g)
    }
}

impl FeSpace {
    /// Space with quadrature exactness `2k + 2`.
    pub fn new(mesh: Arc<SurfaceMesh>) -> Self {
        let order = 2 * mesh.degree() + 2;
        Self::with_quadrature_order(mesh, order)
    }

    pub fn with_quadrature_order(mesh: Arc<SurfaceMesh>, order: usize) -> Self {
        let rule = QuadratureRule::with_order(mesh.dim(), order);
        let basis = BasisTable::new(mesh.reference(), &rule);
        Self { mesh, rule, basis, lift: OnceLock::new() }
    }

    pub fn mesh(&self) -> &Arc<SurfaceMesh> {
        &self.mesh
    }

    pub fn ndofs(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn degree(&self) -> usize {
        self.mesh.degree()
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn basis(&self) -> &BasisTable {
        &self.basis
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    /// Lifted geometry at the quadrature points, computed on first use.
    pub fn lift_table(&self) -> Result<&LiftTable> {
        if let Some(t) = self.lift.get() {
            return Ok(t);
        }
        let table = LiftTable::with_basis(&self.mesh, &self.basis, self.rule.len())?;
        let _ = self.lift.set(table);
        Ok(self.lift.get().expect("lift table initialized"))
    }

    pub fn new_element_values(&self) -> ElementValues {
        let n_loc = self.mesh.nodes_per_element();
        let n_qp = self.rule.len();
        ElementValues {
            element: 0,
            n_loc,
            n_qp,
            weights: vec![0.0; n_qp],
            points: vec![[0.0; 3]; n_qp],
            phi: vec![0.0; n_qp * n_loc],
            grads: vec![[0.0; 3]; n_qp * n_loc],
        }
    }

    /// Fills `buf` with the quadrature data of element `e`.
    pub fn element_values(&self, e: usize, tag: SurfaceTag, buf: &mut ElementValues) -> Result<()> {
        let n_loc = buf.n_loc;
        buf.element = e;
        let lift = match tag {
            SurfaceTag::Lifted => Some(self.lift_table()?.element(e)),
            SurfaceTag::Discrete => None,
        };
        let scale = self.mesh.h().powi(self.dim() as i32);
        for q in 0..buf.n_qp {
            let (point, frame) = match lift {
                Some(lp) => (lp[q].lifted, lp[q].lifted_frame),
                None => self.mesh.map_with_basis(e, self.basis.values(q), self.basis.grads(q)),
            };
            if !(frame.sqrt_det > 1e-14 * scale) {
                return Err(Error::SingularElement { element: e, det: frame.sqrt_det });
            }
            buf.weights[q] = self.rule.weights()[q] * frame.sqrt_det;
            buf.points[q] = point;
            buf.phi[q * n_loc..(q + 1) * n_loc].copy_from_slice(self.basis.values(q));
            for (l, g) in self.basis.grads(q).iter().enumerate() {
                buf.grads[q * n_loc + l] = frame.surface_gradient(*g);
            }
        }
        Ok(())
    }

    /// Locates a point of `Γ_h(t)`.
    pub fn locate(&self, x: Point) -> Result<MeshPoint> {
        Locator::new(&self.mesh).locate(x)
    }

    /// Value of the basis-weighted combination `c` at a mesh point.
    pub fn evaluate(&self, coeffs: &[f64], p: MeshPoint) -> f64 {
        let v = self.mesh.reference().eval_values(p.xi);
        self.mesh.element(p.element).iter().zip(v).map(|(&i, vi)| coeffs[i] * vi).sum()
    }

    /// Basis values `φ_i(p)` on the element containing `p`.
    pub fn basis_at(&self, p: MeshPoint) -> Vec<(usize, f64)> {
        let v = self.mesh.reference().eval_values(p.xi);
        self.mesh.element(p.element).iter().copied().zip(v).collect()
    }

    /// Runs `f` on every element in fixed chunks and returns the per-chunk
    /// results in element order.
    pub(crate) fn map_chunks<T, F>(&self, tag: SurfaceTag, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut ElementValues, &mut T) -> Result<()> + Sync,
        T: Default,
    {
        use rayon::prelude::*;
        if tag == SurfaceTag::Lifted {
            self.lift_table()?;
        }
        let ne = self.n_elements();
        let chunks: Vec<usize> = (0..ne.div_ceil(CHUNK)).collect();
        chunks
            .par_iter()
            .map(|&c| {
                let mut buf = self.new_element_values();
                let mut acc = T::default();
                for e in c * CHUNK..((c + 1) * CHUNK).min(ne) {
                    self.element_values(e, tag, &mut buf)?;
                    f(&mut buf, &mut acc)?;
                }
                Ok(acc)
            })
            .collect()
    }
}

/// Coefficient vector bound to a space and a surface tag.
#[derive(Clone, Debug)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
    tag: SurfaceTag,
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>, tag: SurfaceTag) -> Result<Self> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::DimensionMismatch { expected: space.ndofs(), got: coeffs.len() });
        }
        Ok(Self { space, coeffs, tag })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn tag(&self) -> SurfaceTag {
        self.tag
    }

    /// The same coefficients read on the other surface (lift or inverse lift).
    pub fn retagged(&self, tag: SurfaceTag) -> Self {
        Self { space: Arc::clone(&self.space), coeffs: self.coeffs.clone(), tag }
    }

    pub fn value_at(&self, p: MeshPoint) -> f64 {
        self.space.evaluate(&self.coeffs, p)
    }

    /// Value of the lift `u_h^ℓ` at a point `y ∈ Γ(t)`.
    pub fn lifted_value(&self, y: Point) -> Result<f64> {
        let p = Locator::new(self.space.mesh()).locate_lifted(y)?;
        Ok(self.value_at(p))
    }

    pub fn lq_norm(&self, q: Exponent) -> Result<f64> {
        lq_norm(&self.space, self.tag, &self.coeffs, q)
    }

    pub fn w1q_norm(&self, q: Exponent) -> Result<f64> {
        w1q_norm(&self.space, self.tag, &self.coeffs, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceSpec;
    use crate::mesh::{build_circle_mesh, build_sphere_mesh};

    #[test]
    fn partition_of_unity_at_quadrature_points() {
        for mesh in [
            build_circle_mesh(&SurfaceSpec::circle(1.0), 8, 3).unwrap(),
            build_sphere_mesh(&SurfaceSpec::sphere(1.0), 1, 2).unwrap(),
        ] {
            let space = FeSpace::new(Arc::new(mesh));
            let mut buf = space.new_element_values();
            for tag in [SurfaceTag::Discrete, SurfaceTag::Lifted] {
                for e in 0..space.n_elements() {
                    space.element_values(e, tag, &mut buf).unwrap();
                    for q in 0..buf.n_qp {
                        let s: f64 = buf.phi(q).iter().sum();
                        let g = buf.grads(q).iter().fold([0.0; 3], |a, &b| vec3::add(a, b));
                        assert!((s - 1.0).abs() < 1e-13);
                        assert!(vec3::norm(g) < 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn nodal_evaluation_returns_coefficients() {
        let mesh = Arc::new(build_sphere_mesh(&SurfaceSpec::sphere(1.0), 1, 2).unwrap());
        let space = Arc::new(FeSpace::new(Arc::clone(&mesh)));
        let coeffs: Vec<f64> = (0..space.ndofs()).map(|i| (i as f64 * 0.37).sin()).collect();
        let u = FeFunction::new(Arc::clone(&space), coeffs.clone(), SurfaceTag::Discrete).unwrap();
        for e in [0, 5, 17] {
            for (l, &xi) in mesh.reference().nodes().iter().enumerate() {
                let i = mesh.element(e)[l];
                assert!((u.value_at(MeshPoint { element: e, xi }) - coeffs[i]).abs() < 1e-14);
                assert!((u.lifted_value(mesh.node(i)).unwrap() - coeffs[i]).abs() < 1e-12);
            }
        }
        assert!(FeFunction::new(space, vec![0.0; 3], SurfaceTag::Discrete).is_err());
    }

    #[test]
    fn lifted_value_of_linear_function_on_square() {
        // x₁ on the inscribed square, lifted: value at the chord midpoint direction
        let mesh = Arc::new(build_circle_mesh(&SurfaceSpec::circle(1.0), 4, 1).unwrap());
        let space = Arc::new(FeSpace::new(Arc::clone(&mesh)));
        let c: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
        let u = FeFunction::new(space, c, SurfaceTag::Discrete).unwrap();
        let s = 0.5f64.sqrt();
        let v = u.lifted_value([s, s, 0.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }
}
