use super::{BasisTable, SurfaceMesh};
use crate::element::{Frame, QuadratureRule};
use crate::error::{Error, Result};
use crate::geometry::vec3::Point;

/// Quadrature point of `Γ_h(t)` paired with its lift on `Γ(t)`.
#[derive(Clone, Copy, Debug)]
pub struct LiftPoint {
    pub discrete: Point,
    pub lifted: Point,
    pub discrete_frame: Frame,
    /// Frame of `q ∘ F_K`, i.e. `Dq · J`.
    pub lifted_frame: Frame,
}

impl LiftPoint {
    /// Measure ratio `a_h = √det G_h / √det G_ℓ`.
    pub fn measure_ratio(&self) -> f64 {
        self.discrete_frame.sqrt_det / self.lifted_frame.sqrt_det
    }
}

/// Lifted geometry at every quadrature point of every element.
#[derive(Clone, Debug)]
pub struct LiftTable {
    per_element: usize,
    points: Vec<LiftPoint>,
}

impl LiftTable {
    pub fn new(mesh: &SurfaceMesh, rule: &QuadratureRule) -> Result<Self> {
        let basis = BasisTable::new(mesh.reference(), rule);
        Self::with_basis(mesh, &basis, rule.len())
    }

    pub fn with_basis(mesh: &SurfaceMesh, basis: &BasisTable, per_element: usize) -> Result<Self> {
        let surface = mesh.surface();
        let t = mesh.time();
        let mut points = Vec::with_capacity(mesh.n_elements() * per_element);
        for e in 0..mesh.n_elements() {
            for q in 0..per_element {
                let (x, frame) = mesh.map_with_basis(e, basis.values(q), basis.grads(q));
                let cp = surface.closest_point(t, x)?;
                let dq = surface.projection_jacobian(t, x)?;
                let lifted_frame = frame.transformed(&dq);
                if !(lifted_frame.sqrt_det > 0.0) || !(frame.sqrt_det > 0.0) {
                    return Err(Error::SingularElement { element: e, det: frame.sqrt_det.min(lifted_frame.sqrt_det) });
                }
                points.push(LiftPoint { discrete: x, lifted: cp.point, discrete_frame: frame, lifted_frame });
            }
        }
        Ok(Self { per_element, points })
    }

    pub fn per_element(&self) -> usize {
        self.per_element
    }

    pub fn element(&self, e: usize) -> &[LiftPoint] {
        &self.points[e * self.per_element..(e + 1) * self.per_element]
    }

    pub fn points(&self) -> &[LiftPoint] {
        &self.points
    }
}
