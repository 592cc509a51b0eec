//! Isoparametric triangulations `Γ_h(t)` of the catalog surfaces.
//!
//! A mesh stores the node positions at its time stamp together with the
//! positions at `t = 0`; evolving applies the flow map to the latter, so
//! nodes stay exactly on `Γ(t)` and move with the interpolated velocity.

mod build;
pub mod io;
mod lift;
mod locate;

use std::sync::Arc;

use crate::element::{Frame, QuadratureRule, RefPoint, ReferenceElement};
use crate::error::{Error, Result};
use crate::geometry::vec3::{self, Point};
use crate::geometry::SurfaceSpec;

pub use build::{build_circle_mesh, build_mesh, build_sphere_mesh, build_torus_mesh};
pub use lift::{LiftPoint, LiftTable};
pub use locate::{Locator, MeshPoint};

const MAX_LOCAL_NODES: usize = 6;

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    surface: SurfaceSpec,
    reference: ReferenceElement,
    nodes: Vec<Point>,
    initial_nodes: Arc<Vec<Point>>,
    elements: Arc<Vec<usize>>,
    time: f64,
    h: f64,
}

/// Per-mesh quality figures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiUniformityReport {
    /// `h / min ρ_l`.
    pub k_measured: f64,
    pub h: f64,
    pub min_diameter: f64,
    /// Smallest inscribed radius (half the shortest chord for segments).
    pub min_inscribed_radius: f64,
    /// Largest condition number of an element Jacobian over sample points.
    pub kappa0: f64,
    /// `max |q ∘ F_K - F_K|` over sample points.
    pub geometric_error: f64,
}

/// Residuals of the structural mesh invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantReport {
    pub max_node_residual: f64,
    /// Smallest cosine between element and surface normals at barycenters.
    pub min_orientation: f64,
    pub quasi_uniformity: f64,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.max_node_residual <= 1e-12 && self.min_orientation > 0.0 && self.quasi_uniformity <= 8.0
    }
}

impl SurfaceMesh {
    /// Assembles a mesh from raw parts. `elements` is flattened with
    /// `reference.n_nodes()` entries per element.
    pub fn from_parts(
        surface: SurfaceSpec,
        degree: usize,
        nodes: Vec<Point>,
        elements: Vec<usize>,
        time: f64,
    ) -> Result<Self> {
        let reference = ReferenceElement::new(surface.dim(), degree)?;
        let npe = reference.n_nodes();
        if elements.is_empty() || elements.len() % npe != 0 {
            return Err(Error::DegenerateMesh(format!(
                "element table of length {} is not a multiple of {npe}",
                elements.len()
            )));
        }
        if let Some(&bad) = elements.iter().find(|&&i| i >= nodes.len()) {
            return Err(Error::DegenerateMesh(format!("node index {bad} out of range")));
        }
        if nodes.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFiniteValue("mesh node coordinate".into()));
        }
        let initial: Vec<Point> = nodes.iter().map(|&x| surface.inverse_flow(time, x)).collect();
        let mut mesh = Self {
            surface,
            reference,
            nodes,
            initial_nodes: Arc::new(initial),
            elements: Arc::new(elements),
            time,
            h: 0.0,
        };
        mesh.h = (0..mesh.n_elements()).map(|e| mesh.element_diameter(e)).fold(0.0, f64::max);
        if mesh.h <= 0.0 {
            return Err(Error::DegenerateMesh("zero mesh size".into()));
        }
        Ok(mesh)
    }

    pub fn surface(&self) -> &SurfaceSpec {
        &self.surface
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    pub fn degree(&self) -> usize {
        self.reference.degree()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.reference.n_nodes()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len() / self.nodes_per_element()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn initial_nodes(&self) -> &[Point] {
        &self.initial_nodes
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let npe = self.nodes_per_element();
        &self.elements[e * npe..(e + 1) * npe]
    }

    pub fn element_table(&self) -> &[usize] {
        &self.elements
    }

    /// Whether two meshes share connectivity and reference configuration.
    pub fn same_topology(&self, other: &SurfaceMesh) -> bool {
        (Arc::ptr_eq(&self.elements, &other.elements) || self.elements == other.elements)
            && self.reference == other.reference
            && self.nodes.len() == other.nodes.len()
    }

    /// Global vertex indices of element `e`.
    pub fn element_vertices(&self, e: usize) -> Vec<usize> {
        let el = self.element(e);
        self.reference.vertex_indices().into_iter().map(|l| el[l]).collect()
    }

    /// Largest distance between two vertices of `e`.
    pub fn element_diameter(&self, e: usize) -> f64 {
        let v: Vec<Point> = self.element_vertices(e).into_iter().map(|i| self.nodes[i]).collect();
        let mut d: f64 = 0.0;
        for a in 0..v.len() {
            for b in a + 1..v.len() {
                d = d.max(vec3::dist(v[a], v[b]));
            }
        }
        d
    }

    /// Inscribed-ball diameter of `e`, scaled so an equilateral triangle
    /// gets its edge length and a segment its chord.
    pub fn element_rho(&self, e: usize) -> f64 {
        let v: Vec<Point> = self.element_vertices(e).into_iter().map(|i| self.nodes[i]).collect();
        if v.len() == 2 {
            return vec3::dist(v[0], v[1]);
        }
        2.0 * 3f64.sqrt() * inradius(v[0], v[1], v[2])
    }

    /// Element map `F_K(ξ)` and its tangent frame.
    pub fn map(&self, e: usize, xi: RefPoint) -> (Point, Frame) {
        let mut v = [0.0; MAX_LOCAL_NODES];
        let mut g = [[0.0; 2]; MAX_LOCAL_NODES];
        let n = self.nodes_per_element();
        self.reference.eval(xi, &mut v[..n], &mut g[..n]);
        self.map_with_basis(e, &v[..n], &g[..n])
    }

    /// Element map from precomputed reference basis values and gradients.
    #[inline]
    pub fn map_with_basis(&self, e: usize, values: &[f64], grads: &[[f64; 2]]) -> (Point, Frame) {
        let el = self.element(e);
        let mut x = [0.0; 3];
        let mut c0 = [0.0; 3];
        let mut c1 = [0.0; 3];
        for (l, &i) in el.iter().enumerate() {
            let p = self.nodes[i];
            for d in 0..3 {
                x[d] += values[l] * p[d];
                c0[d] += grads[l][0] * p[d];
                c1[d] += grads[l][1] * p[d];
            }
        }
        (x, Frame::new(self.dim(), [c0, c1]))
    }

    /// Snapshot of this mesh at time `t`.
    pub fn evolve(&self, t: f64) -> Result<SurfaceMesh> {
        let horizon = self.surface.horizon();
        if !(t.is_finite() && t >= -1e-12 && t <= horizon * (1.0 + 1e-12) + 1e-12) {
            return Err(Error::FlowEvaluationFailure(format!("time {t} outside [0, {horizon}]")));
        }
        let nodes: Vec<Point> = if self.surface.is_stationary() {
            self.initial_nodes.to_vec()
        } else {
            self.initial_nodes.iter().map(|&y| self.surface.flow_position(t, y)).collect()
        };
        if nodes.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::FlowEvaluationFailure(format!("non-finite node position at t = {t}")));
        }
        let mut out = Self {
            surface: self.surface.clone(),
            reference: self.reference.clone(),
            nodes,
            initial_nodes: Arc::clone(&self.initial_nodes),
            elements: Arc::clone(&self.elements),
            time: t,
            h: 0.0,
        };
        out.h = (0..out.n_elements()).map(|e| out.element_diameter(e)).fold(0.0, f64::max);
        Ok(out)
    }

    /// Node positions carried back to `t = 0` by the inverse flow.
    pub fn pull_back(&self) -> Vec<Point> {
        self.nodes.iter().map(|&x| self.surface.inverse_flow(self.time, x)).collect()
    }

    /// Nodal velocities `v(t, x_i)`; their interpolant is the discrete velocity.
    pub fn node_velocities(&self) -> Vec<Point> {
        self.nodes.iter().map(|&x| self.surface.velocity(self.time, x)).collect()
    }

    /// `|Γ_h(t)|` by quadrature.
    pub fn measure(&self) -> f64 {
        let rule = QuadratureRule::with_order(self.dim(), 2 * self.degree() + 4);
        let basis = BasisTable::new(&self.reference, &rule);
        let mut total = 0.0;
        for e in 0..self.n_elements() {
            for (q, &w) in rule.weights().iter().enumerate() {
                let (_, frame) = self.map_with_basis(e, basis.values(q), basis.grads(q));
                total += w * frame.sqrt_det;
            }
        }
        total
    }

    pub fn quasi_uniformity_report(&self) -> QuasiUniformityReport {
        let ne = self.n_elements();
        let mut min_rho = f64::INFINITY;
        let mut min_diam = f64::INFINITY;
        let mut kappa0: f64 = 0.0;
        let mut geo: f64 = 0.0;
        let samples: Vec<RefPoint> =
            self.reference.nodes().iter().copied().chain([self.reference.barycenter()]).collect();
        for e in 0..ne {
            min_rho = min_rho.min(self.element_rho(e));
            min_diam = min_diam.min(self.element_diameter(e));
            for &xi in &samples {
                let (x, frame) = self.map(e, xi);
                kappa0 = kappa0.max(jacobian_condition(&frame));
                if let Ok(cp) = self.surface.closest_point_unchecked(self.time, x) {
                    geo = geo.max(cp.signed_distance.abs());
                }
            }
            // midpoints between sample points catch the interior deviation
            let (x, _) = self.map(e, quarter_point(self.dim()));
            if let Ok(cp) = self.surface.closest_point_unchecked(self.time, x) {
                geo = geo.max(cp.signed_distance.abs());
            }
        }
        let min_inscribed_radius = if self.dim() == 1 { 0.5 * min_rho } else { min_rho / (2.0 * 3f64.sqrt()) };
        QuasiUniformityReport {
            k_measured: self.h / min_rho,
            h: self.h,
            min_diameter: min_diam,
            min_inscribed_radius,
            kappa0,
            geometric_error: geo,
        }
    }

    pub fn check_invariants(&self) -> InvariantReport {
        let max_node_residual =
            self.nodes.iter().map(|&x| self.surface.level_set(self.time, x).abs()).fold(0.0, f64::max);
        let mut min_orientation = f64::INFINITY;
        for e in 0..self.n_elements() {
            let (x, frame) = self.map(e, self.reference.barycenter());
            let n_el = vec3::normalize(frame.orientation_normal());
            let n_s = match self.surface.closest_point_unchecked(self.time, x) {
                Ok(cp) => cp.normal,
                Err(_) => [0.0; 3],
            };
            min_orientation = min_orientation.min(vec3::dot(n_el, n_s));
        }
        InvariantReport {
            max_node_residual,
            min_orientation,
            quasi_uniformity: self.quasi_uniformity_report().k_measured,
        }
    }

    /// Fails with `DegenerateMesh` when an invariant is violated.
    pub fn validate(&self) -> Result<InvariantReport> {
        let r = self.check_invariants();
        if !r.holds() {
            return Err(Error::DegenerateMesh(format!(
                "node residual {:.3e}, orientation {:.3e}, K {:.3}",
                r.max_node_residual, r.min_orientation, r.quasi_uniformity
            )));
        }
        Ok(r)
    }

    /// Maps a point of `Γ_h(t)` to `Γ(t)`.
    pub fn lift_point(&self, x: Point) -> Result<Point> {
        Ok(self.surface.closest_point(self.time, x)?.point)
    }
}

fn quarter_point(dim: usize) -> RefPoint {
    if dim == 1 {
        [0.25, 0.0]
    } else {
        [0.25, 0.25]
    }
}

fn jacobian_condition(frame: &Frame) -> f64 {
    if frame.dim == 1 {
        return 1.0;
    }
    let g = frame.metric;
    let tr = g[0][0] + g[1][1];
    let det = g[0][0] * g[1][1] - g[0][1] * g[0][1];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let lmax = 0.5 * tr + disc;
    let lmin = (0.5 * tr - disc).max(f64::MIN_POSITIVE);
    (lmax / lmin).sqrt()
}

fn inradius(a: Point, b: Point, c: Point) -> f64 {
    let la = vec3::dist(b, c);
    let lb = vec3::dist(c, a);
    let lc = vec3::dist(a, b);
    let area = 0.5 * vec3::norm(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)));
    2.0 * area / (la + lb + lc)
}

/// Reference basis values and gradients tabulated at the points of a rule.
#[derive(Clone, Debug)]
pub struct BasisTable {
    n_loc: usize,
    values: Vec<f64>,
    grads: Vec<[f64; 2]>,
}

impl BasisTable {
    pub fn new(reference: &ReferenceElement, rule: &QuadratureRule) -> Self {
        Self::at_points(reference, rule.points())
    }

    pub fn at_points(reference: &ReferenceElement, points: &[RefPoint]) -> Self {
        let n_loc = reference.n_nodes();
        let mut values = vec![0.0; n_loc * points.len()];
        let mut grads = vec![[0.0; 2]; n_loc * points.len()];
        for (q, &p) in points.iter().enumerate() {
            reference.eval(p, &mut values[q * n_loc..(q + 1) * n_loc], &mut grads[q * n_loc..(q + 1) * n_loc]);
        }
        Self { n_loc, values, grads }
    }

    pub fn n_loc(&self) -> usize {
        self.n_loc
    }

    #[inline]
    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_loc..(q + 1) * self.n_loc]
    }

    #[inline]
    pub fn grads(&self, q: usize) -> &[[f64; 2]] {
        &self.grads[q * self.n_loc..(q + 1) * self.n_loc]
    }
}
