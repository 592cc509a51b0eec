use std::collections::HashMap;

use super::SurfaceMesh;
use crate::element::RefPoint;
use crate::error::{Error, Result};
use crate::geometry::vec3::{self, Point};

/// A point of `Γ_h(t)` given by element and reference coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshPoint {
    pub element: usize,
    pub xi: RefPoint,
}

const REF_TOL: f64 = 1e-10;

/// Inverse lift: finds `(K, ξ)` with `q(t, F_K(ξ)) = y` for `y ∈ Γ(t)`.
///
/// Candidates come from the elements around the nearest vertices in a
/// uniform bucket grid; each is tested by Newton's method on the tangential
/// residual `τ_a · (F_K(ξ) - y) = 0`.
pub struct Locator<'a> {
    mesh: &'a SurfaceMesh,
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
    node_elements: Vec<Vec<usize>>,
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a SurfaceMesh) -> Self {
        let cell = mesh.h().max(1e-12);
        let mut node_elements = vec![Vec::new(); mesh.n_nodes()];
        for e in 0..mesh.n_elements() {
            for &i in mesh.element(e) {
                node_elements[i].push(e);
            }
        }
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, &x) in mesh.nodes().iter().enumerate() {
            if !node_elements[i].is_empty() {
                buckets.entry(Self::key(cell, x)).or_default().push(i);
            }
        }
        Self { mesh, cell, buckets, node_elements }
    }

    fn key(cell: f64, x: Point) -> [i64; 3] {
        [(x[0] / cell).floor() as i64, (x[1] / cell).floor() as i64, (x[2] / cell).floor() as i64]
    }

    fn candidates(&self, y: Point) -> Vec<usize> {
        let c = Self::key(self.cell, y);
        let mut near: Vec<(f64, usize)> = Vec::new();
        let mut radius = 1;
        while radius <= 4 {
            near.clear();
            for dx in -radius..=radius {
                for dy in -radius..=radius {
                    for dz in -radius..=radius {
                        if let Some(list) = self.buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                            near.extend(list.iter().map(|&i| (vec3::dist(self.mesh.node(i), y), i)));
                        }
                    }
                }
            }
            if !near.is_empty() {
                break;
            }
            radius += 1;
        }
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<usize> = Vec::new();
        for &(_, i) in near.iter().take(8) {
            for &e in &self.node_elements[i] {
                if !out.contains(&e) {
                    out.push(e);
                }
            }
        }
        out
    }

    /// Element and reference coordinates of the preimage of `y ∈ Γ(t)`.
    pub fn locate_lifted(&self, y: Point) -> Result<MeshPoint> {
        let surface = self.mesh.surface();
        let t = self.mesh.time();
        let cp = surface.closest_point(t, y)?;
        let normal = cp.normal;
        let tube = surface.tube_radius(t);
        let cands = self.candidates(y);
        let try_all = |list: &mut dyn Iterator<Item = usize>| -> Option<MeshPoint> {
            for e in list {
                if let Some(xi) = self.newton(e, y, normal) {
                    let (x, _) = self.mesh.map(e, xi);
                    if vec3::dist(x, y) <= tube {
                        return Some(MeshPoint { element: e, xi });
                    }
                }
            }
            None
        };
        if let Some(p) = try_all(&mut cands.iter().copied()) {
            return Ok(p);
        }
        if let Some(p) = try_all(&mut (0..self.mesh.n_elements())) {
            return Ok(p);
        }
        Err(Error::PointNotOnMesh(format!("no element lifts onto ({:.6}, {:.6}, {:.6})", y[0], y[1], y[2])))
    }

    /// Element and reference coordinates of a point lying on `Γ_h(t)`.
    pub fn locate(&self, x: Point) -> Result<MeshPoint> {
        let y = self.mesh.lift_point(x)?;
        let p = self.locate_lifted(y)?;
        let (xp, _) = self.mesh.map(p.element, p.xi);
        let scale = self.mesh.h().max(1.0);
        if vec3::dist(xp, x) > 1e-9 * scale {
            return Err(Error::PointNotOnMesh(format!("point is {:.3e} away from the mesh", vec3::dist(xp, x))));
        }
        Ok(p)
    }

    fn newton(&self, e: usize, y: Point, normal: Point) -> Option<RefPoint> {
        let mesh = self.mesh;
        let dim = mesh.dim();
        let (t0, t1) = tangent_basis(normal, dim);
        let mut xi = mesh.reference().barycenter();
        for _ in 0..30 {
            let (x, frame) = mesh.map(e, xi);
            let d = vec3::sub(x, y);
            if dim == 1 {
                let r = vec3::dot(t0, d);
                let j = vec3::dot(t0, frame.cols[0]);
                if j.abs() < 1e-300 {
                    return None;
                }
                let step = r / j;
                xi[0] -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            } else {
                let r = [vec3::dot(t0, d), vec3::dot(t1, d)];
                let j = [
                    [vec3::dot(t0, frame.cols[0]), vec3::dot(t0, frame.cols[1])],
                    [vec3::dot(t1, frame.cols[0]), vec3::dot(t1, frame.cols[1])],
                ];
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if det.abs() < 1e-300 {
                    return None;
                }
                let s0 = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
                let s1 = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
                xi[0] -= s0;
                xi[1] -= s1;
                if s0.abs().max(s1.abs()) < 1e-15 {
                    break;
                }
            }
            if xi.iter().any(|v| !v.is_finite() || v.abs() > 10.0) {
                return None;
            }
        }
        if !mesh.reference().contains(xi, REF_TOL) {
            return None;
        }
        // clamp round-off excursions
        if dim == 1 {
            xi[0] = xi[0].clamp(0.0, 1.0);
        } else {
            xi[0] = xi[0].max(0.0);
            xi[1] = xi[1].max(0.0);
            let s = xi[0] + xi[1];
            if s > 1.0 {
                xi[0] /= s;
                xi[1] /= s;
            }
        }
        Some(xi)
    }
}

fn tangent_basis(n: Point, dim: usize) -> (Point, Point) {
    if dim == 1 {
        return ([-n[1], n[0], 0.0], [0.0; 3]);
    }
    let a = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let t0 = vec3::normalize(vec3::cross(n, a));
    let t1 = vec3::cross(n, t0);
    (t0, t1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceSpec;
    use crate::mesh::{build_circle_mesh, build_sphere_mesh, build_torus_mesh};

    #[test]
    fn nodes_round_trip_through_lift() {
        let meshes = vec![
            build_circle_mesh(&SurfaceSpec::circle(1.0), 12, 3).unwrap(),
            build_sphere_mesh(&SurfaceSpec::sphere(1.0), 2, 2).unwrap(),
            build_torus_mesh(&SurfaceSpec::torus(2.0, 0.7), 12, 1).unwrap(),
            build_sphere_mesh(&SurfaceSpec::ellipsoid_flow([1.0, 0.8, 0.6]), 1, 2).unwrap(),
        ];
        for m in &meshes {
            let loc = Locator::new(m);
            for (i, &x) in m.nodes().iter().enumerate().step_by(3) {
                let y = m.lift_point(x).unwrap();
                assert!(vec3::dist(x, y) < 1e-12);
                let p = loc.locate_lifted(y).unwrap();
                let (back, _) = m.map(p.element, p.xi);
                assert!(vec3::dist(back, x) < 1e-12, "node {i}");
            }
        }
    }

    #[test]
    fn interior_points_round_trip() {
        let m = build_sphere_mesh(&SurfaceSpec::sphere(1.0), 2, 2).unwrap();
        let loc = Locator::new(&m);
        for e in (0..m.n_elements()).step_by(7) {
            let (x, _) = m.map(e, [0.2, 0.3]);
            let y = m.lift_point(x).unwrap();
            let p = loc.locate_lifted(y).unwrap();
            let (back, _) = m.map(p.element, p.xi);
            assert!(vec3::dist(back, x) < 1e-12);
            assert!(loc.locate(x).is_ok());
        }
    }

    #[test]
    fn chord_midpoint_lifts_radially() {
        let m = build_circle_mesh(&SurfaceSpec::circle(1.0), 4, 1).unwrap();
        let x = [0.5, 0.5, 0.0];
        let y = m.lift_point(x).unwrap();
        let s = 0.5f64.sqrt();
        assert!(vec3::dist(y, [s, s, 0.0]) < 1e-15);
        assert!((y[0] - s).abs() < 1e-15);
    }

    #[test]
    fn point_off_mesh_is_rejected() {
        let m = build_circle_mesh(&SurfaceSpec::circle(1.0), 8, 1).unwrap();
        let loc = Locator::new(&m);
        assert!(loc.locate([1.0, 0.1, 0.0]).is_err());
    }
}
