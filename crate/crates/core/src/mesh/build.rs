use std::collections::HashMap;
use std::f64::consts::PI;

use super::SurfaceMesh;
use crate::error::{Error, Result};
use crate::geometry::vec3::{self, Point};
use crate::geometry::{SurfaceKind, SurfaceSpec};

/// Mesh of `Γ(0)` at the given resolution: element count for circles,
/// subdivision levels for sphere-like surfaces, major segments for the torus.
pub fn build_mesh(spec: &SurfaceSpec, resolution: usize, degree: usize) -> Result<SurfaceMesh> {
    match spec.kind() {
        SurfaceKind::Circle => build_circle_mesh(spec, resolution, degree),
        SurfaceKind::Torus => build_torus_mesh(spec, resolution, degree),
        _ => build_sphere_mesh(spec, resolution, degree),
    }
}

pub fn build_circle_mesh(spec: &SurfaceSpec, n: usize, degree: usize) -> Result<SurfaceMesh> {
    if spec.kind() != SurfaceKind::Circle {
        return Err(Error::UnsupportedSurface(format!("circle mesh on {}", spec.kind())));
    }
    if n < 4 {
        return Err(Error::DegenerateMesh(format!("circle mesh needs N >= 4, got {n}")));
    }
    if !(1..=3).contains(&degree) {
        return Err(Error::InvalidArgument(format!("curve elements support k in 1..=3, got {degree}")));
    }
    let r = spec.radius(0.0).unwrap();
    let total = n * degree;
    let nodes: Vec<Point> = (0..total)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / total as f64;
            [r * a.cos(), r * a.sin(), 0.0]
        })
        .collect();
    let mut elements = Vec::with_capacity(n * (degree + 1));
    for e in 0..n {
        for j in 0..=degree {
            elements.push((e * degree + j) % total);
        }
    }
    SurfaceMesh::from_parts(spec.clone(), degree, nodes, elements, 0.0)
}

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

fn unit_icosphere(levels: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ];
    let mut verts: Vec<Point> = raw.iter().map(|&v| vec3::normalize(v)).collect();
    let mut faces: Vec<[usize; 3]> = ICOSAHEDRON_FACES.to_vec();
    for _ in 0..levels {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(vec3::normalize(vec3::add(verts[a], verts[b])));
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    (verts, faces)
}

/// Appends one node per edge (degree 2) placed at the closest point of the
/// chord midpoint and returns the flattened element table.
fn with_edge_nodes(
    spec: &SurfaceSpec,
    nodes: &mut Vec<Point>,
    faces: &[[usize; 3]],
    degree: usize,
) -> Result<Vec<usize>> {
    if degree == 1 {
        return Ok(faces.iter().flat_map(|f| f.iter().copied()).collect());
    }
    let mut edge_node: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elements = Vec::with_capacity(faces.len() * 6);
    for f in faces {
        elements.extend_from_slice(f);
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let key = (a.min(b), a.max(b));
            let idx = match edge_node.get(&key) {
                Some(&i) => i,
                None => {
                    let m = vec3::scale(0.5, vec3::add(nodes[a], nodes[b]));
                    let q = spec.closest_point(0.0, m)?.point;
                    nodes.push(q);
                    edge_node.insert(key, nodes.len() - 1);
                    nodes.len() - 1
                }
            };
            elements.push(idx);
        }
    }
    Ok(elements)
}

fn check_triangle_degree(degree: usize) -> Result<()> {
    if !(1..=2).contains(&degree) {
        return Err(Error::InvalidArgument(format!("surface elements support k in 1..=2, got {degree}")));
    }
    Ok(())
}

/// Icosphere mesh of a sphere, scaled sphere or ellipsoid at `t = 0`.
pub fn build_sphere_mesh(spec: &SurfaceSpec, levels: usize, degree: usize) -> Result<SurfaceMesh> {
    check_triangle_degree(degree)?;
    let axes = match spec.kind() {
        SurfaceKind::Sphere | SurfaceKind::ScaledSphereFlow => [spec.radius(0.0).unwrap(); 3],
        SurfaceKind::EllipsoidFlow => [spec.params()[0], spec.params()[1], spec.params()[2]],
        other => return Err(Error::UnsupportedSurface(format!("icosphere mesh on {other}"))),
    };
    let (unit, faces) = unit_icosphere(levels);
    let mut nodes: Vec<Point> = unit.iter().map(|u| [axes[0] * u[0], axes[1] * u[1], axes[2] * u[2]]).collect();
    let elements = with_edge_nodes(spec, &mut nodes, &faces, degree)?;
    SurfaceMesh::from_parts(spec.clone(), degree, nodes, elements, 0.0)
}

/// Structured torus mesh with `n_major` segments around the axis and a
/// proportional number around the tube.
pub fn build_torus_mesh(spec: &SurfaceSpec, n_major: usize, degree: usize) -> Result<SurfaceMesh> {
    check_triangle_degree(degree)?;
    if spec.kind() != SurfaceKind::Torus {
        return Err(Error::UnsupportedSurface(format!("torus mesh on {}", spec.kind())));
    }
    let (big, small) = (spec.params()[0], spec.params()[1]);
    if n_major < 6 {
        return Err(Error::DegenerateMesh(format!("torus mesh needs at least 6 segments, got {n_major}")));
    }
    let n_minor = ((n_major as f64 * small / big).ceil() as usize).max(4);
    let mut nodes = Vec::with_capacity(n_major * n_minor);
    for i in 0..n_major {
        let u = 2.0 * PI * i as f64 / n_major as f64;
        for j in 0..n_minor {
            let v = 2.0 * PI * j as f64 / n_minor as f64;
            let rho = big + small * v.cos();
            nodes.push([rho * u.cos(), rho * u.sin(), small * v.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
    let mut faces = Vec::with_capacity(2 * n_major * n_minor);
    for i in 0..n_major {
        for j in 0..n_minor {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    for f in faces.iter_mut() {
        let [a, b, c] = *f;
        let n = vec3::cross(vec3::sub(nodes[b], nodes[a]), vec3::sub(nodes[c], nodes[a]));
        let centroid = vec3::scale(1.0 / 3.0, vec3::add(vec3::add(nodes[a], nodes[b]), nodes[c]));
        let outward = spec.closest_point(0.0, centroid)?.normal;
        if vec3::dot(n, outward) < 0.0 {
            f.swap(1, 2);
        }
    }
    let elements = with_edge_nodes(spec, &mut nodes, &faces, degree)?;
    SurfaceMesh::from_parts(spec.clone(), degree, nodes, elements, 0.0)
}
