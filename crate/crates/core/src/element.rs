//! Reference elements, Lagrange bases, quadrature rules and the tangent
//! frame of a parametrized element.
//!
//! Reference segment is `[0, 1]`; reference triangle is
//! `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}`. Points are stored as `[f64; 2]` in both
//! cases, the second coordinate unused for segments.

use crate::error::{Error, Result};
use crate::geometry::vec3::{self, Point};

pub type RefPoint = [f64; 2];

/// Nodal Lagrange element of degree `k` on the reference segment or triangle.
///
/// Local node order: for segments, nodes at `j / k` for `j = 0..=k` (the
/// vertices are local nodes 0 and k). For triangles, the three vertices
/// `(0,0), (1,0), (0,1)` followed, for `k = 2`, by the edge midpoints of
/// edges `01`, `12`, `20`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceElement {
    dim: usize,
    degree: usize,
    nodes: Vec<RefPoint>,
}

impl ReferenceElement {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        let nodes = match (dim, degree) {
            (1, 1..=3) => (0..=degree).map(|j| [j as f64 / degree as f64, 0.0]).collect(),
            (2, 1) => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            (2, 2) => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
            _ => return Err(Error::InvalidArgument(format!("unsupported element: dimension {dim}, degree {degree}"))),
        };
        Ok(Self { dim, degree, nodes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[RefPoint] {
        &self.nodes
    }

    /// Local indices of the element vertices.
    pub fn vertex_indices(&self) -> Vec<usize> {
        if self.dim == 1 {
            vec![0, self.degree]
        } else {
            vec![0, 1, 2]
        }
    }

    pub fn measure(&self) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            0.5
        }
    }

    pub fn barycenter(&self) -> RefPoint {
        if self.dim == 1 {
            [0.5, 0.0]
        } else {
            [1.0 / 3.0, 1.0 / 3.0]
        }
    }

    pub fn contains(&self, xi: RefPoint, tol: f64) -> bool {
        if self.dim == 1 {
            xi[0] >= -tol && xi[0] <= 1.0 + tol
        } else {
            xi[0] >= -tol && xi[1] >= -tol && xi[0] + xi[1] <= 1.0 + tol
        }
    }

    /// Basis values and reference gradients at `xi`.
    pub fn eval(&self, xi: RefPoint, values: &mut [f64], grads: &mut [[f64; 2]]) {
        debug_assert_eq!(values.len(), self.nodes.len());
        debug_assert_eq!(grads.len(), self.nodes.len());
        if self.dim == 1 {
            let x = xi[0];
            let k = self.degree;
            for j in 0..=k {
                let xj = self.nodes[j][0];
                let mut v = 1.0;
                let mut d = 0.0;
                for i in 0..=k {
                    if i == j {
                        continue;
                    }
                    let xi_i = self.nodes[i][0];
                    let f = 1.0 / (xj - xi_i);
                    // product rule: d(v * (x - xi_i) f) = d*(x - xi_i) f + v f
                    d = d * (x - xi_i) * f + v * f;
                    v *= (x - xi_i) * f;
                }
                values[j] = v;
                grads[j] = [d, 0.0];
            }
            return;
        }
        let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        match self.degree {
            1 => {
                values[..3].copy_from_slice(&l);
                grads[..3].copy_from_slice(&dl);
            }
            _ => {
                for i in 0..3 {
                    values[i] = l[i] * (2.0 * l[i] - 1.0);
                    let c = 4.0 * l[i] - 1.0;
                    grads[i] = [c * dl[i][0], c * dl[i][1]];
                }
                for (slot, (a, b)) in [(0usize, 1usize), (1, 2), (2, 0)].into_iter().enumerate() {
                    values[3 + slot] = 4.0 * l[a] * l[b];
                    grads[3 + slot] =
                        [4.0 * (dl[a][0] * l[b] + l[a] * dl[b][0]), 4.0 * (dl[a][1] * l[b] + l[a] * dl[b][1])];
                }
            }
        }
    }

    pub fn eval_values(&self, xi: RefPoint) -> Vec<f64> {
        let n = self.n_nodes();
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        self.eval(xi, &mut v, &mut g);
        v
    }
}

/// Quadrature rule on a reference element.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    points: Vec<RefPoint>,
    weights: Vec<f64>,
    order: usize,
}

impl QuadratureRule {
    /// Rule exact for polynomials of total degree `order`: Gauss–Legendre on
    /// segments, symmetric Dunavant rules on triangles up to order 6, and a
    /// collapsed Gauss product rule above that.
    pub fn with_order(dim: usize, order: usize) -> Self {
        match dim {
            1 => Self::gauss_legendre(order / 2 + 1),
            _ => match order {
                0..=4 => Self::dunavant_4(),
                5..=6 => Self::dunavant_6(),
                _ => Self::collapsed_triangle(order / 2 + 1),
            },
        }
    }

    /// Default rule for degree-`k` elements: exactness `2k + 2`.
    pub fn for_degree(dim: usize, degree: usize) -> Self {
        Self::with_order(dim, 2 * degree + 2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[RefPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `n`-point Gauss–Legendre rule on `[0, 1]` (exact to degree `2n - 1`).
    pub fn gauss_legendre(n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        Self { dim: 1, points: x.into_iter().map(|v| [v, 0.0]).collect(), weights: w, order: 2 * n - 1 }
    }

    /// Collapsed (Duffy) product rule: `n²` points, exact to degree `2n - 2`.
    pub fn collapsed_triangle(n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let u = x[i];
                let v = x[j];
                points.push([u, v * (1.0 - u)]);
                weights.push(w[i] * w[j] * (1.0 - u));
            }
        }
        Self { dim: 2, points, weights, order: 2 * n - 2 }
    }

    fn symmetric(orbits: &[(f64, f64)], orbits6: &[(f64, f64, f64)], order: usize) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &(a, w) in orbits {
            let b = 1.0 - 2.0 * a;
            for p in [[a, a], [b, a], [a, b]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        for &(a, b, w) in orbits6 {
            let c = 1.0 - a - b;
            for p in [[a, b], [b, a], [b, c], [c, b], [c, a], [a, c]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        Self { dim: 2, points, weights, order }
    }

    /// Six-point symmetric rule of degree 4.
    pub fn dunavant_4() -> Self {
        Self::symmetric(
            &[
                (0.445948490915964886318329253883, 0.223381589678011465944827884084),
                (0.091576213509770743459571463402, 0.109951743655321867388505449249),
            ],
            &[],
            4,
        )
    }

    /// Twelve-point symmetric rule of degree 6.
    pub fn dunavant_6() -> Self {
        Self::symmetric(
            &[
                (0.249286745170910421291638553107, 0.116786275726379366030690538687),
                (0.063089014491502228340331602871, 0.050844906370206816920936809106),
            ],
            &[(0.053145049844816947353249671631, 0.310352451033784405416607733956, 0.082851075618373575193553456421)],
            6,
        )
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        // map from [-1, 1] to [0, 1]
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Tangent frame of a parametrized element at one reference point:
/// Jacobian columns, inverse metric and area element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub dim: usize,
    pub cols: [Point; 2],
    pub metric: [[f64; 2]; 2],
    pub inv_metric: [[f64; 2]; 2],
    pub sqrt_det: f64,
}

impl Frame {
    pub fn new(dim: usize, cols: [Point; 2]) -> Self {
        if dim == 1 {
            let g = vec3::dot(cols[0], cols[0]);
            Self {
                dim,
                cols,
                metric: [[g, 0.0], [0.0, 1.0]],
                inv_metric: [[1.0 / g, 0.0], [0.0, 1.0]],
                sqrt_det: g.sqrt(),
            }
        } else {
            let g00 = vec3::dot(cols[0], cols[0]);
            let g01 = vec3::dot(cols[0], cols[1]);
            let g11 = vec3::dot(cols[1], cols[1]);
            let det = g00 * g11 - g01 * g01;
            Self {
                dim,
                cols,
                metric: [[g00, g01], [g01, g11]],
                inv_metric: [[g11 / det, -g01 / det], [-g01 / det, g00 / det]],
                sqrt_det: det.max(0.0).sqrt(),
            }
        }
    }

    /// Maps the columns through a linear map, e.g. the projection Jacobian.
    pub fn transformed(&self, m: &vec3::Mat3) -> Self {
        Self::new(self.dim, [vec3::mat_vec(m, self.cols[0]), vec3::mat_vec(m, self.cols[1])])
    }

    /// Surface gradient `J G^{-1} ∇̂φ` of a function with reference gradient `g`.
    #[inline]
    pub fn surface_gradient(&self, g: [f64; 2]) -> Point {
        if self.dim == 1 {
            vec3::scale(self.inv_metric[0][0] * g[0], self.cols[0])
        } else {
            let a = self.inv_metric[0][0] * g[0] + self.inv_metric[0][1] * g[1];
            let b = self.inv_metric[1][0] * g[0] + self.inv_metric[1][1] * g[1];
            vec3::add(vec3::scale(a, self.cols[0]), vec3::scale(b, self.cols[1]))
        }
    }

    /// Orientation normal: `J₀ × J₁` for triangles, the in-plane rotation
    /// `(τ_y, -τ_x, 0)` of the tangent for segments.
    pub fn orientation_normal(&self) -> Point {
        if self.dim == 1 {
            [self.cols[0][1], -self.cols[0][0], 0.0]
        } else {
            vec3::cross(self.cols[0], self.cols[1])
        }
    }
}
