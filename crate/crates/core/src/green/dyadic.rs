use std::sync::Arc;

use super::run_kernel;
use crate::error::{Error, Result};
use crate::fem::{FeSpace, SurfaceTag};
use crate::geometry::vec3::Point;
use crate::mesh::{MeshPoint, SurfaceMesh};
use crate::solver::{Observer, StepView, TimeGrid};
use crate::sparse::CgOptions;

/// Parabolic dyadic annuli of `(0, 1) × Γ` around a source point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicDecomposition {
    pub center: Point,
    pub c_star: f64,
    pub h: f64,
    pub j_star: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DyadicSet {
    /// `Q_j`, `0 ≤ j ≤ J_*`.
    Annulus(usize),
    /// `Q_*`.
    Innermost,
}

impl DyadicDecomposition {
    /// `J_* = ⌊log₂(1 / (C_* h))⌋`, so that `d_{J_*} ≥ C_* h`.
    pub fn new(center: Point, h: f64, c_star: f64) -> Result<Self> {
        if c_star < 16.0 {
            return Err(Error::InvalidArgument(format!("C_* = {c_star} below 16")));
        }
        let limit = 1.0 / (4.0 * c_star);
        if !(h < limit) {
            return Err(Error::HTooLarge { h, limit });
        }
        let j_star = (1.0 / (c_star * h)).log2().floor() as usize;
        Ok(Self { center, c_star, h, j_star })
    }

    pub fn radius(j: usize) -> f64 {
        0.5f64.powi(j as i32)
    }

    /// Set containing `(t, x)` with `d = d(x, x₀)`. Points on a common
    /// boundary go to the smaller set.
    pub fn classify(&self, t: f64, d: f64) -> DyadicSet {
        let r = d.max(t.max(0.0).sqrt());
        if r <= Self::radius(self.j_star) {
            return DyadicSet::Innermost;
        }
        let j = (1.0 / r).log2().ceil();
        if j >= 1.0 {
            DyadicSet::Annulus((j as usize).min(self.j_star))
        } else {
            DyadicSet::Annulus(0)
        }
    }

    /// Row order of reports: `Q_0, …, Q_{J_*}, Q_*`.
    pub fn slot(&self, set: DyadicSet) -> usize {
        match set {
            DyadicSet::Annulus(j) => j,
            DyadicSet::Innermost => self.j_star + 1,
        }
    }

    pub fn sets(&self) -> Vec<DyadicSet> {
        (0..=self.j_star).map(DyadicSet::Annulus).chain([DyadicSet::Innermost]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicRow {
    pub set: DyadicSet,
    /// `d_j`, or `d_{J_*}` for the innermost set.
    pub radius: f64,
    /// Space-time measure `|Q_j|`.
    pub measure: f64,
    /// `‖v‖_{L²(Q_j)}`.
    pub norm: f64,
    /// `‖∂_t v‖_{L²(Q_j)}`.
    pub norm_dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicReport {
    pub decomposition: DyadicDecomposition,
    pub rows: Vec<DyadicRow>,
}

impl DyadicReport {
    pub fn total_measure(&self) -> f64 {
        self.rows.iter().map(|r| r.measure).sum()
    }
}

struct QuadPoint {
    dist: f64,
    weight: f64,
    dofs: Vec<usize>,
    phi: Vec<f64>,
}

/// Observer accumulating per-set `L²` integrals over `t ∈ [0, 1]` with the
/// trapezoid rule in time and the lifted quadrature of the mesh in space.
pub struct DyadicAccumulator {
    decomposition: DyadicDecomposition,
    points: Vec<QuadPoint>,
    // per slot: measure, ∫v², ∫(∂_t v)²
    totals: Vec<[f64; 3]>,
    previous: Option<(f64, Vec<[f64; 3]>)>,
}

impl DyadicAccumulator {
    /// The trajectory must live on the frozen mesh of `space`.
    pub fn new(space: &FeSpace, decomposition: DyadicDecomposition) -> Result<Self> {
        let mesh = space.mesh();
        let t = mesh.time();
        let mut buf = space.new_element_values();
        let mut points = Vec::new();
        for e in 0..space.n_elements() {
            space.element_values(e, SurfaceTag::Lifted, &mut buf)?;
            for q in 0..buf.n_qp {
                points.push(QuadPoint {
                    dist: mesh.surface().geodesic_distance(t, buf.points[q], decomposition.center).0,
                    weight: buf.weights[q],
                    dofs: mesh.element(e).to_vec(),
                    phi: buf.phi(q).to_vec(),
                });
            }
        }
        let slots = decomposition.j_star + 2;
        Ok(Self { decomposition, points, totals: vec![[0.0; 3]; slots], previous: None })
    }

    fn slice(&self, t: f64, u: &[f64], u_dot: &[f64]) -> Vec<[f64; 3]> {
        let mut acc = vec![[0.0; 3]; self.totals.len()];
        for p in &self.points {
            let s = self.decomposition.slot(self.decomposition.classify(t, p.dist));
            let (mut v, mut w) = (0.0, 0.0);
            for (&i, &f) in p.dofs.iter().zip(&p.phi) {
                v += u[i] * f;
                w += u_dot[i] * f;
            }
            acc[s][0] += p.weight;
            acc[s][1] += p.weight * v * v;
            acc[s][2] += p.weight * w * w;
        }
        acc
    }

    pub fn report(&self) -> DyadicReport {
        let d = &self.decomposition;
        let rows = d
            .sets()
            .into_iter()
            .map(|set| {
                let tot = self.totals[d.slot(set)];
                let radius = match set {
                    DyadicSet::Annulus(j) => DyadicDecomposition::radius(j),
                    DyadicSet::Innermost => DyadicDecomposition::radius(d.j_star),
                };
                DyadicRow { set, radius, measure: tot[0], norm: tot[1].sqrt(), norm_dt: tot[2].sqrt() }
            })
            .collect();
        DyadicReport { decomposition: *d, rows }
    }
}

impl Observer for DyadicAccumulator {
    fn observe(&mut self, s: &StepView<'_>) -> Result<()> {
        if s.t > 1.0 + 1e-12 {
            return Ok(());
        }
        let cur = self.slice(s.t, s.u, s.u_dot);
        if let Some((t_prev, prev)) = &self.previous {
            let w = 0.5 * (s.t - t_prev);
            for (tot, (a, b)) in self.totals.iter_mut().zip(prev.iter().zip(&cur)) {
                for c in 0..3 {
                    tot[c] += w * (a[c] + b[c]);
                }
            }
        }
        self.previous = Some((s.t, cur));
        Ok(())
    }
}

/// Dyadic report of the kernel `H_h(·, ·, x₀)` on `(0, 1) × Γ`.
pub fn dyadic_report(
    mesh: &Arc<SurfaceMesh>,
    x0: MeshPoint,
    c_star: f64,
    grid: &TimeGrid,
    cg: CgOptions,
) -> Result<DyadicReport> {
    if (grid.horizon() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("dyadic report needs T = 1, got {}", grid.horizon())));
    }
    let (x, _) = mesh.map(x0.element, x0.xi);
    let center = mesh.lift_point(x)?;
    let decomposition = DyadicDecomposition::new(center, mesh.h(), c_star)?;
    let space = FeSpace::new(Arc::clone(mesh));
    let mut acc = DyadicAccumulator::new(&space, decomposition)?;
    run_kernel(mesh, x0, grid, cg, &mut acc)?;
    Ok(acc.report())
}
