//! Discrete Green's functions and the diagnostics built on them.
//!
//! The kernel `H_h(t, ·, x₀)` is the homogeneous stationary evolution of the
//! discrete delta `δ̄_{h,x₀} = M⁻¹ e`, `e_i = φ_i(x₀)`.

mod delta;
mod difference;
mod dyadic;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble_operators, discrete_delta, lq_norm, FeSpace, SurfaceTag};
use crate::mesh::{MeshPoint, SurfaceMesh};
use crate::solver::{solve_stationary, Observer, SolverOptions, StepView, TimeGrid, Trajectory};
use crate::sparse::CgOptions;
use crate::stats::{linear_fit, r_squared};

pub use delta::{delta_consistency, delta_consistency_with, delta_decay_fit, DeltaConsistency};
pub use difference::{kernel_difference_l1, KernelDifference, KernelDifferenceOptions};
pub use dyadic::{dyadic_report, DyadicAccumulator, DyadicDecomposition, DyadicReport, DyadicRow, DyadicSet};

/// Kernel trajectory for one source point.
#[derive(Clone, Debug)]
pub struct KernelTrajectory {
    pub source: MeshPoint,
    pub trajectory: Trajectory,
}

impl KernelTrajectory {
    /// `H_h(t_n, x, x₀)` at a mesh point `x`.
    pub fn value(&self, n: usize, x: MeshPoint) -> f64 {
        self.trajectory.spaces[n].evaluate(&self.trajectory.u[n], x)
    }

    /// `(H_h(t_n), 1)_{Γ_h}`.
    pub fn total_mass(&self, n: usize) -> f64 {
        self.trajectory.mass[n]
    }
}

fn kernel_options(cg: CgOptions) -> SolverOptions {
    SolverOptions { cg, laplacian: false, forcing: false, ..SolverOptions::default() }
}

/// Runs the kernel solve from `x0` on the frozen mesh, reporting to `observer`.
pub fn run_kernel(
    mesh: &Arc<SurfaceMesh>,
    x0: MeshPoint,
    grid: &TimeGrid,
    cg: CgOptions,
    observer: &mut dyn Observer,
) -> Result<()> {
    let space = FeSpace::new(Arc::clone(mesh));
    let ops = assemble_operators(&space, SurfaceTag::Discrete)?;
    let delta = discrete_delta(&space, &ops, x0)?;
    solve_stationary(mesh, None, delta, grid, &kernel_options(cg), observer)?;
    Ok(())
}

/// `H_h(t, ·, x₀)` at every node of `grid`.
pub fn discrete_green(
    mesh: &Arc<SurfaceMesh>,
    x0: MeshPoint,
    grid: &TimeGrid,
    cg: CgOptions,
) -> Result<KernelTrajectory> {
    let mut trajectory = Trajectory::new();
    run_kernel(mesh, x0, grid, cg, &mut trajectory)?;
    Ok(KernelTrajectory { source: x0, trajectory })
}

/// Source sample: `count` points cycling through element vertices, element
/// midpoints and interior points, spread over the mesh.
pub fn source_sample(mesh: &SurfaceMesh, count: usize) -> Vec<MeshPoint> {
    let ne = mesh.n_elements();
    let m = mesh.dim();
    let kinds: [[f64; 2]; 4] = if m == 1 {
        [[0.0, 0.0], [0.5, 0.0], [0.25, 0.0], [0.1, 0.0]]
    } else {
        [[0.0, 0.0], [0.5, 0.0], [1.0 / 3.0, 1.0 / 3.0], [0.2, 0.1]]
    };
    (0..count)
        .map(|i| {
            let e = (i * ne / count.max(1) + i / 4) % ne;
            MeshPoint { element: e, xi: kinds[i % 4] }
        })
        .collect()
}

/// Exponential fit `v ≈ amplitude · e^{-rate · x}` in log-linear form.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub amplitude: f64,
    pub rate: f64,
    pub r_squared: f64,
    /// `(x, v)` pairs entering the fit.
    pub samples: Vec<(f64, f64)>,
}

impl DecayFit {
    pub fn fit(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InsufficientSamples(format!("{} samples for a decay fit", samples.len())));
        }
        if samples.iter().any(|&(_, v)| !(v > 0.0)) {
            return Err(Error::InvalidArgument("decay samples must be positive".into()));
        }
        let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
        let f = linear_fit(&x, &y)?;
        Ok(Self { amplitude: f.intercept.exp(), rate: -f.slope, r_squared: f.r_squared, samples })
    }

    /// `R²` of the stored line on the stored samples.
    pub fn recomputed_r_squared(&self) -> f64 {
        let x: Vec<f64> = self.samples.iter().map(|s| s.0).collect();
        let y: Vec<f64> = self.samples.iter().map(|s| s.1.ln()).collect();
        r_squared(&x, &y, -self.rate, self.amplitude.ln())
    }
}

/// `‖∂_t H_h(t)‖_{L¹(Γ_h)}` at every node with `t ≥ t_min`.
struct DerivativeL1 {
    t_min: f64,
    samples: Vec<(f64, f64)>,
}

impl Observer for DerivativeL1 {
    fn observe(&mut self, s: &StepView<'_>) -> Result<()> {
        if s.t >= self.t_min - 1e-12 {
            self.samples.push((s.t, lq_norm(s.space, SurfaceTag::Discrete, s.u_dot, 1.0)?));
        }
        Ok(())
    }
}

/// Log-linear fit of `max_{x₀} ‖∂_t H_h(t, ·, x₀)‖_{L¹}` over `t ∈ [t_min, T]`;
/// the rate is the estimate of `λ₀`.
pub fn green_decay_study(
    mesh: &Arc<SurfaceMesh>,
    sources: &[MeshPoint],
    grid: &TimeGrid,
    t_min: f64,
    cg: CgOptions,
) -> Result<DecayFit> {
    if sources.is_empty() {
        return Err(Error::InsufficientSamples("no source points".into()));
    }
    let per_source: Vec<Vec<(f64, f64)>> = sources
        .par_iter()
        .map(|&x0| {
            let mut obs = DerivativeL1 { t_min, samples: Vec::new() };
            run_kernel(mesh, x0, grid, cg, &mut obs)?;
            Ok(obs.samples)
        })
        .collect::<Result<_>>()?;
    let mut samples = per_source[0].clone();
    for s in &per_source[1..] {
        for (a, b) in samples.iter_mut().zip(s) {
            a.1 = a.1.max(b.1);
        }
    }
    DecayFit::fit(samples)
}
