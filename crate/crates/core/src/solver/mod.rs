//! Time integration of the semi-discrete evolving-surface schemes.
//!
//! Scheme A is the nodal (non-conservative) form
//! `M(t) u̇ + A(t) u = b(t)`, scheme B the conservative form
//! `d/dt (M(t) u) + A(t) u = b(t)`, and the stationary scheme is scheme A on
//! a mesh frozen at one time. Coefficient vectors are kept fixed under mesh
//! motion, which realizes the transport property of the nodal basis.
//!
//! `u̇` is always the nodal time derivative of the integrator. For scheme A
//! and the stationary scheme it satisfies `M u̇ + A u = b` up to the linear
//! solver tolerance, because the step is solved directly for `u̇`.

mod scheme;
#[cfg(test)]
mod tests;
mod trajectory;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{FeSpace, Operators};
use crate::geometry::vec3::Point;
use crate::sparse::CgOptions;

pub use scheme::{solve, solve_scheme_a, solve_scheme_b, solve_stationary, Problem, SolveSummary};
pub use trajectory::{spacetime_norm, spacetime_norm_from_series, Field, NormSeries, Trajectory};

/// Uniform time grid on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

/// Step size rule `Δt = min(c h², Δt_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimePolicy {
    pub c: f64,
    pub dt_max: f64,
}

impl Default for TimePolicy {
    fn default() -> Self {
        Self { c: 0.5, dt_max: 2.5e-3 }
    }
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || n_steps == 0 {
            return Err(Error::InvalidArgument(format!("time grid with T = {horizon}, {n_steps} steps")));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Smallest uniform grid with `Δt ≤ min(c h², Δt_max)`.
    pub fn for_mesh(horizon: f64, h: f64, policy: TimePolicy) -> Result<Self> {
        let dt = (policy.c * h * h).min(policy.dt_max);
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step {dt} from c = {}, h = {h}", policy.c)));
        }
        Self::new(horizon, (horizon / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.horizon
        } else {
            self.horizon * n as f64 / self.n_steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|n| self.time(n)).collect()
    }

    /// The grid with `Δt / 2`.
    pub fn refined(&self) -> Self {
        Self { horizon: self.horizon, n_steps: 2 * self.n_steps }
    }

    /// Composite trapezoid weights on the nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.n_steps + 1];
        w[0] = 0.5 * dt;
        w[self.n_steps] = 0.5 * dt;
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    A,
    B,
    Stationary,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::A => "A",
            Scheme::B => "B",
            Scheme::Stationary => "stationary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Scheme::A),
            "B" | "b" => Ok(Scheme::B),
            "stationary" => Ok(Scheme::Stationary),
            _ => Err(Error::InvalidArgument(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Integrator {
    ImplicitEuler,
    Bdf2,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::ImplicitEuler => "implicit-euler",
            Integrator::Bdf2 => "bdf2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "implicit-euler" | "ie" => Ok(Integrator::ImplicitEuler),
            "bdf2" => Ok(Integrator::Bdf2),
            _ => Err(Error::InvalidArgument(format!("unknown integrator `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub integrator: Integrator,
    pub cg: CgOptions,
    /// Compute `Δ_h u = -M⁻¹ A u` at every node.
    pub laplacian: bool,
    /// Compute `f_h = M⁻¹ b` at every node.
    pub forcing: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { integrator: Integrator::ImplicitEuler, cg: CgOptions::default(), laplacian: true, forcing: true }
    }
}

/// Data of one time node handed to an [`Observer`].
pub struct StepView<'a> {
    pub index: usize,
    pub t: f64,
    pub space: &'a Arc<FeSpace>,
    pub ops: &'a Operators,
    pub u: &'a [f64],
    pub u_dot: &'a [f64],
    /// Empty unless requested in [`SolverOptions`].
    pub lap_u: &'a [f64],
    /// Empty unless requested in [`SolverOptions`].
    pub f_h: &'a [f64],
    /// Load vector `b_i = ∫_{Γ_h} f^{-ℓ} φ_i`.
    pub load: &'a [f64],
}

pub trait Observer {
    fn observe(&mut self, step: &StepView<'_>) -> Result<()>;
}

impl<F: FnMut(&StepView<'_>) -> Result<()>> Observer for F {
    fn observe(&mut self, step: &StepView<'_>) -> Result<()> {
        self(step)
    }
}

/// Forcing `f(t, y)` for `y ∈ Γ(t)`; `None` is the zero forcing.
pub type ForcingFn<'a> = Option<&'a (dyn Fn(f64, Point) -> f64 + Sync)>;

/// Outcome of a `Δt`-halving comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct RichardsonCheck {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    /// Largest relative change `|fine - coarse| / |fine|`.
    pub max_relative_change: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Runs `measure` on `grid` and on `grid.refined()` and compares the outputs.
/// Zero values on both grids count as unchanged.
pub fn richardson_check<F>(grid: &TimeGrid, tolerance: f64, measure: F) -> Result<RichardsonCheck>
where
    F: Fn(&TimeGrid) -> Result<Vec<f64>>,
{
    let coarse = measure(grid)?;
    let fine = measure(&grid.refined())?;
    if coarse.len() != fine.len() {
        return Err(Error::DimensionMismatch { expected: coarse.len(), got: fine.len() });
    }
    let mut worst: f64 = 0.0;
    for (c, f) in coarse.iter().zip(&fine) {
        let d = (f - c).abs();
        if d == 0.0 {
            continue;
        }
        worst = worst.max(if *f == 0.0 { f64::INFINITY } else { d / f.abs() });
    }
    Ok(RichardsonCheck { coarse, fine, max_relative_change: worst, tolerance, passed: worst <= tolerance })
}

/// Like [`richardson_check`] but fails with `StepTooLarge`.
pub fn require_richardson<F>(grid: &TimeGrid, tolerance: f64, measure: F) -> Result<RichardsonCheck>
where
    F: Fn(&TimeGrid) -> Result<Vec<f64>>,
{
    let check = richardson_check(grid, tolerance, measure)?;
    if !check.passed {
        return Err(Error::StepTooLarge(format!(
            "halving Δt = {:.3e} changed a norm by {:.3e} (tolerance {:.1e})",
            grid.dt(),
            check.max_relative_change,
            tolerance
        )));
    }
    Ok(check)
}
