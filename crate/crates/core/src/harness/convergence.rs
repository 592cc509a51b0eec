use std::sync::Arc;

use rayon::prelude::*;

use super::StudyConfig;
use crate::error::{Error, Result};
use crate::fem::{interpolate, lq_error, SurfaceTag};
use crate::geometry::exact_heat_solution;
use crate::solver::{solve, Observer, Problem, SolverOptions, StepView, TimeGrid, TimePolicy};
use crate::stats::{fitted_order, observed_orders};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    /// `max_n ‖u_h^ℓ(t_n) - u(t_n)‖_{L²(Γ)}`.
    pub error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Orders between consecutive levels.
    pub orders: Vec<f64>,
    /// Slope of `log error` against `log h` over all levels.
    pub fitted_order: f64,
}

struct MaxError<F> {
    exact: F,
    max: f64,
}

impl<F: Fn(f64, [f64; 3]) -> f64 + Sync> Observer for MaxError<F> {
    fn observe(&mut self, s: &StepView<'_>) -> Result<()> {
        let e = lq_error(s.space, SurfaceTag::Lifted, s.u, |y| (self.exact)(s.t, y), 2.0)?;
        self.max = self.max.max(e);
        Ok(())
    }
}

/// `L^∞(0, T; L²(Γ))` errors against an eigenfunction decay solution, started
/// from its nodal interpolant. All levels share `Δt = c' h²` with
/// `c' = min(c, Δt_max / h_max²)`, so the cap does not freeze `Δt` on fine levels.
pub fn convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let exact = exact_heat_solution(&cfg.surface, cfg.mode)?;
    let meshes = cfg.meshes()?;
    let h_max = meshes.iter().map(|m| m.h()).fold(0.0, f64::max);
    let policy = TimePolicy { c: cfg.time.c.min(cfg.time.dt_max / (h_max * h_max)), ..cfg.time };
    let rows: Vec<ConvergenceRow> = cfg
        .levels
        .par_iter()
        .zip(meshes.par_iter())
        .map(|(&level, mesh)| {
            let grid = TimeGrid::for_mesh(cfg.surface.horizon(), mesh.h(), policy)?;
            let space = crate::fem::FeSpace::new(Arc::clone(mesh));
            let problem = Problem {
                mesh: Arc::clone(mesh),
                scheme: cfg.scheme,
                forcing: None,
                initial: interpolate(&space, |x| exact.value(0.0, x)),
                grid,
                options: SolverOptions { integrator: cfg.integrator, cg: cfg.cg, laplacian: false, forcing: false },
            };
            let mut obs = MaxError { exact: |t: f64, y: [f64; 3]| exact.value(t, y), max: 0.0 };
            solve(&problem, &mut obs)?;
            Ok(ConvergenceRow { level, h: mesh.h(), dt: grid.dt(), error: obs.max })
        })
        .collect::<Result<_>>()?;
    if rows.len() < 2 {
        return Err(Error::InsufficientSamples(format!("{} levels for an order fit", rows.len())));
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.error).collect();
    Ok(ConvergenceReport { orders: observed_orders(&h, &e), fitted_order: fitted_order(&h, &e)?, rows })
}
