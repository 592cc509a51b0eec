//! Refinement studies: maximal-regularity ratio tables, convergence against
//! exact solutions, the inequality suite, and their reports.

mod convergence;
mod inequalities;
mod maxreg;
mod report;
#[cfg(test)]
mod tests;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ForcingProfile, SurfaceSpec};
use crate::mesh::{build_mesh, SurfaceMesh};
use crate::solver::{Integrator, Scheme, TimePolicy};
use crate::sparse::CgOptions;

pub use convergence::{convergence_study, ConvergenceReport, ConvergenceRow};
pub use inequalities::{inequality_suite, InequalityCheck, InequalityReport, CONSTANT_GROWTH};
pub use maxreg::{energy_ratio, maxreg_study, StudyReport, StudyRow, Uniformity};
pub use report::{
    convergence_criterion, convergence_csv, emit_convergence, emit_inequalities, emit_maxreg, fmt_float,
    inequality_criteria, inequality_csv, maxreg_criteria, maxreg_csv, summary, write_atomic, Criterion,
    CONVERGENCE_HEADER, INEQUALITY_HEADER, MAXREG_HEADER,
};

/// `(p, q)` pairs used when a study does not list its own.
pub const DEFAULT_PQ: [(f64, f64); 5] = [(2.0, 2.0), (2.0, 4.0), (4.0, 2.0), (4.0, 4.0), (1.5, 3.0)];

/// Forcing profiles used when a study does not list its own.
pub const DEFAULT_PROFILES: [&str; 3] = ["bump", "osc-seed42", "lowfreq-seed7"];

/// Largest accepted `max R / min R` over the levels.
pub const UNIFORMITY_SPREAD: f64 = 1.25;

/// Largest accepted growth of `R` between the last two levels.
pub const UNIFORMITY_LAST_GROWTH: f64 = 0.10;

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub surface: SurfaceSpec,
    pub scheme: Scheme,
    pub integrator: Integrator,
    pub degree: usize,
    /// Mesh resolutions passed to [`build_mesh`], strictly increasing.
    pub levels: Vec<usize>,
    pub pq: Vec<(f64, f64)>,
    pub profiles: Vec<String>,
    pub seed: u64,
    pub time: TimePolicy,
    /// Largest relative change of a norm under `Δt` halving.
    pub richardson_tol: f64,
    /// Fail the study instead of flagging rows that miss the tolerance.
    pub require_richardson: bool,
    pub cg: CgOptions,
    /// Eigenmode of the exact solution used by convergence studies.
    pub mode: usize,
}

impl StudyConfig {
    pub fn new(surface: SurfaceSpec, levels: Vec<usize>) -> Self {
        Self {
            surface,
            scheme: Scheme::Stationary,
            integrator: Integrator::ImplicitEuler,
            degree: 1,
            levels,
            pq: DEFAULT_PQ.to_vec(),
            profiles: DEFAULT_PROFILES.iter().map(|s| s.to_string()).collect(),
            seed: 0,
            time: TimePolicy::default(),
            richardson_tol: 0.01,
            require_richardson: false,
            cg: CgOptions::default(),
            mode: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidArgument("no refinement levels".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!("levels {:?} are not strictly increasing", self.levels)));
        }
        for &(p, q) in &self.pq {
            for e in [p, q] {
                if !(e > 1.0 && e.is_finite()) {
                    return Err(Error::InvalidExponent(e));
                }
            }
        }
        for id in &self.profiles {
            ForcingProfile::parse(id)?;
        }
        if !(self.time.c > 0.0 && self.time.dt_max > 0.0) {
            return Err(Error::InvalidArgument("time policy needs c > 0 and dt_max > 0".into()));
        }
        if !(self.richardson_tol > 0.0) {
            return Err(Error::InvalidArgument("richardson tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Distinct `q` values of the `(p, q)` list, in first-seen order.
    pub fn space_exponents(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &(_, q) in &self.pq {
            if !out.contains(&q) {
                out.push(q);
            }
        }
        out
    }

    /// Meshes of all levels, built in parallel.
    pub fn meshes(&self) -> Result<Vec<Arc<SurfaceMesh>>> {
        self.levels.par_iter().map(|&l| build_mesh(&self.surface, l, self.degree).map(Arc::new)).collect()
    }
}
