use std::sync::Arc;

use rayon::prelude::*;

use super::{StudyConfig, UNIFORMITY_LAST_GROWTH, UNIFORMITY_SPREAD};
use crate::error::{Error, Result};
use crate::fem::{assemble_operators, FeSpace, SurfaceTag};
use crate::geometry::vec3::Point;
use crate::geometry::ForcingProfile;
use crate::mesh::SurfaceMesh;
use crate::solver::{solve, Field, NormSeries, Problem, SolverOptions, TimeGrid, Trajectory};
use crate::sparse::SparseMatrix;
use crate::stats::{fitted_order, spread};

/// One line of the ratio table.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub profile: String,
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub p: f64,
    pub q: f64,
    pub norm_dtu: f64,
    pub norm_lapu: f64,
    pub norm_f: f64,
    /// `(‖∂_t u_h‖ + ‖Δ_h u_h‖) / ‖f_h‖`; `None` when `f_h = 0`.
    pub ratio: Option<f64>,
    /// Largest relative change of the three norms under `Δt` halving.
    pub richardson_change: f64,
    pub richardson_ok: bool,
}

/// h-uniformity verdict for one profile and `(p, q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Uniformity {
    pub profile: String,
    pub p: f64,
    pub q: f64,
    pub ratios: Vec<f64>,
    /// `max R / min R`.
    pub spread: f64,
    /// `R_last / R_{last-1} - 1`.
    pub last_growth: f64,
    /// Slope of `log R` against `log h`.
    pub trend: f64,
    /// Every row passed the `Δt`-halving check.
    pub richardson_ok: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyReport {
    /// Ordered by profile, level, then `(p, q)` as configured.
    pub rows: Vec<StudyRow>,
    pub uniformity: Vec<Uniformity>,
}

impl StudyReport {
    pub fn profiles(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.profile) {
                out.push(r.profile.clone());
            }
        }
        out
    }

    pub fn rows_for<'a>(&'a self, profile: &'a str) -> impl Iterator<Item = &'a StudyRow> + 'a {
        self.rows.iter().filter(move |r| r.profile == profile)
    }
}

type Forcing<'a> = &'a (dyn Fn(f64, Point) -> f64 + Sync);

fn norm_series(cfg: &StudyConfig, mesh: &Arc<SurfaceMesh>, forcing: Forcing<'_>, grid: TimeGrid) -> Result<NormSeries> {
    let problem = Problem {
        mesh: Arc::clone(mesh),
        scheme: cfg.scheme,
        forcing: Some(forcing),
        initial: vec![0.0; mesh.n_nodes()],
        grid,
        options: SolverOptions { integrator: cfg.integrator, cg: cfg.cg, laplacian: true, forcing: true },
    };
    let mut series = NormSeries::new(&[Field::UDot, Field::LapU, Field::Forcing], &cfg.space_exponents());
    solve(&problem, &mut series)?;
    Ok(series)
}

fn norms(series: &NormSeries, p: f64, q: f64) -> Result<[f64; 3]> {
    Ok([
        series.spacetime_norm(Field::UDot, p, q)?,
        series.spacetime_norm(Field::LapU, p, q)?,
        series.spacetime_norm(Field::Forcing, p, q)?,
    ])
}

fn relative_change(coarse: f64, fine: f64) -> f64 {
    let d = (fine - coarse).abs();
    if d == 0.0 {
        0.0
    } else if fine == 0.0 {
        f64::INFINITY
    } else {
        d / fine.abs()
    }
}

fn cell_rows(cfg: &StudyConfig, level: usize, mesh: &Arc<SurfaceMesh>, profile_id: &str) -> Result<Vec<StudyRow>> {
    let profile = ForcingProfile::parse(profile_id)?;
    cell_rows_with(cfg, level, mesh, profile_id, &|t, x| profile.eval(t, x))
}

pub(crate) fn cell_rows_with(
    cfg: &StudyConfig,
    level: usize,
    mesh: &Arc<SurfaceMesh>,
    profile_id: &str,
    forcing: Forcing<'_>,
) -> Result<Vec<StudyRow>> {
    let grid = TimeGrid::for_mesh(cfg.surface.horizon(), mesh.h(), cfg.time)?;
    let (coarse, fine) =
        rayon::join(|| norm_series(cfg, mesh, forcing, grid), || norm_series(cfg, mesh, forcing, grid.refined()));
    let (coarse, fine) = (coarse?, fine?);
    let mut rows = Vec::with_capacity(cfg.pq.len());
    for &(p, q) in &cfg.pq {
        let a = norms(&coarse, p, q)?;
        let b = norms(&fine, p, q)?;
        let change = (0..3).map(|i| relative_change(a[i], b[i])).fold(0.0, f64::max);
        let ok = change <= cfg.richardson_tol;
        if cfg.require_richardson && !ok {
            return Err(Error::RichardsonFailure(format!(
                "level {level}, profile {profile_id}, (p, q) = ({p}, {q}): Δt halving changed a norm by {change:.3e}"
            )));
        }
        rows.push(StudyRow {
            profile: profile_id.to_string(),
            level,
            h: mesh.h(),
            dt: grid.dt(),
            p,
            q,
            norm_dtu: a[0],
            norm_lapu: a[1],
            norm_f: a[2],
            ratio: (a[2] > 0.0).then(|| (a[0] + a[1]) / a[2]),
            richardson_change: change,
            richardson_ok: ok,
        });
    }
    Ok(rows)
}

/// Ratio table over levels × profiles × `(p, q)` with `u_h(0) = 0`.
/// Cells run in parallel and are merged in configuration order.
pub fn maxreg_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let meshes = cfg.meshes()?;
    let cells: Vec<(usize, usize)> =
        (0..cfg.profiles.len()).flat_map(|p| (0..cfg.levels.len()).map(move |l| (p, l))).collect();
    let rows: Vec<Vec<StudyRow>> = cells
        .par_iter()
        .map(|&(p, l)| cell_rows(cfg, cfg.levels[l], &meshes[l], &cfg.profiles[p]))
        .collect::<Result<_>>()?;
    let rows: Vec<StudyRow> = rows.into_iter().flatten().collect();
    let uniformity = uniformity(cfg, &rows);
    Ok(StudyReport { rows, uniformity })
}

fn uniformity(cfg: &StudyConfig, rows: &[StudyRow]) -> Vec<Uniformity> {
    let mut out = Vec::new();
    for profile in &cfg.profiles {
        for &(p, q) in &cfg.pq {
            let sel: Vec<&StudyRow> = rows.iter().filter(|r| &r.profile == profile && r.p == p && r.q == q).collect();
            if sel.iter().any(|r| r.ratio.is_none()) || sel.is_empty() {
                continue;
            }
            let ratios: Vec<f64> = sel.iter().map(|r| r.ratio.unwrap()).collect();
            let hs: Vec<f64> = sel.iter().map(|r| r.h).collect();
            let s = spread(&ratios);
            let n = ratios.len();
            let last_growth = if n >= 2 { ratios[n - 1] / ratios[n - 2] - 1.0 } else { 0.0 };
            let trend = if n >= 2 { fitted_order(&hs, &ratios).unwrap_or(f64::NAN) } else { f64::NAN };
            let richardson_ok = sel.iter().all(|r| r.richardson_ok);
            out.push(Uniformity {
                profile: profile.clone(),
                p,
                q,
                ratios,
                spread: s,
                last_growth,
                trend,
                richardson_ok,
                passed: richardson_ok && s <= UNIFORMITY_SPREAD && last_growth <= UNIFORMITY_LAST_GROWTH,
            });
        }
    }
    out
}

/// `R(h; 2, 2)` from `M`-weighted nodal sums of a stored
/// trajectory: `‖v‖²_{L²(Γ_h)} = vᵀ M v`, trapezoid rule in time.
pub fn energy_ratio(cfg: &StudyConfig, mesh: &Arc<SurfaceMesh>, profile_id: &str) -> Result<Option<f64>> {
    let profile = ForcingProfile::parse(profile_id)?;
    let grid = TimeGrid::for_mesh(cfg.surface.horizon(), mesh.h(), cfg.time)?;
    let f = |t: f64, x: Point| profile.eval(t, x);
    let problem = Problem {
        mesh: Arc::clone(mesh),
        scheme: cfg.scheme,
        forcing: Some(&f),
        initial: vec![0.0; mesh.n_nodes()],
        grid,
        options: SolverOptions { integrator: cfg.integrator, cg: cfg.cg, laplacian: true, forcing: true },
    };
    let mut traj = Trajectory::new();
    solve(&problem, &mut traj)?;
    let mut sums = [0.0; 3];
    let mut previous: Option<[f64; 3]> = None;
    let mut cached: Option<(Arc<FeSpace>, SparseMatrix)> = None;
    for n in 0..traj.len() {
        let space = &traj.spaces[n];
        if !cached.as_ref().is_some_and(|(s, _)| Arc::ptr_eq(s, space)) {
            cached = Some((Arc::clone(space), assemble_operators(space, SurfaceTag::Discrete)?.mass));
        }
        let mass = &cached.as_ref().unwrap().1;
        let cur = [
            mass.bilinear(&traj.u_dot[n], &traj.u_dot[n])?,
            mass.bilinear(&traj.lap_u[n], &traj.lap_u[n])?,
            mass.bilinear(&traj.f_h[n], &traj.f_h[n])?,
        ];
        if let Some(prev) = previous {
            let w = 0.5 * (traj.times[n] - traj.times[n - 1]);
            for i in 0..3 {
                sums[i] += w * (prev[i] + cur[i]);
            }
        }
        previous = Some(cur);
    }
    let [a, b, c] = sums.map(f64::sqrt);
    Ok((c > 0.0).then(|| (a + b) / c))
}
