use std::sync::Arc;

use super::{ForcingFn, Integrator, Observer, Scheme, SolverOptions, StepView, TimeGrid};
use crate::error::{Error, Result};
use crate::fem::{assemble_load_pulled, assemble_operators, FeSpace, Operators, SurfaceTag};
use crate::mesh::SurfaceMesh;
use crate::sparse::{cg_solve_with_guess, norm2, SparseMatrix};

/// One solve: the mesh (at `t = 0` for schemes A and B, at the frozen time
/// for the stationary scheme), forcing, initial coefficients and time grid.
pub struct Problem<'a> {
    pub mesh: Arc<SurfaceMesh>,
    pub scheme: Scheme,
    pub forcing: ForcingFn<'a>,
    pub initial: Vec<f64>,
    pub grid: TimeGrid,
    pub options: SolverOptions,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveSummary {
    pub steps: usize,
    pub cg_iterations: usize,
    /// Largest `‖M u̇ + A u - b‖₂` (scheme B: including the `Ṁ u` term of the
    /// implicit Euler step) relative to `‖b‖₂`, or to `‖A u‖₂` when `b = 0`.
    /// Not evaluated for BDF2 with scheme B.
    pub max_identity_residual: f64,
}

struct Snapshot {
    space: Arc<FeSpace>,
    ops: Arc<Operators>,
}

enum Source {
    Frozen(Snapshot),
    Moving(Arc<SurfaceMesh>),
}

impl Source {
    fn at(&self, t: f64) -> Result<Snapshot> {
        match self {
            Source::Frozen(s) => Ok(Snapshot { space: Arc::clone(&s.space), ops: Arc::clone(&s.ops) }),
            Source::Moving(mesh0) => snapshot(Arc::new(mesh0.evolve(t)?)),
        }
    }

    fn is_frozen(&self) -> bool {
        matches!(self, Source::Frozen(_))
    }
}

fn snapshot(mesh: Arc<SurfaceMesh>) -> Result<Snapshot> {
    let space = Arc::new(FeSpace::new(mesh));
    let ops = Arc::new(assemble_operators(&space, SurfaceTag::Discrete)?);
    Ok(Snapshot { space, ops })
}

fn load(snap: &Snapshot, forcing: ForcingFn<'_>, t: f64) -> Result<Vec<f64>> {
    match forcing {
        None => Ok(vec![0.0; snap.space.ndofs()]),
        Some(f) => assemble_load_pulled(&snap.space, |y| f(t, y)),
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// System matrix `a M + c A`, cached while the geometry is frozen.
struct SystemCache {
    key: Option<(f64, f64)>,
    matrix: Option<SparseMatrix>,
}

impl SystemCache {
    fn get(&mut self, ops: &Operators, a: f64, c: f64, frozen: bool) -> Result<&SparseMatrix> {
        if !(frozen && self.key == Some((a, c)) && self.matrix.is_some()) {
            self.matrix = Some(ops.mass.linear_combination(a, &ops.stiffness, c)?);
            self.key = Some((a, c));
        }
        Ok(self.matrix.as_ref().expect("system assembled"))
    }
}

/// Derived per-node fields.
struct Extras {
    lap: Vec<f64>,
    f_h: Vec<f64>,
}

fn extras(snap: &Snapshot, u: &[f64], b: &[f64], opts: &SolverOptions, prev: &Extras) -> Result<Extras> {
    let lap = if opts.laplacian {
        let guess = (prev.lap.len() == u.len()).then_some(prev.lap.as_slice());
        snap.ops.laplacian(u, guess)?
    } else {
        Vec::new()
    };
    let f_h = if opts.forcing {
        if b.iter().all(|v| *v == 0.0) {
            vec![0.0; b.len()]
        } else {
            let guess = (prev.f_h.len() == b.len()).then_some(prev.f_h.as_slice());
            snap.ops.mass_solve(b, guess)?.0
        }
    } else {
        Vec::new()
    };
    Ok(Extras { lap, f_h })
}

fn identity_residual(ops: &Operators, u_dot: &[f64], u: &[f64], b: &[f64], extra: Option<&[f64]>) -> Result<f64> {
    let mu = ops.mass.matvec(u_dot)?;
    let au = ops.stiffness.matvec(u)?;
    let r: Vec<f64> = (0..b.len()).map(|i| mu[i] + au[i] + extra.map_or(0.0, |e| e[i]) - b[i]).collect();
    let scale = if norm2(b) > 0.0 { norm2(b) } else { norm2(&au) };
    Ok(if scale > 0.0 { norm2(&r) / scale } else { norm2(&r) })
}

/// Runs one solve and reports every time node to `observer`.
pub fn solve(problem: &Problem<'_>, observer: &mut dyn Observer) -> Result<SolveSummary> {
    let n = problem.mesh.n_nodes();
    if problem.initial.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: problem.initial.len() });
    }
    let grid = &problem.grid;
    let opts = &problem.options;
    let scheme = problem.scheme;
    let source = if scheme == Scheme::Stationary || problem.mesh.surface().is_stationary() {
        Source::Frozen(snapshot(Arc::clone(&problem.mesh))?)
    } else {
        if problem.mesh.time() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "evolving solve must start from the mesh at t = 0, got t = {}",
                problem.mesh.time()
            )));
        }
        Source::Moving(Arc::clone(&problem.mesh))
    };
    let frozen = source.is_frozen();
    let conservative = scheme == Scheme::B && !frozen;
    let dt = grid.dt();
    let cg = opts.cg.context("time step");

    let mut summary = SolveSummary::default();
    let mut cache = SystemCache { key: None, matrix: None };
    let mut cur = source.at(grid.time(0))?;
    let b0 = load(&cur, problem.forcing, grid.time(0))?;
    let mut u = problem.initial.clone();
    let mut prev_step: Option<Vec<f64>> = None;
    // M(t_{n-1}) u^{n-1} for the conservative BDF2 step
    let mut old_mass_u: Option<Vec<f64>> = None;
    let mut guess = vec![0.0; n];
    let mut prev_extra = Extras { lap: Vec::new(), f_h: Vec::new() };

    for step in 0..grid.n_steps() {
        let t_next = grid.time(step + 1);
        let next = source.at(t_next)?;
        let b_next = load(&next, problem.forcing, t_next)?;
        // (M(t_n) u^n, M(t_{n+1}) u^n) for the conservative form
        let masses = if conservative { Some((cur.ops.mass.matvec(&u)?, next.ops.mass.matvec(&u)?)) } else { None };
        let dm_u = masses.as_ref().map(|(a, c)| sub(a, c));

        if step == 0 {
            // u̇(0) from the semi-discrete identity
            let au = cur.ops.stiffness.matvec(&u)?;
            let mut rhs = sub(&b0, &au);
            if let Some(d) = &dm_u {
                for (r, v) in rhs.iter_mut().zip(d) {
                    *r += v / dt;
                }
            }
            let u_dot = cur.ops.mass_solve(&rhs, None)?.0;
            let ex = extras(&cur, &u, &b0, opts, &prev_extra)?;
            observer.observe(&StepView {
                index: 0,
                t: grid.time(0),
                space: &cur.space,
                ops: &cur.ops,
                u: &u,
                u_dot: &u_dot,
                lap_u: &ex.lap,
                f_h: &ex.f_h,
                load: &b0,
            })?;
            prev_extra = ex;
        }

        let au = next.ops.stiffness.matvec(&u)?;
        let bdf2 = opts.integrator == Integrator::Bdf2 && prev_step.is_some();
        // solve for the increment y = u^{n+1} - u^n
        let (a, c, rhs) = if bdf2 {
            let d = prev_step.as_ref().expect("previous increment");
            let history = match (&masses, &old_mass_u) {
                (Some((m_cur, m_next)), Some(m_old)) => {
                    (0..n).map(|i| 4.0 * m_cur[i] - 3.0 * m_next[i] - m_old[i]).collect()
                }
                _ => next.ops.mass.matvec(d)?,
            };
            let rhs: Vec<f64> = (0..n).map(|i| 2.0 * dt * (b_next[i] - au[i]) + history[i]).collect();
            (3.0, 2.0 * dt, rhs)
        } else {
            let mut rhs: Vec<f64> = (0..n).map(|i| dt * (b_next[i] - au[i])).collect();
            if let Some(d) = &dm_u {
                for (r, v) in rhs.iter_mut().zip(d) {
                    *r += v;
                }
            }
            (1.0, dt, rhs)
        };
        let system = cache.get(&next.ops, a, c, frozen)?;
        let (y, report) = cg_solve_with_guess(system, &rhs, guess.clone(), cg)?;
        summary.cg_iterations += report.iterations;
        let u_new: Vec<f64> = u.iter().zip(&y).map(|(a, b)| a + b).collect();
        let u_dot: Vec<f64> = if bdf2 {
            let d = prev_step.as_ref().expect("previous increment");
            y.iter().zip(d).map(|(yi, di)| (3.0 * yi - di) / (2.0 * dt)).collect()
        } else {
            y.iter().map(|v| v / dt).collect()
        };
        let residual = match (&dm_u, bdf2) {
            (None, _) => Some(identity_residual(&next.ops, &u_dot, &u_new, &b_next, None)?),
            (Some(d), false) => {
                let e: Vec<f64> = d.iter().map(|v| -v / dt).collect();
                Some(identity_residual(&next.ops, &u_dot, &u_new, &b_next, Some(&e))?)
            }
            (Some(_), true) => None,
        };
        if let Some(r) = residual {
            summary.max_identity_residual = summary.max_identity_residual.max(r);
        }
        let ex = extras(&next, &u_new, &b_next, opts, &prev_extra)?;
        observer.observe(&StepView {
            index: step + 1,
            t: t_next,
            space: &next.space,
            ops: &next.ops,
            u: &u_new,
            u_dot: &u_dot,
            lap_u: &ex.lap,
            f_h: &ex.f_h,
            load: &b_next,
        })?;
        prev_extra = ex;
        guess.clone_from(&y);
        prev_step = Some(y);
        old_mass_u = masses.map(|(m_cur, _)| m_cur);
        u = u_new;
        cur = next;
        summary.steps += 1;
    }
    Ok(summary)
}

fn run(
    mesh: &Arc<SurfaceMesh>,
    scheme: Scheme,
    forcing: ForcingFn<'_>,
    initial: Vec<f64>,
    grid: &TimeGrid,
    options: &SolverOptions,
    observer: &mut dyn Observer,
) -> Result<SolveSummary> {
    let problem = Problem { mesh: Arc::clone(mesh), scheme, forcing, initial, grid: *grid, options: *options };
    solve(&problem, observer)
}

/// Scheme A from the mesh at `t = 0`.
pub fn solve_scheme_a(
    mesh0: &Arc<SurfaceMesh>,
    forcing: ForcingFn<'_>,
    initial: Vec<f64>,
    grid: &TimeGrid,
    options: &SolverOptions,
    observer: &mut dyn Observer,
) -> Result<SolveSummary> {
    run(mesh0, Scheme::A, forcing, initial, grid, options, observer)
}

/// Scheme B (conservative form) from the mesh at `t = 0`.
pub fn solve_scheme_b(
    mesh0: &Arc<SurfaceMesh>,
    forcing: ForcingFn<'_>,
    initial: Vec<f64>,
    grid: &TimeGrid,
    options: &SolverOptions,
    observer: &mut dyn Observer,
) -> Result<SolveSummary> {
    run(mesh0, Scheme::B, forcing, initial, grid, options, observer)
}

/// Scheme A on `frozen`, a mesh of `Γ(s)` kept fixed for all `t`; the forcing
/// is evaluated as `f(t, q_s(x))`.
pub fn solve_stationary(
    frozen: &Arc<SurfaceMesh>,
    forcing: ForcingFn<'_>,
    initial: Vec<f64>,
    grid: &TimeGrid,
    options: &SolverOptions,
    observer: &mut dyn Observer,
) -> Result<SolveSummary> {
    run(frozen, Scheme::Stationary, forcing, initial, grid, options, observer)
}
