use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use esfem::fem::{assemble_operators, io::write_csv, FeSpace, SurfaceTag};
use esfem::geometry::{ForcingProfile, SurfaceKind};
use esfem::green::{
    delta_consistency_with, delta_decay_fit, dyadic_report, green_decay_study, kernel_difference_l1, source_sample,
    DyadicSet, KernelDifferenceOptions,
};
use esfem::harness::{
    convergence_study, emit_convergence, emit_inequalities, emit_maxreg, fmt_float, inequality_suite, maxreg_study,
    summary, write_atomic, Criterion,
};
use esfem::mesh::{build_mesh, io as mesh_io, SurfaceMesh};
use esfem::solver::{solve, Problem, SolverOptions, StepView, TimeGrid};
use esfem::sparse::smallest_nonzero_generalized_eigenvalue;
use esfem::stats::{fitted_order, spread};
use esfem::Result;
use rayon::prelude::*;

use crate::config::CliConfig;
use crate::{CliError, Command};

pub const GREEN_DECAY_HEADER: &str = "level,h,dt,amplitude,rate,r_squared,samples";
pub const KERNEL_DIFFERENCE_HEADER: &str = "level,h,value,late_fraction,tail_bound";
pub const DYADIC_HEADER: &str = "level,set,radius,measure,norm,norm_dt";
pub const DELTA_HEADER: &str = "level,h,source,rate,k,r_squared,consistency";

/// Kernel decay: `R²` floor, level-to-level drift of the rate, and distance
/// from the smallest nonzero eigenvalue.
const KERNEL_R2: f64 = 0.95;
const KERNEL_RATE_DRIFT: f64 = 0.15;
const KERNEL_EIGEN_GAP: f64 = 0.10;
const KERNEL_DIFFERENCE_SPREAD: f64 = 0.15;
/// Delta decay: exclusion radius in units of `h`, noise floor relative to
/// the peak, `R²` floor, drift of `K` between levels.
const DELTA_EXCLUSION: f64 = 3.0;
const DELTA_NOISE_FLOOR: f64 = 1e-10;
const DELTA_R2: f64 = 0.9;
const DELTA_K_DRIFT: f64 = 0.20;
const DELTA_ORDER_TOL: f64 = 0.3;
const CONVERGENCE_ORDER_TOL: f64 = 0.4;

#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub criteria: Vec<Criterion>,
}

impl Outcome {
    fn write(&mut self, path: PathBuf, contents: &[u8]) -> Result<()> {
        write_atomic(&path, contents)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn write_summary(&mut self, dir: &Path) -> Result<()> {
        let text = summary(&self.criteria);
        self.write(dir.join("summary.txt"), text.as_bytes())
    }
}

pub fn run(command: Command, cfg: &CliConfig, dir: &Path) -> std::result::Result<Outcome, CliError> {
    let out = match command {
        Command::Mesh => mesh(cfg, dir)?,
        Command::Solve => solve_cmd(cfg, dir)?,
        Command::Maxreg => {
            let report = maxreg_study(&cfg.study)?;
            let artifacts = emit_maxreg(&report, dir)?;
            Outcome { artifacts, criteria: esfem::harness::maxreg_criteria(&report) }
        }
        Command::Greens => greens(cfg, dir)?,
        Command::Delta => delta(cfg, dir)?,
        Command::Convergence => {
            let report = convergence_study(&cfg.study)?;
            let expected = cfg.study.degree as f64 + 1.0;
            let artifacts = emit_convergence(&report, expected, CONVERGENCE_ORDER_TOL, dir)?;
            let c = esfem::harness::convergence_criterion(&report, expected, CONVERGENCE_ORDER_TOL);
            Outcome { artifacts, criteria: vec![c] }
        }
        Command::Inequalities => {
            let report = inequality_suite(&cfg.study)?;
            let artifacts = emit_inequalities(&report, &cfg.study.levels, dir)?;
            Outcome { artifacts, criteria: esfem::harness::inequality_criteria(&report) }
        }
    };
    Ok(out)
}

fn mesh(cfg: &CliConfig, dir: &Path) -> Result<Outcome> {
    let meshes = cfg.study.meshes()?;
    let mut out = Outcome::default();
    for (&level, m) in cfg.study.levels.iter().zip(&meshes) {
        let mut vtk = Vec::new();
        mesh_io::write_vtk(m, &[], &mut vtk)?;
        out.write(dir.join(format!("mesh_{level}.vtk")), &vtk)?;
        let mut txt = Vec::new();
        mesh_io::write_text(m, &mut txt)?;
        out.write(dir.join(format!("mesh_{level}.txt")), &txt)?;
        let inv = m.check_invariants();
        out.criteria.push(Criterion::new(
            format!("mesh {level} invariants"),
            inv.holds(),
            format!(
                "node residual = {}, orientation = {}, quasi-uniformity = {}",
                fmt_float(inv.max_node_residual),
                fmt_float(inv.min_orientation),
                fmt_float(inv.quasi_uniformity)
            ),
        ));
    }
    out.write_summary(dir)?;
    Ok(out)
}

struct SolveRecord {
    series: String,
    final_space: Option<Arc<FeSpace>>,
    final_u: Vec<f64>,
    final_f: Vec<f64>,
}

fn solve_level(cfg: &CliConfig, mesh: &Arc<SurfaceMesh>) -> Result<SolveRecord> {
    let s = &cfg.study;
    let profile = ForcingProfile::parse(&s.profiles[0])?;
    let forcing = |t: f64, x: [f64; 3]| profile.eval(t, x);
    let problem = Problem {
        mesh: Arc::clone(mesh),
        scheme: s.scheme,
        forcing: Some(&forcing),
        initial: vec![0.0; mesh.n_nodes()],
        grid: TimeGrid::for_mesh(s.surface.horizon(), mesh.h(), s.time)?,
        options: SolverOptions { integrator: s.integrator, cg: s.cg, laplacian: false, forcing: true },
    };
    let mut rec = SolveRecord {
        series: "step,t,mass,norm_u\n".into(),
        final_space: None,
        final_u: Vec::new(),
        final_f: Vec::new(),
    };
    let mut observer = |v: &StepView<'_>| -> Result<()> {
        let mass: f64 = v.ops.mass.matvec(&vec![1.0; v.u.len()])?.iter().zip(v.u).map(|(a, b)| a * b).sum();
        let norm = v.ops.mass.bilinear(v.u, v.u)?.sqrt();
        let _ = writeln!(rec.series, "{},{},{},{}", v.index, fmt_float(v.t), fmt_float(mass), fmt_float(norm));
        rec.final_space = Some(Arc::clone(v.space));
        rec.final_u = v.u.to_vec();
        rec.final_f = v.f_h.to_vec();
        Ok(())
    };
    solve(&problem, &mut observer)?;
    Ok(rec)
}

fn solve_cmd(cfg: &CliConfig, dir: &Path) -> Result<Outcome> {
    let meshes = cfg.study.meshes()?;
    let records: Vec<SolveRecord> = meshes.par_iter().map(|m| solve_level(cfg, m)).collect::<Result<_>>()?;
    let mut out = Outcome::default();
    for (&level, rec) in cfg.study.levels.iter().zip(records) {
        out.write(dir.join(format!("series_{level}.csv")), rec.series.as_bytes())?;
        let space = rec.final_space.expect("solver observes the initial step");
        let fields: [(&str, &[f64]); 2] = [("u", &rec.final_u), ("f", &rec.final_f)];
        let mut csv = Vec::new();
        write_csv(&space, &fields, &mut csv)?;
        out.write(dir.join(format!("final_{level}.csv")), &csv)?;
        let mut vtk = Vec::new();
        mesh_io::write_vtk(space.mesh(), &fields, &mut vtk)?;
        out.write(dir.join(format!("final_{level}.vtk")), &vtk)?;
    }
    Ok(out)
}

/// Resolution of the mesh `factor` times finer than `level`.
pub fn refined_resolution(kind: SurfaceKind, level: usize, factor: usize) -> std::result::Result<usize, String> {
    match kind {
        SurfaceKind::Circle | SurfaceKind::Torus => Ok(level * factor),
        _ if factor.is_power_of_two() => Ok(level + factor.trailing_zeros() as usize),
        _ => Err(format!("refinement factor {factor} is not a power of two on an icosphere")),
    }
}

fn level_drift(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] / w[0] - 1.0).abs()).fold(0.0, f64::max)
}

fn greens(cfg: &CliConfig, dir: &Path) -> std::result::Result<Outcome, CliError> {
    let s = &cfg.study;
    let g = &cfg.green;
    let meshes = s.meshes()?;
    let mut out = Outcome::default();

    let mut decay_csv = format!("{GREEN_DECAY_HEADER}\n");
    let mut rates = Vec::new();
    for (&level, mesh) in s.levels.iter().zip(&meshes) {
        let grid = TimeGrid::for_mesh(g.horizon, mesh.h(), s.time)?;
        let sources = source_sample(mesh, g.sources);
        let fit = green_decay_study(mesh, &sources, &grid, g.t_min, s.cg)?;
        let _ = writeln!(
            decay_csv,
            "{level},{},{},{},{},{},{}",
            fmt_float(mesh.h()),
            fmt_float(grid.dt()),
            fmt_float(fit.amplitude),
            fmt_float(fit.rate),
            fmt_float(fit.r_squared),
            fit.samples.len()
        );
        out.criteria.push(Criterion::new(
            format!("kernel decay level {level}"),
            fit.rate > 0.0 && fit.r_squared >= KERNEL_R2,
            format!("rate = {}, R² = {}", fmt_float(fit.rate), fmt_float(fit.r_squared)),
        ));
        let ops = assemble_operators(&FeSpace::new(Arc::clone(mesh)), SurfaceTag::Discrete)?;
        let lambda = smallest_nonzero_generalized_eigenvalue(&ops.stiffness, &ops.mass, 500, 1e-12)?.value;
        out.criteria.push(Criterion::new(
            format!("kernel rate vs eigenvalue level {level}"),
            (fit.rate / lambda - 1.0).abs() <= KERNEL_EIGEN_GAP,
            format!("rate = {}, λ = {}", fmt_float(fit.rate), fmt_float(lambda)),
        ));
        rates.push(fit.rate);
    }
    if rates.len() >= 2 {
        let d = level_drift(&rates);
        out.criteria.push(Criterion::new(
            "kernel rate stability",
            d <= KERNEL_RATE_DRIFT,
            format!("drift = {}", fmt_float(d)),
        ));
    }
    out.write(dir.join("green_decay.csv"), decay_csv.as_bytes())?;

    let mut diff_csv = format!("{KERNEL_DIFFERENCE_HEADER}\n");
    if g.reference_factor > 0 {
        let opts = KernelDifferenceOptions { budget: g.budget, cg: s.cg, ..KernelDifferenceOptions::default() };
        let mut values = Vec::new();
        for (&level, coarse) in s.levels.iter().zip(&meshes) {
            let res = refined_resolution(s.surface.kind(), level, g.reference_factor)
                .map_err(|e| CliError::Config(format!("green.reference_factor: {e}")))?;
            let fine = Arc::new(build_mesh(&s.surface, res, s.degree)?);
            let grid = TimeGrid::for_mesh(g.horizon, fine.h(), s.time)?;
            let sources = source_sample(coarse, g.sources)
                .into_iter()
                .map(|p| coarse.lift_point(coarse.map(p.element, p.xi).0))
                .collect::<Result<Vec<_>>>()?;
            let d = kernel_difference_l1(coarse, &fine, &sources, &grid, &opts)?;
            let _ = writeln!(
                diff_csv,
                "{level},{},{},{},{}",
                fmt_float(coarse.h()),
                fmt_float(d.value),
                fmt_float(d.late_fraction),
                fmt_float(d.tail_bound)
            );
            values.push(d.value);
        }
        if values.len() >= 2 {
            let v = spread(&values) - 1.0;
            out.criteria.push(Criterion::new(
                "kernel difference boundedness",
                v <= KERNEL_DIFFERENCE_SPREAD,
                format!("max/min - 1 = {}", fmt_float(v)),
            ));
        }
    }
    out.write(dir.join("kernel_difference.csv"), diff_csv.as_bytes())?;

    let mut dyadic_csv = format!("{DYADIC_HEADER}\n");
    for (&level, mesh) in s.levels.iter().zip(&meshes) {
        if mesh.h() * 4.0 * g.c_star >= 1.0 {
            log::info!("dyadic report skipped at level {level}: h = {} is not below 1/(4 C_*)", mesh.h());
            continue;
        }
        let grid = TimeGrid::for_mesh(1.0, mesh.h(), s.time)?;
        let x0 = source_sample(mesh, 1)[0];
        let r = dyadic_report(mesh, x0, g.c_star, &grid, s.cg)?;
        for row in &r.rows {
            let set = match row.set {
                DyadicSet::Annulus(j) => format!("Q{j}"),
                DyadicSet::Innermost => "Qstar".to_string(),
            };
            let _ = writeln!(
                dyadic_csv,
                "{level},{set},{},{},{},{}",
                fmt_float(row.radius),
                fmt_float(row.measure),
                fmt_float(row.norm),
                fmt_float(row.norm_dt)
            );
        }
    }
    out.write(dir.join("dyadic.csv"), dyadic_csv.as_bytes())?;
    out.write_summary(dir)?;
    Ok(out)
}

fn delta(cfg: &CliConfig, dir: &Path) -> Result<Outcome> {
    let s = &cfg.study;
    let meshes = s.meshes()?;
    let mut out = Outcome::default();
    let mut csv = format!("{DELTA_HEADER}\n");
    let (mut hs, mut ks, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    for (&level, mesh) in s.levels.iter().zip(&meshes) {
        let space = FeSpace::new(Arc::clone(mesh));
        let (ops_h, ops_l) = rayon::join(
            || assemble_operators(&space, SurfaceTag::Discrete),
            || assemble_operators(&space, SurfaceTag::Lifted),
        );
        let (ops_h, ops_l) = (ops_h?, ops_l?);
        let sources = source_sample(mesh, cfg.green.sources);
        let rows: Vec<_> = sources
            .par_iter()
            .map(|&x0| {
                let fit = delta_decay_fit(&space, &ops_h, x0, DELTA_EXCLUSION, DELTA_NOISE_FLOOR)?;
                let c = delta_consistency_with(&space, &ops_h, &ops_l, x0, 1.0)?;
                Ok((fit, c.ratio))
            })
            .collect::<Result<_>>()?;
        let mut fits_ok = true;
        let mut k_sum = 0.0;
        let mut worst: f64 = 0.0;
        for (i, (fit, ratio)) in rows.iter().enumerate() {
            let k = 1.0 / fit.rate;
            let _ = writeln!(
                csv,
                "{level},{},{i},{},{},{},{}",
                fmt_float(mesh.h()),
                fmt_float(fit.rate),
                fmt_float(k),
                fmt_float(fit.r_squared),
                fmt_float(*ratio)
            );
            fits_ok &= fit.rate > 0.0 && fit.r_squared >= DELTA_R2;
            k_sum += k;
            worst = worst.max(*ratio);
        }
        out.criteria.push(Criterion::new(
            format!("delta decay level {level}"),
            fits_ok,
            format!("negative slope and R² ≥ {DELTA_R2} for all {} sources", rows.len()),
        ));
        hs.push(mesh.h());
        ks.push(k_sum / rows.len() as f64);
        ratios.push(worst);
    }
    if ks.len() >= 2 {
        let d = level_drift(&ks);
        out.criteria.push(Criterion::new(
            "delta decay constant stability",
            d <= DELTA_K_DRIFT,
            format!("drift = {}", fmt_float(d)),
        ));
    }
    if hs.len() >= 2 {
        let expected = s.degree as f64 + 1.0;
        let order = fitted_order(&hs, &ratios)?;
        out.criteria.push(Criterion::new(
            "delta consistency order",
            (order - expected).abs() <= DELTA_ORDER_TOL,
            format!("{} (expected {expected} ± {DELTA_ORDER_TOL})", fmt_float(order)),
        ));
    }
    out.write(dir.join("delta.csv"), csv.as_bytes())?;
    out.write_summary(dir)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refined_resolutions() {
        assert_eq!(refined_resolution(SurfaceKind::Circle, 32, 4), Ok(128));
        assert_eq!(refined_resolution(SurfaceKind::Sphere, 2, 4), Ok(4));
        assert!(refined_resolution(SurfaceKind::Sphere, 2, 3).is_err());
    }

    #[test]
    fn drift_is_largest_relative_step() {
        assert!((level_drift(&[1.0, 1.1, 1.0]) - 0.1).abs() < 1e-12);
        assert_eq!(level_drift(&[2.0]), 0.0);
    }
}
