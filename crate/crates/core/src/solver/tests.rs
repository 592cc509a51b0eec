use std::sync::Arc;

use super::*;
use crate::fem::{interpolate, lq_error, lq_norm, SurfaceTag};
use crate::geometry::vec3::Point;
use crate::geometry::{ForcingProfile, SurfaceSpec};
use crate::mesh::{build_circle_mesh, build_sphere_mesh, SurfaceMesh};

fn circle(n: usize, k: usize) -> Arc<SurfaceMesh> {
    Arc::new(build_circle_mesh(&SurfaceSpec::circle(1.0), n, k).unwrap())
}

fn flow_sphere(level: usize, k: usize) -> Arc<SurfaceMesh> {
    Arc::new(build_sphere_mesh(&SurfaceSpec::scaled_sphere_flow(1.0), level, k).unwrap())
}

fn bdf2() -> SolverOptions {
    SolverOptions { integrator: Integrator::Bdf2, ..SolverOptions::default() }
}

fn grid_for(mesh: &SurfaceMesh) -> TimeGrid {
    TimeGrid::for_mesh(1.0, mesh.h(), TimePolicy::default()).unwrap()
}

#[test]
fn zero_data_gives_zero() {
    let mesh = circle(16, 2);
    let mut traj = Trajectory::new();
    let grid = TimeGrid::new(0.5, 20).unwrap();
    let s =
        solve_scheme_a(&mesh, None, vec![0.0; mesh.n_nodes()], &grid, &SolverOptions::default(), &mut traj).unwrap();
    assert_eq!(s.steps, 20);
    assert_eq!(traj.len(), 21);
    assert!(traj.u.iter().flatten().chain(traj.u_dot.iter().flatten()).all(|v| *v == 0.0));
}

#[test]
fn circle_eigenmode_decay_rate() {
    for (k, levels, target) in [(1usize, [16usize, 32, 64], 2.0), (2, [8, 16, 32], 3.0)] {
        let mut errs = Vec::new();
        for n in levels {
            let mesh = circle(n, k);
            let grid = grid_for(&mesh);
            let space = crate::fem::FeSpace::new(Arc::clone(&mesh));
            let sin = |x: Point| x[1].atan2(x[0]).sin();
            let u0 = interpolate(&space, sin);
            let mut traj = Trajectory::new();
            solve_scheme_a(&mesh, None, u0.clone(), &grid, &bdf2(), &mut traj).unwrap();
            let target_u: Vec<f64> = u0.iter().map(|v| v * (-1.0f64).exp()).collect();
            let d: Vec<f64> = traj.last_u().unwrap().iter().zip(&target_u).map(|(a, b)| a - b).collect();
            errs.push(lq_norm(&space, SurfaceTag::Lifted, &d, 2.0).unwrap());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > target - 0.3, "k={k}: {errs:?}");
        }
    }
}

#[test]
fn constants_are_preserved_by_scheme_a_on_moving_sphere() {
    let mesh = flow_sphere(1, 1);
    let grid = TimeGrid::new(1.0, 40).unwrap();
    let mut traj = Trajectory::new();
    solve_scheme_a(&mesh, None, vec![1.0; mesh.n_nodes()], &grid, &SolverOptions::default(), &mut traj).unwrap();
    for u in &traj.u {
        assert!(u.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}

#[test]
fn scheme_b_conserves_mass() {
    let mesh = flow_sphere(2, 1);
    let u0: Vec<f64> = mesh.nodes().iter().map(|x| 1.0 + 0.5 * x[0] * x[1] + x[2]).collect();
    for integrator in [Integrator::ImplicitEuler, Integrator::Bdf2] {
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let mut traj = Trajectory::new();
        let opts = SolverOptions { integrator, ..SolverOptions::default() };
        let s = solve_scheme_b(&mesh, None, u0.clone(), &grid, &opts, &mut traj).unwrap();
        let m0 = traj.mass[0];
        for m in &traj.mass {
            assert!((m - m0).abs() <= 1e-10 * m0.abs(), "{integrator:?}: {m} vs {m0}");
        }
        if integrator == Integrator::ImplicitEuler {
            assert!(s.max_identity_residual < 1e-10);
        }
    }
}

#[test]
fn schemes_agree_on_stationary_surfaces() {
    let mesh = circle(24, 2);
    let f = |t: f64, x: Point| ForcingProfile::Bump.eval(t, x);
    let grid = TimeGrid::new(0.3, 60).unwrap();
    for integrator in [Integrator::ImplicitEuler, Integrator::Bdf2] {
        let opts = SolverOptions { integrator, ..SolverOptions::default() };
        let (mut a, mut b) = (Trajectory::new(), Trajectory::new());
        solve_scheme_a(&mesh, Some(&f), vec![0.0; mesh.n_nodes()], &grid, &opts, &mut a).unwrap();
        solve_scheme_b(&mesh, Some(&f), vec![0.0; mesh.n_nodes()], &grid, &opts, &mut b).unwrap();
        for (x, y) in a.u.iter().flatten().zip(b.u.iter().flatten()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn dilution_on_expanding_sphere() {
    let spec = SurfaceSpec::scaled_sphere_flow(1.0);
    let mut errs = Vec::new();
    for level in 1..=3 {
        let mesh = flow_sphere(level, 1);
        let grid = grid_for(&mesh);
        let mut err: f64 = 0.0;
        let mut obs = |s: &StepView<'_>| -> crate::Result<()> {
            let r = spec.radius(s.t).unwrap();
            let exact = 1.0 / (r * r);
            let e = lq_error(s.space, SurfaceTag::Lifted, s.u, |_| exact, 2.0)?;
            err = err.max(e);
            Ok(())
        };
        solve_scheme_b(&mesh, None, vec![1.0; mesh.n_nodes()], &grid, &bdf2(), &mut obs).unwrap();
        errs.push(err);
    }
    // uniform scaling multiplies M(t) by s(t)², so the nodal constant is exact
    assert!(errs.iter().all(|e| *e < 1e-12), "{errs:?}");
}

#[test]
fn constant_forcing_and_mass_identity() {
    let mesh = circle(32, 1);
    let c = 0.7;
    let f = move |_t: f64, _x: Point| c;
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let mut traj = Trajectory::new();
    let s = solve_stationary(&mesh, Some(&f), vec![0.0; mesh.n_nodes()], &grid, &SolverOptions::default(), &mut traj)
        .unwrap();
    assert!(s.max_identity_residual < 1e-10);
    let space = crate::fem::FeSpace::new(Arc::clone(&mesh));
    let ops = crate::fem::assemble_operators(&space, SurfaceTag::Discrete).unwrap();
    let ones = vec![1.0; mesh.n_nodes()];
    for n in 0..traj.len() {
        let a = ops.mass.bilinear(&traj.u_dot[n], &ones).unwrap();
        let b = ops.mass.bilinear(&traj.f_h[n], &ones).unwrap();
        assert!((a - b).abs() <= 1e-10 * b.abs());
        let t = traj.times[n];
        assert!(traj.u[n].iter().all(|v| (v - c * t).abs() < 1e-10));
    }
}

#[test]
fn energy_bounds_at_p_q_2() {
    let mesh = circle(32, 1);
    for id in ["bump", "osc-seed42", "lowfreq-seed7"] {
        let prof = ForcingProfile::parse(id).unwrap();
        let f = |t: f64, x: Point| prof.eval(t, x);
        let grid = grid_for(&mesh);
        let mut traj = Trajectory::new();
        solve_stationary(&mesh, Some(&f), vec![0.0; mesh.n_nodes()], &grid, &SolverOptions::default(), &mut traj)
            .unwrap();
        let nf = spacetime_norm(&traj, Field::Forcing, 2.0, 2.0).unwrap();
        let nl = spacetime_norm(&traj, Field::LapU, 2.0, 2.0).unwrap();
        let nd = spacetime_norm(&traj, Field::UDot, 2.0, 2.0).unwrap();
        assert!(nl <= 1.02 * nf, "{id}: {nl} {nf}");
        assert!(nd <= 2.04 * nf, "{id}: {nd} {nf}");
    }
}

#[test]
fn energy_dissipation_and_monotone_mass() {
    let mesh = circle(20, 2);
    let u0: Vec<f64> = mesh.nodes().iter().map(|x| (3.0 * x[0]).sin() + x[1]).collect();
    let grid = TimeGrid::new(0.5, 50).unwrap();
    let mut norms = Vec::new();
    let mut obs = |s: &StepView<'_>| -> crate::Result<()> {
        norms.push(s.ops.mass.bilinear(s.u, s.u)?.sqrt());
        Ok(())
    };
    solve_stationary(&mesh, None, u0, &grid, &SolverOptions::default(), &mut obs).unwrap();
    assert!(norms.windows(2).all(|w| w[1] <= w[0]));

    let mesh = flow_sphere(1, 1);
    let f = |t: f64, x: Point| ForcingProfile::Bump.eval(t, x);
    let mut traj = Trajectory::new();
    solve_scheme_b(
        &mesh,
        Some(&f),
        vec![0.0; mesh.n_nodes()],
        &TimeGrid::new(1.0, 100).unwrap(),
        &SolverOptions::default(),
        &mut traj,
    )
    .unwrap();
    assert!(traj.mass.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn spacetime_norm_examples() {
    let times: Vec<f64> = (0..=10).map(|i| 0.2 * i as f64).collect();
    let v = vec![3.0; 11];
    let n = spacetime_norm_from_series(&times, &v, 3.0).unwrap();
    assert!((n - 3.0 * 2f64.powf(1.0 / 3.0)).abs() < 1e-13);
    assert_eq!(spacetime_norm_from_series(&times, &[0.0; 11], 2.0).unwrap(), 0.0);
    assert!(matches!(spacetime_norm_from_series(&times, &v, 1.0), Err(crate::Error::InvalidExponent(_))));
    assert!(spacetime_norm_from_series(&times, &v, f64::INFINITY).is_err());
}

#[test]
fn spacetime_norm_matches_dense_oracle() {
    // f_h = P_h bump on a frozen circle; the oracle re-integrates the stored
    // coefficients with a 10-point Gauss rule on each element.
    let mesh = circle(24, 2);
    let f = |t: f64, x: Point| ForcingProfile::Bump.eval(t, x);
    let grid = TimeGrid::new(1.0, 40).unwrap();
    let mut traj = Trajectory::new();
    let opts = SolverOptions { laplacian: false, ..SolverOptions::default() };
    solve_stationary(&mesh, Some(&f), vec![0.0; mesh.n_nodes()], &grid, &opts, &mut traj).unwrap();
    let n = spacetime_norm(&traj, Field::Forcing, 2.0, 2.0).unwrap();

    let rule = crate::element::QuadratureRule::gauss_legendre(10);
    let reference = mesh.reference();
    let w = grid.trapezoid_weights();
    let mut total = 0.0;
    for (wt, c) in w.iter().zip(&traj.f_h) {
        let mut s = 0.0;
        for e in 0..mesh.n_elements() {
            for (xi, qw) in rule.points().iter().zip(rule.weights()) {
                let (_, frame) = mesh.map(e, *xi);
                let v: f64 = reference.eval_values(*xi).iter().zip(mesh.element(e)).map(|(p, &i)| p * c[i]).sum();
                s += qw * frame.sqrt_det * v * v;
            }
        }
        total += wt * s;
    }
    assert!((n - total.sqrt()).abs() <= 1e-8 * n, "{n} {}", total.sqrt());
    assert!(spacetime_norm(&traj, Field::LapU, 2.0, 2.0).is_err());
}

#[test]
fn grid_policy() {
    let g = TimeGrid::for_mesh(1.0, 0.1, TimePolicy::default()).unwrap();
    assert_eq!(g.n_steps(), 400);
    let g = TimeGrid::for_mesh(1.0, 0.05, TimePolicy::default()).unwrap();
    assert_eq!(g.n_steps(), 800);
    assert!(g.dt() <= 0.5 * 0.05 * 0.05);
    assert_eq!(g.time(g.n_steps()), 1.0);
    assert_eq!(g.refined().n_steps(), 1600);
    let w: f64 = g.trapezoid_weights().iter().sum();
    assert!((w - 1.0).abs() < 1e-12);
    assert!(TimeGrid::new(0.0, 3).is_err());
    assert!(TimeGrid::new(1.0, 0).is_err());
}

#[test]
fn richardson_flags() {
    let g = TimeGrid::new(1.0, 10).unwrap();
    let ok = richardson_check(&g, 0.01, |g| Ok(vec![1.0 + 1e-3 * g.dt(), 0.0])).unwrap();
    assert!(ok.passed);
    let bad = require_richardson(&g, 0.01, |g| Ok(vec![1.0 + g.dt()]));
    assert!(matches!(bad, Err(Error::StepTooLarge(_))));
}
