use std::sync::Arc;

use super::maxreg::cell_rows_with;
use super::*;
use crate::geometry::vec3::Point;
use crate::geometry::ForcingProfile;
use crate::mesh::build_circle_mesh;

fn circle_config(levels: Vec<usize>) -> StudyConfig {
    StudyConfig::new(SurfaceSpec::circle(1.0), levels)
}

fn small_config() -> StudyConfig {
    let mut cfg = circle_config(vec![8, 16]);
    cfg.surface = cfg.surface.with_horizon(0.25);
    cfg.pq = vec![(2.0, 2.0), (4.0, 2.0)];
    cfg.profiles = vec!["bump".into(), "lowfreq-seed7".into()];
    cfg
}

#[test]
fn config_validation() {
    let mut cfg = small_config();
    assert!(cfg.validate().is_ok());
    cfg.pq.push((1.0, 2.0));
    assert!(matches!(cfg.validate(), Err(Error::InvalidExponent(_))));
    let mut cfg = small_config();
    cfg.levels = vec![16, 16];
    assert!(cfg.validate().is_err());
    let mut cfg = small_config();
    cfg.profiles.push("nope".into());
    assert!(matches!(cfg.validate(), Err(Error::UnknownProfile(_))));
    assert_eq!(circle_config(vec![8]).space_exponents(), vec![2.0, 4.0, 3.0]);
}

#[test]
fn zero_forcing_reports_na() {
    let mut cfg = small_config();
    cfg.profiles = vec!["zero".into()];
    let report = maxreg_study(&cfg).unwrap();
    assert_eq!(report.rows.len(), 4);
    for r in &report.rows {
        assert_eq!((r.norm_dtu, r.norm_lapu, r.norm_f), (0.0, 0.0, 0.0));
        assert_eq!(r.ratio, None);
    }
    assert!(maxreg_csv(&report, "zero").lines().skip(1).all(|l| l.contains(",NA,")));
    assert!(report.uniformity.is_empty());
}

#[test]
fn ratio_is_invariant_under_forcing_scaling() {
    let cfg = small_config();
    let mesh = Arc::new(build_circle_mesh(&cfg.surface, 16, 1).unwrap());
    let profile = ForcingProfile::parse("lowfreq-seed7").unwrap();
    let f = |t: f64, x: Point| profile.eval(t, x);
    let f2 = |t: f64, x: Point| 2.0 * profile.eval(t, x);
    let a = cell_rows_with(&cfg, 16, &mesh, "x", &f).unwrap();
    let b = cell_rows_with(&cfg, 16, &mesh, "x", &f2).unwrap();
    for (a, b) in a.iter().zip(&b) {
        let (ra, rb) = (a.ratio.unwrap(), b.ratio.unwrap());
        assert!((ra - rb).abs() <= 1e-10 * ra, "{ra} vs {rb}");
    }
}

#[test]
fn energy_ratio_matches_table() {
    let cfg = small_config();
    let report = maxreg_study(&cfg).unwrap();
    let meshes = cfg.meshes().unwrap();
    for (mesh, &level) in meshes.iter().zip(&cfg.levels) {
        for profile in &cfg.profiles {
            let row =
                report.rows.iter().find(|r| &r.profile == profile && r.level == level && r.p == 2.0 && r.q == 2.0);
            let table = row.unwrap().ratio.unwrap();
            let direct = energy_ratio(&cfg, mesh, profile).unwrap().unwrap();
            assert!((table - direct).abs() <= 1e-8 * direct, "{table} vs {direct}");
            assert!(direct <= 3.1);
        }
    }
}

#[test]
fn reports_are_deterministic_across_worker_counts() {
    let cfg = small_config();
    let run = |workers: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        let report = pool.install(|| maxreg_study(&cfg).unwrap());
        report.profiles().iter().map(|p| maxreg_csv(&report, p)).collect::<Vec<_>>()
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(4));
}

#[test]
fn csv_layout() {
    let empty = StudyReport::default();
    assert_eq!(maxreg_csv(&empty, "bump"), format!("{MAXREG_HEADER}\n"));
    let mut cfg = small_config();
    cfg.levels = vec![8, 12, 16];
    cfg.pq = vec![(2.0, 2.0)];
    cfg.profiles = vec!["bump".into()];
    let report = maxreg_study(&cfg).unwrap();
    let csv = maxreg_csv(&report, "bump");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], MAXREG_HEADER);
    assert!(lines[1].starts_with("8,"));
    assert!(lines[3].starts_with("16,"));
    assert_eq!(lines[1].split(',').count(), 10);
}

#[test]
fn emit_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = maxreg_study(&small_config()).unwrap();
    let paths = emit_maxreg(&report, dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    for p in &paths {
        assert!(p.exists());
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(summary.lines().count(), report.uniformity.len());
    assert!(summary.lines().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
    assert!(std::fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().path().to_string_lossy().ends_with(".partial")));
}

#[test]
fn convergence_on_the_circle() {
    let mut cfg = circle_config(vec![8, 16, 32]);
    cfg.surface = cfg.surface.with_horizon(0.5);
    cfg.integrator = crate::solver::Integrator::Bdf2;
    let report = convergence_study(&cfg).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!((report.fitted_order - 2.0).abs() < 0.3, "{report:?}");
    let csv = convergence_csv(&report);
    assert!(csv.lines().nth(1).unwrap().ends_with(",NA"));
    let mut moving = cfg.clone();
    moving.surface = SurfaceSpec::scaled_sphere_flow(1.0);
    moving.levels = vec![1, 2];
    assert!(matches!(convergence_study(&moving), Err(Error::UnsupportedSurface(_))));
}

#[test]
fn inequality_suite_on_the_circle() {
    let cfg = circle_config(vec![16, 32, 64]);
    let report = inequality_suite(&cfg).unwrap();
    for c in &report.checks {
        eprintln!("{} {:?} growth {:.3} {}", c.name, c.constants, c.growth, c.passed);
        assert!(c.constants.iter().all(|v| v.is_finite() && *v >= 0.0), "{c:?}");
    }
    let k = report.check("inverse-inequality").unwrap();
    assert!((k.constants[2] / k.constants[1] - 1.0).abs() <= 0.05);
    let s = report.check("inverse-inequality-samples").unwrap();
    assert!(s.passed);
    let csv = inequality_csv(&report, &cfg.levels);
    assert_eq!(csv.lines().count(), 1 + 3 * report.checks.len());
}
