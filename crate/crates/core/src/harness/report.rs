use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ConvergenceReport, InequalityReport, StudyReport};
use crate::error::Result;

pub const MAXREG_HEADER: &str = "level,h,dt,p,q,norm_dtu,norm_lapu,norm_f,ratio,richardson_ok";
pub const CONVERGENCE_HEADER: &str = "level,h,dt,error,order";
pub const INEQUALITY_HEADER: &str = "check,level,h,constant,growth,passed";

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt_float)
}

/// One PASS/FAIL line of a summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Ratio table of one profile.
pub fn maxreg_csv(report: &StudyReport, profile: &str) -> String {
    let mut s = String::from(MAXREG_HEADER);
    s.push('\n');
    for r in report.rows_for(profile) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.level,
            fmt_float(r.h),
            fmt_float(r.dt),
            fmt_float(r.p),
            fmt_float(r.q),
            fmt_float(r.norm_dtu),
            fmt_float(r.norm_lapu),
            fmt_float(r.norm_f),
            fmt_opt(r.ratio),
            r.richardson_ok
        );
    }
    s
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    for (i, r) in report.rows.iter().enumerate() {
        let order = if i == 0 { None } else { report.orders.get(i - 1).copied() };
        let _ =
            writeln!(s, "{},{},{},{},{}", r.level, fmt_float(r.h), fmt_float(r.dt), fmt_float(r.error), fmt_opt(order));
    }
    s
}

pub fn inequality_csv(report: &InequalityReport, levels: &[usize]) -> String {
    let mut s = String::from(INEQUALITY_HEADER);
    s.push('\n');
    for c in &report.checks {
        for (i, (h, k)) in c.h.iter().zip(&c.constants).enumerate() {
            let level = levels.get(i).copied().unwrap_or(i);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                c.name,
                level,
                fmt_float(*h),
                fmt_float(*k),
                fmt_float(c.growth),
                c.passed
            );
        }
    }
    s
}

/// Writes `contents` to `path.partial`, then renames it to `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    fs::write(&partial, contents)?;
    fs::rename(&partial, path)?;
    Ok(())
}

/// One line per criterion.
pub fn summary(criteria: &[Criterion]) -> String {
    criteria.iter().map(|c| c.line() + "\n").collect()
}

/// One criterion per uniformity verdict.
pub fn maxreg_criteria(report: &StudyReport) -> Vec<Criterion> {
    report
        .uniformity
        .iter()
        .map(|u| {
            Criterion::new(
                format!("uniformity {} p={} q={}", u.profile, u.p, u.q),
                u.passed,
                format!(
                    "max/min = {}, last growth = {}, richardson_ok = {}",
                    fmt_float(u.spread),
                    fmt_float(u.last_growth),
                    u.richardson_ok
                ),
            )
        })
        .collect()
}

pub fn convergence_criterion(report: &ConvergenceReport, expected: f64, tolerance: f64) -> Criterion {
    Criterion::new(
        "fitted order",
        (report.fitted_order - expected).abs() <= tolerance,
        format!("{} (expected {expected} ± {tolerance})", fmt_float(report.fitted_order)),
    )
}

pub fn inequality_criteria(report: &InequalityReport) -> Vec<Criterion> {
    report
        .checks
        .iter()
        .map(|c| Criterion::new(c.name.clone(), c.passed, format!("growth = {}", fmt_float(c.growth))))
        .collect()
}

/// One `maxreg_<profile>.csv` per profile plus `summary.txt` with one line
/// per uniformity verdict. Returns the written paths.
pub fn emit_maxreg(report: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for profile in report.profiles() {
        let path = dir.join(format!("maxreg_{profile}.csv"));
        write_atomic(&path, maxreg_csv(report, &profile).as_bytes())?;
        paths.push(path);
    }
    if report.rows.is_empty() {
        let path = dir.join("maxreg.csv");
        write_atomic(&path, format!("{MAXREG_HEADER}\n").as_bytes())?;
        paths.push(path);
    }
    let criteria = maxreg_criteria(report);
    let path = dir.join("summary.txt");
    write_atomic(&path, summary(&criteria).as_bytes())?;
    paths.push(path);
    Ok(paths)
}

/// `convergence.csv` plus a summary line comparing the fitted order with
/// `expected ± tolerance`.
pub fn emit_convergence(report: &ConvergenceReport, expected: f64, tolerance: f64, dir: &Path) -> Result<Vec<PathBuf>> {
    let csv = dir.join("convergence.csv");
    write_atomic(&csv, convergence_csv(report).as_bytes())?;
    let sum = dir.join("summary.txt");
    write_atomic(&sum, summary(&[convergence_criterion(report, expected, tolerance)]).as_bytes())?;
    Ok(vec![csv, sum])
}

pub fn emit_inequalities(report: &InequalityReport, levels: &[usize], dir: &Path) -> Result<Vec<PathBuf>> {
    let csv = dir.join("inequalities.csv");
    write_atomic(&csv, inequality_csv(report, levels).as_bytes())?;
    let criteria = inequality_criteria(report);
    let sum = dir.join("summary.txt");
    write_atomic(&sum, summary(&criteria).as_bytes())?;
    Ok(vec![csv, sum])
}
