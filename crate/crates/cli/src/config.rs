//! Study configuration files.
//!
//! TOML syntax with a fixed set of sections and keys; anything else is
//! rejected. Only `surface.kind` and `study.levels` are required.
//!
//! ```toml
//! [surface]
//! kind = "circle"          # circle, sphere, torus, scaled_sphere_flow, ellipsoid_flow
//! params = [1.0]           # shape parameters, kind-specific defaults
//! horizon = 1.0            # final time T
//!
//! [study]
//! scheme = "stationary"    # A, B, stationary (default: stationary on fixed surfaces, A otherwise)
//! integrator = "implicit-euler"   # or bdf2
//! degree = 1
//! levels = [32, 64, 128]   # N for circles, subdivision levels for spheres
//! pq = [[2.0, 2.0], [4.0, 2.0]]
//! profiles = ["bump", "osc-seed42"]
//! seed = 0
//! mode = 2                 # eigenmode for convergence studies
//!
//! [time]
//! c = 0.5                  # Δt = min(c h², dt_max)
//! dt_max = 2.5e-3
//! richardson_tol = 0.01
//! require_richardson = false
//!
//! [solver]
//! cg_tol = 1e-12
//! cg_maxiter_factor = 10
//!
//! [green]
//! c_star = 16.0
//! sources = 8
//! t_min = 1.0
//! horizon = 3.0
//! reference_factor = 4     # 0 disables the kernel difference
//! budget = 200000000
//!
//! [output]
//! dir = "out"
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use esfem::geometry::{SurfaceKind, SurfaceSpec};
use esfem::harness::{StudyConfig, DEFAULT_PQ, DEFAULT_PROFILES};
use esfem::solver::{Integrator, Scheme};
use toml::{Table, Value};

use crate::CliError;

const SCHEMA: &[(&str, &[&str])] = &[
    ("surface", &["kind", "params", "horizon"]),
    ("study", &["scheme", "integrator", "degree", "levels", "pq", "profiles", "seed", "mode"]),
    ("time", &["c", "dt_max", "richardson_tol", "require_richardson"]),
    ("solver", &["cg_tol", "cg_maxiter_factor"]),
    ("green", &["c_star", "sources", "t_min", "horizon", "reference_factor", "budget"]),
    ("output", &["dir"]),
];

#[derive(Clone, Debug, PartialEq)]
pub struct GreenConfig {
    pub c_star: f64,
    pub sources: usize,
    pub t_min: f64,
    pub horizon: f64,
    pub reference_factor: usize,
    pub budget: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self { c_star: 16.0, sources: 8, t_min: 1.0, horizon: 3.0, reference_factor: 4, budget: 200_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub study: StudyConfig,
    pub green: GreenConfig,
    pub output: Option<PathBuf>,
}

fn err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn section<'a>(root: &'a Table, name: &str) -> Result<Option<&'a Table>, CliError> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(err(name, "expected a section")),
    }
}

fn float(v: &Value, key: &str) -> Result<f64, CliError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(err(key, "expected a number")),
    }
}

fn uint(v: &Value, key: &str) -> Result<usize, CliError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(err(key, "expected a non-negative integer")),
    }
}

fn string<'a>(v: &'a Value, key: &str) -> Result<&'a str, CliError> {
    v.as_str().ok_or_else(|| err(key, "expected a string"))
}

fn array<'a>(v: &'a Value, key: &str) -> Result<&'a [Value], CliError> {
    v.as_array().map(Vec::as_slice).ok_or_else(|| err(key, "expected an array"))
}

struct Lookup<'a> {
    root: &'a Table,
}

impl<'a> Lookup<'a> {
    fn get(&self, path: &str) -> Result<Option<&'a Value>, CliError> {
        let (sec, key) = path.split_once('.').expect("dotted key");
        Ok(section(self.root, sec)?.and_then(|t| t.get(key)))
    }

    fn required(&self, path: &str) -> Result<&'a Value, CliError> {
        self.get(path)?.ok_or_else(|| CliError::Config(format!("{path}: missing required key")))
    }

    fn float_or(&self, path: &str, default: f64) -> Result<f64, CliError> {
        self.get(path)?.map_or(Ok(default), |v| float(v, path))
    }

    fn uint_or(&self, path: &str, default: usize) -> Result<usize, CliError> {
        self.get(path)?.map_or(Ok(default), |v| uint(v, path))
    }
}

fn check_schema(root: &Table) -> Result<(), CliError> {
    for (name, value) in root {
        let Some((_, keys)) = SCHEMA.iter().find(|(s, _)| s == name) else {
            return Err(err(name, "unknown section"));
        };
        let Value::Table(t) = value else {
            return Err(err(name, "expected a section"));
        };
        for key in t.keys() {
            if !keys.contains(&key.as_str()) {
                return Err(err(&format!("{name}.{key}"), "unknown key"));
            }
        }
    }
    Ok(())
}

/// Applies `section.key=value` overrides; `value` uses TOML syntax, with
/// bare words taken as strings.
pub fn apply_overrides(root: &mut Table, overrides: &[String]) -> Result<(), CliError> {
    for o in overrides {
        let (path, raw) = o.split_once('=').ok_or_else(|| err(o, "expected section.key=value"))?;
        let (sec, key) = path.trim().split_once('.').ok_or_else(|| err(path, "expected section.key"))?;
        let raw = raw.trim();
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => Value::String(raw.to_string()),
        };
        let entry = root.entry(sec.to_string()).or_insert_with(|| Value::Table(Table::new()));
        let Value::Table(t) = entry else {
            return Err(err(sec, "expected a section"));
        };
        t.insert(key.to_string(), value);
    }
    Ok(())
}

pub fn parse_table(text: &str) -> Result<Table, CliError> {
    text.parse::<Table>().map_err(|e| CliError::Config(format!("syntax: {}", e.message())))
}

impl CliConfig {
    pub fn from_table(root: &Table) -> Result<Self, CliError> {
        check_schema(root)?;
        let l = Lookup { root };

        let kind: SurfaceKind =
            string(l.required("surface.kind")?, "surface.kind")?.parse().map_err(|e| err("surface.kind", e))?;
        let params = match l.get("surface.params")? {
            Some(v) => {
                array(v, "surface.params")?.iter().map(|x| float(x, "surface.params")).collect::<Result<_, _>>()?
            }
            None => Vec::new(),
        };
        let horizon = l.float_or("surface.horizon", 1.0)?;
        let surface = SurfaceSpec::new(kind, params, horizon).map_err(|e| err("surface", e))?;

        let levels: Vec<usize> = array(l.required("study.levels")?, "study.levels")?
            .iter()
            .map(|v| uint(v, "study.levels"))
            .collect::<Result<_, _>>()?;
        let mut study = StudyConfig::new(surface, levels);
        study.scheme = match l.get("study.scheme")? {
            Some(v) => Scheme::parse(string(v, "study.scheme")?).map_err(|e| err("study.scheme", e))?,
            None if study.surface.is_stationary() => Scheme::Stationary,
            None => Scheme::A,
        };
        if let Some(v) = l.get("study.integrator")? {
            study.integrator =
                Integrator::parse(string(v, "study.integrator")?).map_err(|e| err("study.integrator", e))?;
        }
        study.degree = l.uint_or("study.degree", 1)?;
        study.pq = match l.get("study.pq")? {
            Some(v) => array(v, "study.pq")?
                .iter()
                .map(|pair| {
                    let a = array(pair, "study.pq")?;
                    if a.len() != 2 {
                        return Err(err("study.pq", "expected [p, q] pairs"));
                    }
                    Ok((float(&a[0], "study.pq")?, float(&a[1], "study.pq")?))
                })
                .collect::<Result<_, _>>()?,
            None => DEFAULT_PQ.to_vec(),
        };
        study.profiles = match l.get("study.profiles")? {
            Some(v) => array(v, "study.profiles")?
                .iter()
                .map(|s| string(s, "study.profiles").map(str::to_string))
                .collect::<Result<_, _>>()?,
            None => DEFAULT_PROFILES.iter().map(|s| s.to_string()).collect(),
        };
        study.seed = l.uint_or("study.seed", 0)? as u64;
        study.mode = l.uint_or("study.mode", 2)?;
        study.time.c = l.float_or("time.c", study.time.c)?;
        study.time.dt_max = l.float_or("time.dt_max", study.time.dt_max)?;
        study.richardson_tol = l.float_or("time.richardson_tol", study.richardson_tol)?;
        if let Some(v) = l.get("time.require_richardson")? {
            study.require_richardson =
                v.as_bool().ok_or_else(|| err("time.require_richardson", "expected a boolean"))?;
        }
        study.cg.tol = l.float_or("solver.cg_tol", study.cg.tol)?;
        study.cg.maxiter_factor = l.uint_or("solver.cg_maxiter_factor", study.cg.maxiter_factor)?;
        study.validate().map_err(|e| err("study", e))?;

        let d = GreenConfig::default();
        let green = GreenConfig {
            c_star: l.float_or("green.c_star", d.c_star)?,
            sources: l.uint_or("green.sources", d.sources)?,
            t_min: l.float_or("green.t_min", d.t_min)?,
            horizon: l.float_or("green.horizon", d.horizon)?,
            reference_factor: l.uint_or("green.reference_factor", d.reference_factor)?,
            budget: l.uint_or("green.budget", d.budget)?,
        };
        let output = l.get("output.dir")?.map(|v| string(v, "output.dir").map(PathBuf::from)).transpose()?;
        Ok(Self { study, green, output })
    }

    /// Resolved values of every key that affects results, one per line in
    /// schema order. The output directory is excluded.
    pub fn canonical(&self) -> String {
        let s = &self.study;
        let f = |v: f64| format!("{v:.16e}");
        let mut out = String::new();
        let _ = writeln!(out, "surface.kind={}", s.surface.kind());
        let params: Vec<String> = s.surface.params().iter().map(|&p| f(p)).collect();
        let _ = writeln!(out, "surface.params=[{}]", params.join(","));
        let _ = writeln!(out, "surface.horizon={}", f(s.surface.horizon()));
        let _ = writeln!(out, "study.scheme={}", s.scheme.name());
        let _ = writeln!(out, "study.integrator={}", s.integrator.name());
        let _ = writeln!(out, "study.degree={}", s.degree);
        let _ = writeln!(out, "study.levels={:?}", s.levels);
        let pq: Vec<String> = s.pq.iter().map(|(p, q)| format!("[{},{}]", f(*p), f(*q))).collect();
        let _ = writeln!(out, "study.pq=[{}]", pq.join(","));
        let _ = writeln!(out, "study.profiles={:?}", s.profiles);
        let _ = writeln!(out, "study.seed={}", s.seed);
        let _ = writeln!(out, "study.mode={}", s.mode);
        let _ = writeln!(out, "time.c={}", f(s.time.c));
        let _ = writeln!(out, "time.dt_max={}", f(s.time.dt_max));
        let _ = writeln!(out, "time.richardson_tol={}", f(s.richardson_tol));
        let _ = writeln!(out, "time.require_richardson={}", s.require_richardson);
        let _ = writeln!(out, "solver.cg_tol={}", f(s.cg.tol));
        let _ = writeln!(out, "solver.cg_maxiter_factor={}", s.cg.maxiter_factor);
        let g = &self.green;
        let _ = writeln!(out, "green.c_star={}", f(g.c_star));
        let _ = writeln!(out, "green.sources={}", g.sources);
        let _ = writeln!(out, "green.t_min={}", f(g.t_min));
        let _ = writeln!(out, "green.horizon={}", f(g.horizon));
        let _ = writeln!(out, "green.reference_factor={}", g.reference_factor);
        let _ = writeln!(out, "green.budget={}", g.budget);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[surface]\nkind = \"circle\"\n[study]\nlevels = [8, 16]\n";

    fn load(text: &str) -> Result<CliConfig, CliError> {
        CliConfig::from_table(&parse_table(text)?)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = load(MINIMAL).unwrap();
        assert_eq!(c.study.scheme, Scheme::Stationary);
        assert_eq!(c.study.pq, DEFAULT_PQ.to_vec());
        assert_eq!(c.green, GreenConfig::default());
        assert_eq!(c.output, None);
        let moving = load("[surface]\nkind = \"scaled_sphere_flow\"\n[study]\nlevels = [1]\n").unwrap();
        assert_eq!(moving.study.scheme, Scheme::A);
    }

    #[test]
    fn missing_and_unknown_keys() {
        let e = load("[study]\nlevels = [8]\n").unwrap_err();
        assert!(e.to_string().starts_with("ConfigError: surface.kind"), "{e}");
        let e = load(&format!("{MINIMAL}colour = 3\n")).unwrap_err();
        assert!(e.to_string().contains("study.colour"), "{e}");
        let e = load(&format!("{MINIMAL}[extra]\n")).unwrap_err();
        assert!(e.to_string().contains("extra"), "{e}");
        let e = load("[surface]\nkind = \"circle\"\n[study]\nlevels = [16, 8]\n").unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
    }

    #[test]
    fn canonical_form_tracks_semantics() {
        let a = load(MINIMAL).unwrap();
        let explicit = load(&format!("{MINIMAL}degree = 1\n# comment\n[output]\ndir = \"elsewhere\"\n")).unwrap();
        assert_eq!(a.canonical(), explicit.canonical());
        let b = load(&format!("{MINIMAL}degree = 2\n")).unwrap();
        assert_ne!(a.canonical(), b.canonical());
    }

    #[test]
    fn overrides() {
        let mut t = parse_table(MINIMAL).unwrap();
        apply_overrides(&mut t, &["study.degree=2".into(), "surface.kind=sphere".into(), "study.levels=[1,2]".into()])
            .unwrap();
        let c = CliConfig::from_table(&t).unwrap();
        assert_eq!(c.study.degree, 2);
        assert_eq!(c.study.surface.kind(), SurfaceKind::Sphere);
        assert_eq!(c.study.levels, vec![1, 2]);
        assert!(apply_overrides(&mut t, &["nokey".into()]).is_err());
    }
}
