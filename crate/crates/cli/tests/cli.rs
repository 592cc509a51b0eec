use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_CIRCLE: &str = r#"
[surface]
kind = "circle"

[study]
levels = [8, 16]
pq = [[2.0, 2.0], [4.0, 2.0]]
profiles = ["bump", "osc-seed42"]
"#;

fn esfem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esfem"))
        .current_dir(dir)
        .env_remove("ESFEM_OUTPUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn manifest(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("manifest.toml")).unwrap().parse().unwrap()
}

#[test]
fn maxreg_happy_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "circle.cfg", SMALL_CIRCLE);
    let out = esfem(tmp.path(), &["maxreg", "--config", &cfg, "--output-dir", "run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    let csv = fs::read_to_string(run.join("maxreg_bump.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("level,h,dt,p,q,norm_dtu,norm_lapu,norm_f,ratio,richardson_ok"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    assert!(run.join("maxreg_osc-seed42.csv").exists());
    let summary = fs::read_to_string(run.join("summary.txt")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
    let m = manifest(&run);
    assert_eq!(m["status"].as_str(), Some("complete"));
    assert_eq!(m["command"].as_str(), Some("maxreg"));
    assert_eq!(m["artifacts"].as_table().unwrap().len(), 3);
    assert!(m["inputs"]["config_sha256"].as_str().is_some());
    assert!(fs::read_dir(&run).unwrap().all(|e| !e.unwrap().path().to_string_lossy().ends_with(".partial")));
}

#[test]
fn missing_surface_kind_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "[study]\nlevels = [8, 16]\n");
    let out = esfem(tmp.path(), &["maxreg", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ConfigError: surface.kind"));
    let cfg = write_config(tmp.path(), "typo.cfg", &format!("{SMALL_CIRCLE}levles = 3\n"));
    let out = esfem(tmp.path(), &["maxreg", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("study.levles"));
}

#[test]
fn runtime_failures_exit_with_a_category() {
    let tmp = tempfile::tempdir().unwrap();
    let out =
        esfem(tmp.path(), &["convergence", "--surface", "ellipsoid_flow", "--levels", "1,2", "--output-dir", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("UnsupportedSurface:"));
    assert_eq!(manifest(&tmp.path().join("o"))["status"].as_str(), Some("incomplete"));
}

#[test]
fn mesh_command_writes_icosphere() {
    let tmp = tempfile::tempdir().unwrap();
    let out =
        esfem(tmp.path(), &["mesh", "--surface", "sphere", "--levels", "2", "--degree", "1", "--output-dir", "m"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let vtk = fs::read_to_string(tmp.path().join("m/mesh_2.vtk")).unwrap();
    let cells = vtk.lines().find(|l| l.starts_with("POLYGONS")).unwrap();
    assert_eq!(cells.split_whitespace().nth(1), Some("320"));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_esfem"))
        .current_dir(tmp.path())
        .env("ESFEM_OUTPUT_DIR", "from_env")
        .args(["mesh", "--surface", "circle", "--levels", "8"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("from_env/mesh_8.vtk").exists());
}

#[test]
fn worker_count_does_not_change_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "circle.cfg", SMALL_CIRCLE);
    for (workers, dir) in [("1", "w1"), ("8", "w8")] {
        let out = esfem(tmp.path(), &["maxreg", "--config", &cfg, "--workers", workers, "--output-dir", dir]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["maxreg_bump.csv", "maxreg_osc-seed42.csv", "summary.txt", "manifest.toml"] {
        let a = fs::read(tmp.path().join("w1").join(name)).unwrap();
        let b = fs::read(tmp.path().join("w8").join(name)).unwrap();
        assert!(a == b, "{name} differs between worker counts");
    }
}

#[test]
fn config_hash_tracks_semantic_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let hash = |name: &str, text: &str, extra: &[&str]| {
        let cfg = write_config(tmp.path(), &format!("{name}.cfg"), text);
        let mut args = vec!["mesh", "--config", cfg.as_str(), "--output-dir", name];
        args.extend_from_slice(extra);
        let out = esfem(tmp.path(), &args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        manifest(&tmp.path().join(name))["config_hash"].as_str().unwrap().to_string()
    };
    let base = hash("a", SMALL_CIRCLE, &[]);
    let reformatted =
        "# same study\n[study]\nprofiles = [\"bump\",\"osc-seed42\"]\npq=[[2,2],[4,2]]\nlevels=[8,16]\ndegree = 1\n\
                       [surface]\nkind=\"circle\"\nparams = [1.0]\n[output]\ndir = \"elsewhere\"\n";
    assert_eq!(base, hash("b", reformatted, &[]));
    assert_eq!(base, hash("c", SMALL_CIRCLE, &["--workers", "2"]));
    assert_ne!(base, hash("d", SMALL_CIRCLE, &["--set", "study.seed=1"]));
    assert_ne!(base, hash("e", SMALL_CIRCLE, &["--set", "time.c=0.25"]));
    assert_ne!(base, hash("f", &SMALL_CIRCLE.replace("levels = [8, 16]", "levels = [8, 32]"), &[]));
    assert_ne!(base, hash("g", SMALL_CIRCLE, &["--set", "green.sources=4"]));
}

#[test]
fn check_mode_exits_3_on_failed_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "convergence",
        "--surface",
        "circle",
        "--levels",
        "8,16,32",
        "--degree",
        "2",
        "--set",
        "study.integrator=implicit-euler",
        "--set",
        "time.dt_max=0.5",
        "--set",
        "time.c=100",
    ];
    let out = esfem(tmp.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut checked = args.to_vec();
    checked.push("--check");
    let out = esfem(tmp.path(), &checked);
    assert_eq!(out.status.code(), Some(3));
    let summary = fs::read_to_string(tmp.path().join("out/summary.txt")).unwrap();
    assert!(summary.starts_with("FAIL fitted order"), "{summary}");
}
