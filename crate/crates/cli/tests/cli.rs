use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qdcavity_cli::config::RunConfig;
use qdcavity_cli::output::SWEEP_COLUMNS;

fn qdcavity(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdcavity"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn qdcavity")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn shipped_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "cfg"))
        .collect();
    v.sort();
    v
}

const SIMPLE: &str = "[model]\npreset = \"paperlike-defaults\"\ng_over_omega_r0 = 2.0\ngamma_c_per_ps = 0.5\npump_per_ps = 1.0\n";

const ONE_POINT: &str = r#"[model]
preset = "paperlike-defaults"
g_over_omega_r0 = 0.2
cavity_lifetime_ps = 1.0
pump_per_ps = 1e5

[grid]
cavity_lifetime_ps = [2.0]
g_over_omega_r0 = [0.2]
pump_per_ps = [1e5]
toggles = ["full"]
"#;

const SMALL_GRID: &str = r#"[model]
preset = "paperlike-defaults"
g_over_omega_r0 = 0.2
cavity_lifetime_ps = 1.0
pump_per_ps = 1e5

[grid]
cavity_lifetime_ps = { start = 0.5, stop = 5.0, count = 4, spacing = "log" }
g_over_omega_r0 = [0.1, 0.2]
pump_per_ps = [1.0, 1e5]
toggles = ["full", "no-inversion"]
"#;

#[test]
fn simulate_prints_observables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", SIMPLE);
    let out = qdcavity(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    for key in ["photon_number=", "g2_zero=", "output_rate_per_ps=", "converged=true"] {
        assert!(stdout.contains(key), "{key} missing from\n{stdout}");
    }
}

#[test]
fn simulate_writes_trajectory_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", SIMPLE);
    let out = qdcavity(
        &["simulate", "--config", cfg.to_str().unwrap(), "--out", "traj/run.csv", "--trajectory"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let traj = fs::read_to_string(dir.path().join("traj/run.csv")).unwrap();
    let mut lines = traj.lines();
    assert!(lines.next().unwrap().starts_with("time_ps,n_e,n_h,n_p"));
    assert!(lines.count() > 10);
    assert!(dir.path().join("traj/run.csv.log").exists());
}

#[test]
fn invalid_rate_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.cfg",
        "[model]\npreset = \"paperlike-defaults\"\ng_over_omega_r0 = 1.0\n\ngamma_c_per_ps = 0.0\npump_per_ps = 1.0\n",
    );
    let out = qdcavity(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = text(&out.stderr);
    assert!(stderr.contains("gamma_c"), "{stderr}");
    assert!(stderr.contains("line 5"), "{stderr}");
}

#[test]
fn unknown_key_and_missing_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.cfg", &SIMPLE.replace("pump_per_ps", "pmp_per_ps"));
    let out = qdcavity(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("pmp_per_ps"));

    let out = qdcavity(&["simulate", "--config", "absent.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = qdcavity(&["sweep", "--config", cfg.to_str().unwrap(), "--workers", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn short_time_limit_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.cfg", &format!("{SIMPLE}\n[integration]\nmax_time_ps = 0.5\n"));
    let out = qdcavity(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("converged=false"), "{stdout}");
    assert!(stdout.contains("residual="), "{stdout}");
}

#[test]
fn one_point_grid_gives_header_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "one.cfg", ONE_POINT);
    let out = qdcavity(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "one.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], SWEEP_COLUMNS.join(","));
    assert!(lines[1].starts_with("0.5,2,0.2,100000,true,true,"), "{}", lines[1]);
    assert!(lines[1].ends_with(",true"));
}

#[test]
fn sweep_writes_only_output_log_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.cfg", SMALL_GRID);
    let out = qdcavity(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "res/grid.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let mut files: Vec<_> = fs::read_dir(dir.path().join("res"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["grid.csv", "grid.csv.log", "grid.gp"]);
    let top: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(top.len(), 2);
    assert_eq!(fs::read_to_string(dir.path().join("res/grid.csv")).unwrap().lines().count(), 33);
}

#[test]
fn sweep_is_reproducible_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.cfg", SMALL_GRID);
    let runs: Vec<Vec<u8>> = [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "3")]
        .iter()
        .map(|(name, workers)| {
            let out = qdcavity(
                &["sweep", "--config", cfg.to_str().unwrap(), "--out", name, "--workers", workers],
                dir.path(),
            );
            assert_eq!(out.status.code(), Some(0));
            fs::read(dir.path().join(name)).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn json_lines_carry_the_csv_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.cfg", SMALL_GRID);
    let out = qdcavity(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", "grid.jsonl", "--format", "jsonl"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let body = fs::read_to_string(dir.path().join("grid.jsonl")).unwrap();
    assert_eq!(body.lines().count(), 32);
    let mut expected = SWEEP_COLUMNS.to_vec();
    expected.sort();
    for line in body.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, expected);
    }
}

#[test]
fn oracle_compare_decoupled_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "zero.cfg",
        "[model]\npreset = \"paperlike-defaults\"\ng_per_ps = 0.0\ngamma_c_per_ps = 0.5\npump_per_ps = 1.0\n\n[oracle]\nn_max = 4\nagreement_band = 1e-6\n",
    );
    let out = qdcavity(&["oracle-compare", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("verdict=agree"));
}

#[test]
fn oracle_compare_strong_coupling_disagrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "strong.cfg",
        "[model]\npreset = \"paperlike-defaults\"\ng_per_ps = 0.5\ngamma_c_per_ps = 0.1\npump_per_ps = 0.3\n\n[oracle]\nn_max = 16\nagreement_band = 0.01\n",
    );
    let out = qdcavity(&["oracle-compare", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let stdout = text(&out.stdout);
    for row in ["photon_number", "two_photon", "g2_zero", "output_rate_per_ps", "verdict=disagree"] {
        assert!(stdout.contains(row), "{row} missing from\n{stdout}");
    }
}

#[test]
fn oracle_compare_reports_truncation_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bright.cfg",
        "[model]\npreset = \"paperlike-defaults\"\ng_per_ps = 2.0\ngamma_c_per_ps = 0.002\npump_per_ps = 1.0\n\n[oracle]\nn_max = 64\n",
    );
    let out = qdcavity(&["oracle-compare", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(text(&out.stderr).contains("truncation"));
}

#[test]
fn shipped_configs_load_and_round_trip() {
    let configs = shipped_configs();
    assert!(configs.len() >= 6);
    for path in configs {
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
    }
}

#[test]
fn shipped_weak_coupling_config_agrees() {
    let path = shipped_configs()
        .into_iter()
        .find(|p| p.file_name().is_some_and(|n| n == "weak-coupling.cfg"))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = qdcavity(
        &["oracle-compare", "--config", path.to_str().unwrap(), "--out", "weak.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains("verdict=agree"));
    assert!(dir.path().join("weak.txt.log").exists());
}

#[test]
fn help_exits_cleanly_and_bad_flags_do_not() {
    let dir = tempfile::tempdir().unwrap();
    let out = qdcavity(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("oracle-compare"));
    let out = qdcavity(&["simulate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
