use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qdcavity_core::oracle::{oracle_steady_observables_auto, OracleError, N_MAX_CAP};
use qdcavity_core::observables::PHOTON_FLOOR;
use qdcavity_core::solver::{integrate, steady_state, SolverError};
use qdcavity_core::{observables_of, run_sweep_parallel, DynamicState, Observables, G2};

use crate::config::{OutputFormat, RunConfig};
use crate::output::{format_g2, format_number, log_path, plot_script, plot_script_path, write_sweep, write_trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_DISAGREEMENT: i32 = 3;
pub const EXIT_TRUNCATION: i32 = 4;

/// Options shared by every subcommand, after merging flags with the file.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config_path: PathBuf,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub trajectory: bool,
    pub format: Option<OutputFormat>,
}

pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

type Outcome = Result<i32, Failure>;

struct Context {
    cfg: RunConfig,
    out: Option<PathBuf>,
    format: OutputFormat,
}

fn load(inv: &Invocation) -> Result<Context, Failure> {
    let cfg = RunConfig::load(&inv.config_path)
        .map_err(|e| Failure::config(format!("{}: {e}", inv.config_path.display())))?;
    let out = inv.out.clone().or_else(|| cfg.output.path.clone());
    let format = inv.format.unwrap_or(cfg.output.format);
    Ok(Context { cfg, out, format })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| Failure::config(format!("cannot create {}: {e}", parent.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn write_log(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    if let Some(path) = out {
        let mut f = create(&log_path(path))?;
        f.write_all(text.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Failure::config(format!("cannot write log: {e}")))?;
    }
    Ok(())
}

fn aligned(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:>width$}={v}\n")).collect()
}

fn observable_rows(o: &Observables) -> Vec<(&'static str, String)> {
    vec![
        ("photon_number", format_number(o.photon_number)),
        ("two_photon", format_number(o.two_photon)),
        ("g2_zero", format_g2(o.g2_zero)),
        ("output_rate_per_ps", format_number(o.output_rate)),
    ]
}

pub fn simulate(inv: &Invocation, stdout: &mut dyn Write) -> Outcome {
    let ctx = load(inv)?;
    let params = ctx.cfg.model.params();
    let toggles = ctx.cfg.toggles;
    let integration = &ctx.cfg.integration;
    if inv.trajectory && ctx.out.is_none() {
        return Err(Failure::config("--trajectory needs an output path (--out or [output] path)"));
    }

    let (state, mut rows, end_time, code) = match steady_state(&params, toggles, integration) {
        Ok(ss) => (
            ss.state,
            vec![
                ("converged", "true".to_string()),
                ("residual", format_number(ss.residual)),
                ("steady_time_ps", ss.time.to_string()),
            ],
            ss.time + integration.steady_window,
            EXIT_OK,
        ),
        Err(SolverError::NotConverged { state, residual, max_time }) => (
            state,
            vec![("converged", "false".to_string()), ("residual", format_number(residual))],
            max_time,
            EXIT_NOT_CONVERGED,
        ),
        Err(e @ (SolverError::InvalidParams(_) | SolverError::InvalidConfig(_))) => {
            return Err(Failure::config(e.to_string()))
        }
        Err(e) => {
            return Err(Failure {
                code: EXIT_NOT_CONVERGED,
                message: e.to_string(),
            })
        }
    };
    let mut all = observable_rows(&observables_of(&state, &params));
    all.append(&mut rows);
    let text = aligned(&all);
    let _ = stdout.write_all(text.as_bytes());

    if inv.trajectory {
        let path = ctx.out.as_ref().expect("checked above");
        let cfg = qdcavity_core::IntegrationConfig {
            max_time: end_time,
            ..integration.clone()
        };
        let traj = integrate(&DynamicState::vacuum(), &params, toggles, &cfg).map_err(|e| Failure {
            code: EXIT_NOT_CONVERGED,
            message: e.to_string(),
        })?;
        write_trajectory(create(path)?, &traj, ctx.format)
            .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
        let _ = writeln!(stdout, "trajectory: {} samples written to {}", traj.times.len(), path.display());
    }
    write_log(&ctx.out, &format!("simulate {}\n{text}", inv.config_path.display()))?;
    Ok(code)
}

pub fn sweep(inv: &Invocation, stdout: &mut dyn Write) -> Outcome {
    let ctx = load(inv)?;
    let spec = ctx
        .cfg
        .grid
        .as_ref()
        .ok_or_else(|| Failure::config("configuration has no [grid] section"))?;
    let path = ctx
        .out
        .clone()
        .ok_or_else(|| Failure::config("sweep needs an output path (--out or [output] path)"))?;
    let grid = spec.sweep_grid(ctx.cfg.model.reference);
    let workers = inv
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let records = run_sweep_parallel(&grid, &ctx.cfg.model.params(), &ctx.cfg.integration, workers)
        .map_err(|e| Failure::config(e.to_string()))?;

    write_sweep(create(&path)?, &records, ctx.format)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
    if ctx.format == OutputFormat::Csv {
        let data_file = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let mut f = create(&plot_script_path(&path))?;
        f.write_all(plot_script(&data_file, &grid).as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Failure::config(format!("cannot write plot script: {e}")))?;
    }

    let failed: Vec<_> = records.iter().enumerate().filter(|(_, r)| !r.converged).collect();
    let mut log = format!(
        "sweep {}\npoints={}\nnot_converged={}\nworkers={workers}\n",
        inv.config_path.display(),
        records.len(),
        failed.len()
    );
    for (k, r) in &failed {
        log += &format!("point {k}: {}\n", r.error.as_deref().unwrap_or("not converged"));
    }
    write_log(&Some(path.clone()), &log)?;
    let _ = writeln!(
        stdout,
        "wrote {} records ({} not converged) to {}",
        records.len(),
        failed.len(),
        path.display()
    );
    Ok(EXIT_OK)
}

/// |value − reference| / |reference|; zero when both are below the photon
/// floor and infinite when only the reference is.
pub fn relative_difference(value: f64, reference: f64) -> f64 {
    if value.abs().max(reference.abs()) <= PHOTON_FLOOR {
        0.0
    } else if reference.abs() <= PHOTON_FLOOR {
        f64::INFINITY
    } else {
        (value - reference).abs() / reference.abs()
    }
}

fn g2_difference(a: G2, b: G2) -> f64 {
    match (a, b) {
        (G2::Value(x), G2::Value(y)) => relative_difference(x, y),
        (G2::Undefined, G2::Undefined) => 0.0,
        _ => f64::INFINITY,
    }
}

pub fn oracle_compare(inv: &Invocation, stdout: &mut dyn Write) -> Outcome {
    let ctx = load(inv)?;
    let params = ctx.cfg.model.params();
    let band = ctx.cfg.oracle.agreement_band;

    let cluster = match steady_state(&params, ctx.cfg.toggles, &ctx.cfg.integration) {
        Ok(ss) => observables_of(&ss.state, &params),
        Err(e) => {
            return Err(Failure {
                code: EXIT_NOT_CONVERGED,
                message: format!("cluster expansion: {e}"),
            })
        }
    };
    let (exact, space) = match oracle_steady_observables_auto(&params, ctx.cfg.oracle.n_max) {
        Ok(r) => r,
        Err(e @ OracleError::TruncationTooSmall { .. }) => {
            return Err(Failure {
                code: EXIT_TRUNCATION,
                message: format!("oracle: {e} (cap n_max = {N_MAX_CAP})"),
            })
        }
        Err(e @ (OracleError::InvalidParams(_) | OracleError::InvalidTruncation(_))) => {
            return Err(Failure::config(e.to_string()))
        }
        Err(e) => {
            return Err(Failure {
                code: EXIT_DISAGREEMENT,
                message: format!("oracle: {e}"),
            })
        }
    };
    let oracle = exact.observables;

    let rows = [
        (
            "photon_number",
            format_number(cluster.photon_number),
            format_number(oracle.photon_number),
            relative_difference(cluster.photon_number, oracle.photon_number),
        ),
        (
            "two_photon",
            format_number(cluster.two_photon),
            format_number(oracle.two_photon),
            relative_difference(cluster.two_photon, oracle.two_photon),
        ),
        (
            "g2_zero",
            format_g2(cluster.g2_zero),
            format_g2(oracle.g2_zero),
            g2_difference(cluster.g2_zero, oracle.g2_zero),
        ),
        (
            "output_rate_per_ps",
            format_number(cluster.output_rate),
            format_number(oracle.output_rate),
            relative_difference(cluster.output_rate, oracle.output_rate),
        ),
    ];
    let mut table = format!("{:<20} {:>24} {:>24} {:>14}\n", "quantity", "cluster", "oracle", "rel_diff");
    for (name, a, b, d) in &rows {
        table += &format!("{name:<20} {a:>24} {b:>24} {d:>14.6e}\n");
    }
    let agree = rows[0].3 <= band;
    table += &format!(
        "n_max={} agreement_band={band} verdict={}\n",
        space.n_max(),
        if agree { "agree" } else { "disagree" }
    );
    let _ = stdout.write_all(table.as_bytes());
    write_log(&ctx.out, &format!("oracle-compare {}\n{table}", inv.config_path.display()))?;
    Ok(if agree { EXIT_OK } else { EXIT_DISAGREEMENT })
}
