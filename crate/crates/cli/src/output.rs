//! Sweep tables, trajectories and plot scripts.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use qdcavity_core::dynamics::FIELD_NAMES;
use qdcavity_core::{SweepGrid, SweepRecord, Trajectory, G2};

use crate::config::OutputFormat;

pub const SWEEP_COLUMNS: [&str; 11] = [
    "gamma_cav_per_ps",
    "cavity_lifetime_ps",
    "g_over_omega_r0",
    "pump_per_ps",
    "include_doublets",
    "include_inversion_term",
    "n_photon",
    "two_photon",
    "g2_zero",
    "output_rate_per_ps",
    "converged",
];

pub const UNDEFINED: &str = "undefined";

/// Shortest round-trip text: positional for moderate magnitudes, scientific
/// otherwise.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e6).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn format_g2(g2: G2) -> String {
    match g2 {
        G2::Value(v) => format_number(v),
        G2::Undefined => UNDEFINED.to_string(),
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum Cell {
    Number(f64),
    Text(&'static str),
}

/// One sweep row in column order.
#[derive(Serialize)]
struct Row {
    gamma_cav_per_ps: f64,
    cavity_lifetime_ps: f64,
    g_over_omega_r0: f64,
    pump_per_ps: f64,
    include_doublets: bool,
    include_inversion_term: bool,
    n_photon: Option<f64>,
    two_photon: Option<f64>,
    g2_zero: Option<Cell>,
    output_rate_per_ps: Option<f64>,
    converged: bool,
}

impl Row {
    fn of(r: &SweepRecord) -> Self {
        let o = r.observables.as_ref();
        Row {
            gamma_cav_per_ps: r.gamma_cav,
            cavity_lifetime_ps: r.cavity_lifetime,
            g_over_omega_r0: r.g_over_omega_r0,
            pump_per_ps: r.pump,
            include_doublets: r.toggles.include_doublets(),
            include_inversion_term: r.toggles.include_inversion_term(),
            n_photon: o.map(|o| o.photon_number),
            two_photon: o.map(|o| o.two_photon),
            g2_zero: o.map(|o| match o.g2_zero {
                G2::Value(v) => Cell::Number(v),
                G2::Undefined => Cell::Text(UNDEFINED),
            }),
            output_rate_per_ps: o.map(|o| o.output_rate),
            converged: r.converged,
        }
    }

    fn csv_fields(&self) -> [String; 11] {
        let num = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), format_number);
        [
            format_number(self.gamma_cav_per_ps),
            format_number(self.cavity_lifetime_ps),
            format_number(self.g_over_omega_r0),
            format_number(self.pump_per_ps),
            self.include_doublets.to_string(),
            self.include_inversion_term.to_string(),
            num(self.n_photon),
            num(self.two_photon),
            match &self.g2_zero {
                None => "nan".to_string(),
                Some(Cell::Number(v)) => format_number(*v),
                Some(Cell::Text(t)) => t.to_string(),
            },
            num(self.output_rate_per_ps),
            self.converged.to_string(),
        ]
    }
}

pub fn write_sweep<W: Write>(out: W, records: &[SweepRecord], format: OutputFormat) -> io::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(SWEEP_COLUMNS)?;
            for r in records {
                w.write_record(Row::of(r).csv_fields())?;
            }
            w.flush()
        }
        OutputFormat::JsonLines => {
            let mut out = out;
            for r in records {
                serde_json::to_writer(&mut out, &Row::of(r))?;
                out.write_all(b"\n")?;
            }
            out.flush()
        }
    }
}

pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory, format: OutputFormat) -> io::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(std::iter::once("time_ps").chain(FIELD_NAMES))?;
            for (t, s) in traj.times.iter().zip(&traj.states) {
                w.write_record(std::iter::once(*t).chain(s.to_array()).map(format_number))?;
            }
            w.flush()
        }
        OutputFormat::JsonLines => {
            let mut out = out;
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let mut obj = serde_json::Map::new();
                obj.insert("time_ps".into(), (*t).into());
                for (name, v) in FIELD_NAMES.iter().zip(s.to_array()) {
                    obj.insert((*name).into(), v.into());
                }
                serde_json::to_writer(&mut out, &obj)?;
                out.write_all(b"\n")?;
            }
            out.flush()
        }
    }
}

/// `<path>.log`.
pub fn log_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

/// `<path without extension>.gp`.
pub fn plot_script_path(path: &Path) -> PathBuf {
    path.with_extension("gp")
}

fn column(name: &str) -> usize {
    SWEEP_COLUMNS.iter().position(|c| *c == name).expect("known column") + 1
}

/// A gnuplot script plotting output rate and g²(0) against the axis that
/// varies most, one curve per remaining (g, pump, toggles) combination.
pub fn plot_script(data_file: &str, grid: &SweepGrid) -> String {
    let (x_name, x_label, curve_axes) = if grid.gamma_cav_values.len() >= grid.pump_values.len() {
        ("cavity_lifetime_ps", "cavity lifetime (ps)", (&grid.g_values, &grid.pump_values, "pump_per_ps"))
    } else {
        ("pump_per_ps", "pump rate (1/ps)", (&grid.g_values, &grid.gamma_cav_values, "gamma_cav_per_ps"))
    };
    let (g_values, other_values, other_name) = curve_axes;
    let x = column(x_name);

    let mut curves = Vec::new();
    for g in g_values {
        for other in other_values {
            for toggles in &grid.toggle_variants {
                let inversion = toggles.include_inversion_term();
                let doublets = toggles.include_doublets();
                let filter = format!(
                    "${} == {g} && ${} == {other} && strcol({}) eq \"{doublets}\" && strcol({}) eq \"{inversion}\"",
                    column("g_over_omega_r0"),
                    column(other_name),
                    column("include_doublets"),
                    column("include_inversion_term"),
                );
                let dash = if inversion { 1 } else { 2 };
                curves.push((filter, format!("g = {g} {other_name} = {other} {}", toggles.label()), dash));
            }
        }
    }
    let panel = |y: &str| {
        curves
            .iter()
            .map(|(filter, title, dash)| {
                format!(
                    "'{data_file}' using {x}:(({filter}) ? column({}) : NaN) with linespoints dt {dash} title '{title}'",
                    column(y)
                )
            })
            .collect::<Vec<_>>()
            .join(", \\\n     ")
    };
    format!(
        "set datafile separator ','\n\
         set datafile missing 'nan'\n\
         set logscale x\n\
         set xlabel '{x_label}'\n\
         set key outside right\n\
         set terminal pngcairo size 1400,500\n\
         set output '{data_file}.png'\n\
         set multiplot layout 1,2\n\
         set ylabel 'output rate (1/ps)'\n\
         plot {}\n\
         set ylabel 'g2(0)'\n\
         plot {}\n\
         unset multiplot\n",
        panel("output_rate_per_ps"),
        panel("g2_zero"),
    )
}
