//! CSV writers and run manifests.
//!
//! Floating-point values are written with 17 significant digits so that a
//! read-back reproduces them exactly; rows come out in a fixed order.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::stationary::{BoundaryDensity, StationaryResult};
use crate::trace::Trace;
use crate::verify::{CouplingReport, DoeblinReport, HarrisReport};

pub const TRACE_HEADER: [&str; 5] = ["t", "x", "pop_rate", "mass_in_window", "weighted_norm"];
pub const RASTER_HEADER: [&str; 2] = ["neuron_id", "spike_time"];
pub const DENSITY_HEADER: [&str; 5] = ["a_lo", "a_hi", "m_lo", "m_hi", "density"];
pub const BOUNDARY_HEADER: [&str; 3] = ["m", "u", "weight"];

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

/// A CSV file under construction; every row must match the header width.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        writer
            .write_record(header)
            .map_err(|e| Error::csv(path, e))?;
        Ok(CsvOut {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| Error::csv(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let mut out = CsvOut::create(path, &TRACE_HEADER)?;
    for k in 0..trace.len() {
        out.row([
            fmt_f64(trace.times[k]),
            fmt_f64(trace.x_values[k]),
            fmt_f64(trace.pop_rate[k]),
            fmt_f64(trace.mass[k]),
            fmt_f64(trace.weighted_norm[k]),
        ])?;
    }
    out.finish()
}

pub fn write_raster(path: &Path, raster: &[(usize, f64)]) -> Result<()> {
    let mut out = CsvOut::create(path, &RASTER_HEADER)?;
    for &(id, t) in raster {
        out.row([id.to_string(), fmt_f64(t)])?;
    }
    out.finish()
}

/// One row per cell, memory-major then age.
pub fn write_density(path: &Path, rho: &DensityGrid) -> Result<()> {
    let mut out = CsvOut::create(path, &DENSITY_HEADER)?;
    let grid = &rho.grid;
    for j in 0..grid.n_m {
        for i in 0..grid.n_a {
            out.row([
                fmt_f64(grid.a_face(i)),
                fmt_f64(grid.a_face(i + 1)),
                fmt_f64(rho.m_faces[j]),
                fmt_f64(rho.m_faces[j + 1]),
                fmt_f64(rho.values[rho.idx(i, j)]),
            ])?;
        }
    }
    out.finish()
}

pub fn write_boundary(path: &Path, u: &BoundaryDensity) -> Result<()> {
    let mut out = CsvOut::create(path, &BOUNDARY_HEADER)?;
    for ((m, v), w) in u.m_nodes.iter().zip(&u.u_values).zip(&u.weights) {
        out.row([fmt_f64(*m), fmt_f64(*v), fmt_f64(*w)])?;
    }
    out.finish()
}

/// Summary of a stationary solve as `quantity,value` rows.
pub fn write_stationary_report(path: &Path, r: &StationaryResult, bound_tol: f64) -> Result<()> {
    let mut out = CsvOut::create(path, &["quantity", "value"])?;
    let rows = [
        ("x_inf", fmt_f64(r.x_inf)),
        ("rate", fmt_f64(r.rate)),
        ("iterations", r.iterations.to_string()),
        ("converged", r.converged.to_string()),
        ("lift_mass_defect", fmt_f64(r.lift_mass_defect)),
        (
            "final_upsilon_residual",
            fmt_opt(r.upsilon_residuals.last().copied()),
        ),
        (
            "final_phi_residual",
            fmt_opt(r.phi_residuals.last().copied()),
        ),
        ("bounds_passed", r.bounds_hold(bound_tol).to_string()),
    ];
    for (k, v) in rows {
        out.row([k.to_string(), v])?;
    }
    out.finish()
}

pub const STATIONARY_ITERATION_HEADER: [&str; 13] = [
    "iteration",
    "upsilon_residual",
    "phi_residual",
    "mass_defect",
    "pointwise_ratio",
    "first_moment",
    "first_moment_bound",
    "inverse_moment",
    "inverse_moment_bound",
    "upsilon",
    "upsilon_bound",
    "passed",
    "note",
];

/// Residuals and bound checks of every outer iteration.
pub fn write_stationary_iterations(
    path: &Path,
    r: &StationaryResult,
    bound_tol: f64,
) -> Result<()> {
    let mut out = CsvOut::create(path, &STATIONARY_ITERATION_HEADER)?;
    for (k, b) in r.bounds.iter().enumerate() {
        let (inv, inv_bound, note) = match b.inverse_moment {
            Some((v, bound)) => (fmt_f64(v), fmt_f64(bound), ""),
            None => (String::new(), String::new(), "inverse moment check skipped"),
        };
        out.row([
            k.to_string(),
            fmt_opt(r.upsilon_residuals.get(k).copied()),
            fmt_opt(r.phi_residuals.get(k).copied()),
            fmt_f64(b.mass_defect),
            fmt_f64(b.pointwise_ratio),
            fmt_f64(b.first_moment),
            fmt_f64(b.first_moment_bound),
            inv,
            inv_bound,
            fmt_f64(b.upsilon),
            fmt_f64(b.upsilon_bound),
            b.passed(bound_tol).to_string(),
            note.to_string(),
        ])?;
    }
    out.finish()
}

pub fn write_doeblin(dir: &Path, report: &DoeblinReport) -> Result<Vec<PathBuf>> {
    let window_path = dir.join("doeblin_window.csv");
    let w = &report.window;
    let mut out = CsvOut::create(
        &window_path,
        &[
            "r",
            "t",
            "a_bar",
            "m_lower",
            "m_upper",
            "nu_constant",
            "min_infimum",
            "ratio",
            "all_positive",
        ],
    )?;
    out.row([
        fmt_f64(w.r),
        fmt_f64(w.t),
        fmt_f64(w.a_bar),
        fmt_f64(w.m_lower),
        fmt_f64(w.m_upper),
        fmt_f64(w.nu_constant),
        fmt_f64(report.min_infimum),
        fmt_f64(report.ratio),
        report.all_positive.to_string(),
    ])?;
    out.finish()?;
    let probes_path = dir.join("doeblin_probes.csv");
    let mut out = CsvOut::create(&probes_path, &["a0", "m0", "included", "infimum", "ratio"])?;
    for p in &report.probes {
        out.row([
            fmt_f64(p.a0),
            fmt_f64(p.m0),
            p.included.to_string(),
            fmt_f64(p.infimum),
            fmt_f64(p.infimum / w.nu_constant),
        ])?;
    }
    out.finish()?;
    Ok(vec![window_path, probes_path])
}

pub fn write_harris(dir: &Path, report: &HarrisReport) -> Result<Vec<PathBuf>> {
    let fit_path = dir.join("harris_rate.csv");
    let f = &report.fit;
    let mut out = CsvOut::create(
        &fit_path,
        &[
            "rate",
            "prefactor",
            "r_squared",
            "t_start",
            "t_end",
            "points",
            "degenerate",
        ],
    )?;
    out.row([
        fmt_f64(f.rate),
        fmt_f64(f.prefactor),
        fmt_f64(f.r_squared),
        fmt_f64(f.window.0),
        fmt_f64(f.window.1),
        f.points.to_string(),
        f.degenerate.to_string(),
    ])?;
    out.finish()?;
    let series_path = dir.join("harris_distance.csv");
    let mut out = CsvOut::create(&series_path, &["t", "distance"])?;
    for (t, d) in report.times.iter().zip(&report.distances) {
        out.row([fmt_f64(*t), fmt_f64(*d)])?;
    }
    out.finish()?;
    Ok(vec![fit_path, series_path])
}

pub const SWEEP_HEADER: [&str; 11] = [
    "epsilon",
    "regime",
    "x_inf",
    "stationary_converged",
    "rate",
    "r_squared",
    "fit_t_start",
    "fit_t_end",
    "x_peak_to_peak",
    "x_max_abs",
    "final_distance",
];

/// The sweep summary plus one `t, x, distance` series per coupling.
pub fn write_sweep(dir: &Path, reports: &[CouplingReport]) -> Result<Vec<PathBuf>> {
    let summary = dir.join("stability_sweep.csv");
    let mut out = CsvOut::create(&summary, &SWEEP_HEADER)?;
    for r in reports {
        let fit = r.fit.filter(|f| !f.degenerate);
        out.row([
            fmt_f64(r.epsilon),
            r.regime.as_str().to_string(),
            fmt_opt(r.x_inf),
            r.stationary_converged.to_string(),
            fmt_opt(fit.map(|f| f.rate)),
            fmt_opt(fit.map(|f| f.r_squared)),
            fmt_opt(fit.map(|f| f.window.0)),
            fmt_opt(fit.map(|f| f.window.1)),
            fmt_f64(r.x_peak_to_peak),
            fmt_f64(r.x_max_abs),
            fmt_opt(r.final_distance),
        ])?;
    }
    out.finish()?;
    let mut paths = vec![summary];
    for (k, r) in reports.iter().enumerate() {
        let path = dir.join(format!("stability_series_{k}.csv"));
        let mut out = CsvOut::create(&path, &["t", "x", "distance"])?;
        for (n, (t, x)) in r.times.iter().zip(&r.x_values).enumerate() {
            out.row([
                fmt_f64(*t),
                fmt_f64(*x),
                fmt_opt(r.distances.get(n).copied()),
            ])?;
        }
        out.finish()?;
        paths.push(path);
    }
    Ok(paths)
}

/// Everything needed to re-run a command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<String>,
    pub config_hash: Option<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub timestamp: String,
    pub version: String,
    /// Command-line parameters and the parsed configuration.
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Numerical(format!("manifest serialization: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, InitialDatum};

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace(&path, &Trace::default()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,x,pop_rate,mass_in_window,weighted_norm\n");
    }

    #[test]
    fn density_file_reproduces_mass() {
        let grid = GridSpec::uniform(5.0, 20, 3.0, 10);
        let datum = InitialDatum::Product {
            age_mean: 1.0,
            age_sd: 0.5,
            log_m_mean: 0.0,
            log_m_sd: 0.3,
        };
        let rho = datum.discretize(&grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("density.csv");
        write_density(&path, &rho).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        assert_eq!(reader.headers().unwrap(), DENSITY_HEADER.to_vec());
        let mass: f64 = reader
            .records()
            .map(|r| {
                let v: Vec<f64> = r.unwrap().iter().map(|s| s.parse().unwrap()).collect();
                (v[1] - v[0]) * (v[3] - v[2]) * v[4]
            })
            .sum();
        assert!((mass - rho.mass()).abs() < 1e-12);
    }
}
