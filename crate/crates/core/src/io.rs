//! Deterministic CSV input/output: spectral fields, flow maps, energy logs,
//! and convergence reports.
//!
//! Every writer is atomic (write to a temporary file in the target directory,
//! then rename), emits floats at 17 significant digits so `f64` values
//! round-trip exactly, orders rows canonically, and starts with `#`-comment
//! lines carrying the library version and a caller-supplied configuration
//! echo. Nothing time- or host-dependent is written, so identical data yields
//! identical bytes; the one exception is the wall-time column of report
//! files, which records a measurement rather than a derived quantity.

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::flow::FlowMap;
use crate::grid::FrequencyGrid;
use crate::harness::ConvergenceReport;
use crate::integrate::Trajectory;
use crate::real::Real;
use num_complex::Complex;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Largest relative Hermitian asymmetry accepted when reading a field.
const READ_HERMITIAN_TOL: f64 = 1e-10;

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn push_comments(out: &mut String, comments: &[String]) {
    let _ = writeln!(out, "# epdiff-core {}", env!("CARGO_PKG_VERSION"));
    for line in comments {
        let _ = writeln!(out, "# {line}");
    }
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a spectral field as CSV with columns `xi_1,…,xi_d,component,re,im`,
/// one row per (component, mode) in canonical order: components outer, modes
/// in grid order.
pub fn write_field_csv<T: Real>(
    path: &Path,
    field: &SpectralField<T>,
    comments: &[String],
) -> Result<()> {
    let grid = field.grid();
    let d = grid.dim();
    let mut out = String::new();
    push_comments(&mut out, comments);
    for j in 1..=d {
        let _ = write!(out, "xi_{j},");
    }
    out.push_str("component,re,im\n");
    for c in 0..field.ncomp() {
        let plane = field.comp(c);
        for (idx, xi) in grid.modes() {
            for &x in xi.iter().take(d) {
                let _ = write!(out, "{x},");
            }
            let z = plane[idx];
            let _ = writeln!(
                out,
                "{c},{},{}",
                fmt_float(z.re.to_f64().unwrap_or(f64::NAN)),
                fmt_float(z.im.to_f64().unwrap_or(f64::NAN))
            );
        }
    }
    write_atomic(path, &out)
}

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::MalformedCsv {
        file: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a field CSV written by [`write_field_csv`] (or by hand in the same
/// format). The grid cutoff is inferred from the largest mode present; the
/// enumeration must be complete and duplicate-free, and the result must be
/// Hermitian-symmetric to a relative drift of 1e-10.
pub fn read_field_csv<T: Real>(path: &Path) -> Result<SpectralField<T>> {
    let text = std::fs::read_to_string(path)?;
    let mut header: Option<(usize, usize)> = None; // (d, physical line)
    let mut rows: Vec<(usize, Vec<i64>, usize, f64, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match header {
            None => {
                // Header row: xi_1,…,xi_d,component,re,im.
                let n = fields.len();
                if n < 4 || fields[n - 3] != "component" || fields[n - 2] != "re"
                    || fields[n - 1] != "im"
                {
                    return Err(malformed(
                        path,
                        lineno,
                        "expected header xi_1,…,xi_d,component,re,im",
                    ));
                }
                let d = n - 3;
                if !(1..=3).contains(&d) {
                    return Err(malformed(path, lineno, format!("{d} mode columns")));
                }
                for (j, name) in fields.iter().take(d).enumerate() {
                    if *name != format!("xi_{}", j + 1) {
                        return Err(malformed(
                            path,
                            lineno,
                            format!("mode column {} named {name}", j + 1),
                        ));
                    }
                }
                header = Some((d, lineno));
            }
            Some((d, _)) => {
                if fields.len() != d + 3 {
                    return Err(malformed(
                        path,
                        lineno,
                        format!("expected {} columns, found {}", d + 3, fields.len()),
                    ));
                }
                let mut xi = Vec::with_capacity(d);
                for f in &fields[..d] {
                    xi.push(f.parse::<i64>().map_err(|e| {
                        malformed(path, lineno, format!("bad mode index {f:?}: {e}"))
                    })?);
                }
                let comp = fields[d].parse::<usize>().map_err(|e| {
                    malformed(path, lineno, format!("bad component {:?}: {e}", fields[d]))
                })?;
                let re = fields[d + 1].parse::<f64>().map_err(|e| {
                    malformed(path, lineno, format!("bad value {:?}: {e}", fields[d + 1]))
                })?;
                let im = fields[d + 2].parse::<f64>().map_err(|e| {
                    malformed(path, lineno, format!("bad value {:?}: {e}", fields[d + 2]))
                })?;
                rows.push((lineno, xi, comp, re, im));
            }
        }
    }
    let (d, header_line) = header.ok_or_else(|| malformed(path, 1, "no header row"))?;
    if rows.is_empty() {
        return Err(malformed(path, header_line, "no data rows"));
    }

    let r = rows
        .iter()
        .flat_map(|(_, xi, ..)| xi.iter().map(|x| x.abs()))
        .max()
        .unwrap_or(0);
    let ncomp = rows.iter().map(|&(_, _, c, ..)| c).max().unwrap_or(0) + 1;
    let grid = FrequencyGrid::new(d, r)?;
    let n = grid.len();
    let mut slots: Vec<Option<Complex<T>>> = vec![None; n * ncomp];
    for (lineno, xi, comp, re, im) in rows {
        let idx = grid
            .index_of(&xi)
            .ok_or_else(|| malformed(path, lineno, format!("mode {xi:?} out of range")))?;
        let slot = &mut slots[comp * n + idx];
        if slot.is_some() {
            return Err(malformed(
                path,
                lineno,
                format!("duplicate entry for component {comp}, mode {xi:?}"),
            ));
        }
        *slot = Some(Complex::new(T::of(re), T::of(im)));
    }
    let mut coeffs = Vec::with_capacity(n * ncomp);
    for (i, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(z) => coeffs.push(z),
            None => {
                let comp = i / n;
                let xi = grid.xi(i % n);
                return Err(malformed(
                    path,
                    header_line,
                    format!(
                        "incomplete enumeration: component {comp}, mode {:?} missing",
                        &xi[..d]
                    ),
                ));
            }
        }
    }
    let field = SpectralField::from_coeffs(grid, ncomp, coeffs)?;
    let drift = field.hermitian_drift().to_f64().unwrap_or(f64::NAN);
    if !(drift <= READ_HERMITIAN_TOL) {
        return Err(Error::HermitianDrift {
            drift,
            tol: READ_HERMITIAN_TOL,
        });
    }
    Ok(field)
}

/// Writes a flow map as CSV with columns
/// `n_1,…,n_d,comp,disp,jac_1,…,jac_d`: one row per (node, component `i`)
/// holding the displacement component `i` and the Jacobian row
/// `∂φ_i/∂x_1 … ∂φ_i/∂x_d`, nodes in canonical (row-major) order.
pub fn write_flowmap_csv<T: Real>(
    path: &Path,
    flow: &FlowMap<T>,
    comments: &[String],
) -> Result<()> {
    let d = flow.d;
    let mut out = String::new();
    push_comments(&mut out, comments);
    let _ = writeln!(out, "# t = {}", fmt_float(flow.t.to_f64().unwrap_or(f64::NAN)));
    let _ = writeln!(out, "# grid_per_axis = {}", flow.n);
    for j in 1..=d {
        let _ = write!(out, "n_{j},");
    }
    out.push_str("comp,disp");
    for j in 1..=d {
        let _ = write!(out, ",jac_{j}");
    }
    out.push('\n');
    for p in 0..flow.npts() {
        let node = flow.node(p);
        for i in 0..d {
            for &nj in &node {
                let _ = write!(out, "{nj},");
            }
            let _ = write!(
                out,
                "{i},{}",
                fmt_float(flow.disp[p * d + i].to_f64().unwrap_or(f64::NAN))
            );
            for j in 0..d {
                let _ = write!(
                    out,
                    ",{}",
                    fmt_float(flow.jac[p * d * d + i * d + j].to_f64().unwrap_or(f64::NAN))
                );
            }
            out.push('\n');
        }
    }
    write_atomic(path, &out)
}

/// Writes a trajectory's sampled energies as CSV with columns `t,energy`.
pub fn write_energy_log_csv<T: Real>(
    path: &Path,
    traj: &Trajectory<T>,
    comments: &[String],
) -> Result<()> {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str("t,energy\n");
    for (state, &e) in traj.states.iter().zip(&traj.energy_log) {
        let _ = writeln!(
            out,
            "{},{}",
            fmt_float(state.t.to_f64().unwrap_or(f64::NAN)),
            fmt_float(e.to_f64().unwrap_or(f64::NAN))
        );
    }
    write_atomic(path, &out)
}

/// Writes one convergence report as CSV with the header
/// `R,s,error_Hm,energy_drift,wall_time_s`. Blown-up rows carry NaN in the
/// error and drift columns and are listed in a comment line; a drift that is
/// absolute rather than relative (zero initial energy) is flagged the same
/// way.
pub fn write_report_csv<T: Real>(
    path: &Path,
    report: &ConvergenceReport<T>,
    comments: &[String],
) -> Result<()> {
    let mut out = String::new();
    push_comments(&mut out, comments);
    let _ = writeln!(out, "# s = {}", report.smoothness);
    let _ = writeln!(out, "# reference_R = {}", report.reference_cutoff);
    if report.reference_blew_up {
        out.push_str("# reference_blew_up = true\n");
    }
    let blown: Vec<String> = report
        .rows
        .iter()
        .filter(|r| r.blown_up)
        .map(|r| r.cutoff.to_string())
        .collect();
    if !blown.is_empty() {
        let _ = writeln!(out, "# blown_up_cutoffs = {}", blown.join(","));
    }
    let absolute: Vec<String> = report
        .rows
        .iter()
        .filter(|r| r.drift_absolute)
        .map(|r| r.cutoff.to_string())
        .collect();
    if !absolute.is_empty() {
        let _ = writeln!(out, "# absolute_drift_cutoffs = {}", absolute.join(","));
    }
    match report.fitted_slope {
        Some(slope) => {
            let _ = writeln!(out, "# fitted_slope = {}", fmt_float(slope.to_f64().unwrap_or(f64::NAN)));
        }
        None => out.push_str("# fitted_slope =\n"),
    }
    out.push_str("R,s,error_Hm,energy_drift,wall_time_s\n");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.cutoff,
            row.smoothness,
            fmt_float(row.error_hm.to_f64().unwrap_or(f64::NAN)),
            fmt_float(row.energy_drift.to_f64().unwrap_or(f64::NAN)),
            fmt_float(row.wall_time_s),
        );
    }
    write_atomic(path, &out)
}

/// Writes the study summary as CSV with columns `s,fitted_slope,reference_R,
/// rows`; the slope cell is left empty when no slope could be fitted.
pub fn write_study_summary_csv<T: Real>(
    path: &Path,
    reports: &[ConvergenceReport<T>],
    comments: &[String],
) -> Result<()> {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str("s,fitted_slope,reference_R,rows\n");
    for rep in reports {
        let slope = rep
            .fitted_slope
            .map(|s| fmt_float(s.to_f64().unwrap_or(f64::NAN)))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            rep.smoothness,
            slope,
            rep.reference_cutoff,
            rep.rows.len()
        );
    }
    write_atomic(path, &out)
}

/// Writes plot-ready study data as CSV with columns `s,log2_R,log10_error`,
/// skipping rows without a finite positive error.
pub fn write_plot_data_csv<T: Real>(
    path: &Path,
    reports: &[ConvergenceReport<T>],
    comments: &[String],
) -> Result<()> {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str("s,log2_R,log10_error\n");
    for rep in reports {
        for row in &rep.rows {
            let err = row.error_hm.to_f64().unwrap_or(f64::NAN);
            if !(err > 0.0 && err.is_finite()) {
                continue;
            }
            let _ = writeln!(
                out,
                "{},{},{}",
                rep.smoothness,
                fmt_float((row.cutoff as f64).log2()),
                fmt_float(err.log10())
            );
        }
    }
    write_atomic(path, &out)
}
