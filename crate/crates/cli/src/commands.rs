//! The three workflows: solve one geodesic, run a convergence study, and run
//! the conservation diagnostics. Each is a thin shell over library calls;
//! every output CSV embeds the resolved configuration.

use crate::config::{ConfigError, Resolved, SeedChoice};

/// Stdout report line that tolerates a closed pipe (e.g. `epdiff … | head`).
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}
use epdiff_core::{
    default_flow_grid, discrete_rhs, integrate_flow, integrate_geodesic, io, truncate,
    ButcherTableau, DynamicsConfig, Error as CoreError, InitSpec, InnerCutoffRule, SpectralField,
    StudyConfig, Trajectory,
};
use num_complex::Complex;
use std::path::{Path, PathBuf};

/// Command failure with its exit-code class.
#[derive(Debug)]
pub enum CmdError {
    /// Exit 1: invalid configuration or input.
    Config(String),
    /// Exit 2: numerical blow-up.
    BlowUp(String),
    /// Exit 3: flow-map degeneracy.
    Degenerate(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 1,
            CmdError::BlowUp(_) => 2,
            CmdError::Degenerate(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Config(m) | CmdError::BlowUp(m) | CmdError::Degenerate(m) => m,
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.0)
    }
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::BlowUp { .. } => CmdError::BlowUp(e.to_string()),
            CoreError::DegenerateFlow { .. } => CmdError::Degenerate(e.to_string()),
            other => CmdError::Config(other.to_string()),
        }
    }
}

type CmdResult = Result<(), CmdError>;

fn ensure_out_dir(cfg: &Resolved) -> Result<PathBuf, CmdError> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CmdError::Config(format!("cannot create out-dir {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Sample times for the energy log: quarter points when the step count
/// allows them, otherwise just the endpoints.
fn sample_times(steps: usize) -> Vec<f64> {
    if steps % 4 == 0 {
        vec![0.0, 0.25, 0.5, 0.75, 1.0]
    } else {
        vec![0.0, 1.0]
    }
}

/// Initial velocity for solve/diagnose: either read from `--in` (resized up
/// to the solver cutoff) or drawn from `--seed` and `--s`; the optional
/// `--r-inner` truncation is applied afterwards.
fn initial_velocity(cfg: &Resolved, d: usize, r: i64) -> Result<SpectralField<f64>, CmdError> {
    let v0 = match (&cfg.input, cfg.seed) {
        (Some(path), _) => {
            let v: SpectralField<f64> = io::read_field_csv(path)?;
            if v.dim() != d {
                return Err(CmdError::Config(format!(
                    "input field is {}-dimensional, --d is {d}",
                    v.dim()
                )));
            }
            if v.ncomp() != d {
                return Err(CmdError::Config(format!(
                    "input field has {} components, velocity fields need {d}",
                    v.ncomp()
                )));
            }
            if v.grid().cutoff() > r {
                return Err(CmdError::Config(format!(
                    "input field cutoff {} exceeds --R {r}; truncate it explicitly",
                    v.grid().cutoff()
                )));
            }
            v.resized(r)?
        }
        (None, Some(SeedChoice::Value(seed))) => {
            let s = Resolved::require(cfg.s, "s")?;
            let spec = InitSpec {
                dim: d,
                smoothness: s,
                cutoff: r,
                tail_exponent: cfg.tail_exponent(),
                seed,
                literal_real_draw: cfg.literal_real_draw,
            };
            epdiff_core::random_sobolev_field(&spec)?
        }
        (None, Some(SeedChoice::None)) => {
            return Err(CmdError::Config(
                "seed is \"none\" but no --in field was given".into(),
            ));
        }
        (None, None) => {
            return Err(CmdError::Config("missing required key: seed (or in)".into()));
        }
    };
    match cfg.r_inner {
        None => Ok(v0),
        Some(r_inner) => {
            if r_inner < 0 || r_inner > r {
                return Err(CmdError::Config(format!(
                    "r-inner {r_inner} outside [0, R = {r}]"
                )));
            }
            Ok(truncate(&v0, r_inner)?.resized(r)?)
        }
    }
}

fn integrate(
    cfg: &Resolved,
    v0: &SpectralField<f64>,
    dyn_cfg: &DynamicsConfig,
    steps: usize,
) -> Result<Trajectory<f64>, CmdError> {
    let tab = ButcherTableau::<f64>::by_name(cfg.tableau_name())?;
    Ok(integrate_geodesic(
        v0,
        steps,
        &tab,
        dyn_cfg,
        &sample_times(steps),
    )?)
}

/// `solve`: one geodesic; writes the final-state field, the energy log, and
/// the initial right-hand side.
pub fn cmd_solve(cfg: &Resolved) -> CmdResult {
    let d = Resolved::require(cfg.d, "d")?;
    let m = Resolved::require(cfg.m, "m")?;
    let r = Resolved::require(cfg.r, "R")?;
    let steps = Resolved::require(cfg.steps, "steps")?;
    let dyn_cfg = DynamicsConfig::new(d, m, r)?;
    let out = ensure_out_dir(cfg)?;
    let echo = cfg.echo("solve");

    let v0 = initial_velocity(cfg, d, r)?;
    let rhs0 = discrete_rhs(&v0, &dyn_cfg)?;
    io::write_field_csv(&out.join("rhs_initial.csv"), &rhs0, &echo)?;

    let traj = integrate(cfg, &v0, &dyn_cfg, steps)?;
    io::write_field_csv(&out.join("field_final.csv"), &traj.final_state().v, &echo)?;
    io::write_energy_log_csv(&out.join("energy_log.csv"), &traj, &echo)?;

    let drift = epdiff_core::energy_drift(&traj);
    outln!(
        "solve: d={d} m={m} R={r} steps={steps} tableau={} energy_drift={:.3e}{}",
        cfg.tableau_name(),
        drift.value,
        if drift.absolute { " (absolute)" } else { "" }
    );
    outln!("solve: wrote {}", out.join("field_final.csv").display());
    Ok(())
}

/// `converge`: the truncation convergence study; writes one report per
/// regularity exponent plus a summary and plot-ready data.
pub fn cmd_converge(cfg: &Resolved) -> CmdResult {
    let d = Resolved::require(cfg.d, "d")?;
    let m = Resolved::require(cfg.m, "m")?;
    let r_ref = Resolved::require(cfg.r_ref, "R-ref")?;
    let r_list = Resolved::require_ref(&cfg.r_list, "R-list")?.clone();
    let s_list = Resolved::require_ref(&cfg.s_list, "s-list")?.clone();
    let steps = Resolved::require(cfg.steps, "steps")?;
    let seed = match Resolved::require(cfg.seed, "seed")? {
        SeedChoice::Value(k) => k,
        SeedChoice::None => {
            return Err(CmdError::Config(
                "converge draws its initial data; seed must be a number".into(),
            ));
        }
    };
    let out = ensure_out_dir(cfg)?;
    let echo = cfg.echo("converge");

    let study = StudyConfig {
        dim: d,
        metric_order: m,
        smoothness_list: s_list,
        cutoff_list: r_list,
        reference_cutoff: r_ref,
        nsteps: steps,
        tableau: cfg.tableau_name().to_string(),
        seed,
        tail_exponent: cfg.tail_exponent(),
        literal_real_draw: cfg.literal_real_draw,
        inner_cutoff: cfg.r_inner.map(InnerCutoffRule::Fixed),
    };
    let reports = epdiff_core::run_convergence_study::<f64>(&study)?;

    for rep in &reports {
        let name = format!("report_s{}.csv", rep.smoothness);
        io::write_report_csv(&out.join(name), rep, &echo)?;
    }
    io::write_study_summary_csv(&out.join("summary.csv"), &reports, &echo)?;
    io::write_plot_data_csv(&out.join("plot_data.csv"), &reports, &echo)?;

    let mut usable = 0usize;
    let mut total = 0usize;
    for rep in &reports {
        let slope = rep
            .fitted_slope
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "(none)".into());
        outln!(
            "converge: s={} slope={slope}{}",
            rep.smoothness,
            if rep.reference_blew_up {
                " [reference blew up]"
            } else {
                ""
            }
        );
        for row in &rep.rows {
            total += 1;
            if !row.blown_up && row.error_hm.is_finite() {
                usable += 1;
            }
        }
    }
    outln!("converge: wrote reports to {}", out.display());
    if usable == 0 && total > 0 {
        return Err(CmdError::BlowUp(
            "every (s, R) run of the study blew up".into(),
        ));
    }
    Ok(())
}

/// The diagnostic test field `w = sin(2πx₁)e₁` at the solver cutoff.
fn diagnostic_test_field(d: usize, r: i64) -> Result<SpectralField<f64>, CoreError> {
    let grid = epdiff_core::FrequencyGrid::new(d, r)?;
    let mut w = SpectralField::zeros(grid, d)?;
    let mut plus = [0i64; 3];
    plus[0] = 1;
    let mut minus = [0i64; 3];
    minus[0] = -1;
    w.set(0, &plus[..d], Complex::new(0.0, -0.5));
    w.set(0, &minus[..d], Complex::new(0.0, 0.5));
    Ok(w)
}

/// `diagnose`: energy drift, weak momentum-transport residual series for
/// `w = sin(2πx₁)e₁`, and the final flow map with its orientation check.
pub fn cmd_diagnose(cfg: &Resolved) -> CmdResult {
    let d = Resolved::require(cfg.d, "d")?;
    let m = Resolved::require(cfg.m, "m")?;
    let r = Resolved::require(cfg.r, "R")?;
    let steps = Resolved::require(cfg.steps, "steps")?;
    let dyn_cfg = DynamicsConfig::new(d, m, r)?;
    let n_flow = match cfg.n_flow {
        Some(n) => n,
        None => default_flow_grid(r),
    };
    let out = ensure_out_dir(cfg)?;
    let echo = cfg.echo("diagnose");

    let v0 = initial_velocity(cfg, d, r)?;
    let traj = integrate(cfg, &v0, &dyn_cfg, steps)?;
    let tab = ButcherTableau::<f64>::by_name(cfg.tableau_name())?;
    let flows = integrate_flow(&traj, n_flow, &tab, steps)?;

    let w = diagnostic_test_field(d, r)?;
    let residuals = epdiff_core::momentum_transport_residual(&traj, &flows, &w)?;
    let drift = epdiff_core::energy_drift(&traj);
    let final_flow = flows.last().expect("flow list is never empty");
    let min_det = final_flow.min_det();

    io::write_energy_log_csv(&out.join("energy_log.csv"), &traj, &echo)?;
    io::write_flowmap_csv(&out.join("flow_final.csv"), final_flow, &echo)?;

    // Residual series: t,residual rows.
    let mut residual_csv = String::new();
    residual_csv.push_str("t,residual\n");
    for (state, res) in traj.states.iter().zip(&residuals) {
        residual_csv.push_str(&format!("{:.16e},{:.16e}\n", state.t, res));
    }
    write_small_csv(&out.join("residuals.csv"), &echo, &residual_csv)?;

    // Scalar diagnostics.
    let mut diag = String::new();
    diag.push_str("quantity,value\n");
    diag.push_str(&format!("energy_drift,{:.16e}\n", drift.value));
    diag.push_str(&format!("energy_drift_is_absolute,{}\n", drift.absolute));
    diag.push_str(&format!("min_det_final_flow,{:.16e}\n", min_det));
    diag.push_str(&format!(
        "max_abs_residual,{:.16e}\n",
        residuals.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    ));
    write_small_csv(&out.join("diagnostics.csv"), &echo, &diag)?;

    outln!(
        "diagnose: energy_drift={:.3e}{} min_det(Dφ₁)={min_det:.6} max|residual|={:.3e}",
        drift.value,
        if drift.absolute { " (absolute)" } else { "" },
        residuals.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    );
    outln!("diagnose: wrote diagnostics to {}", out.display());
    Ok(())
}

/// Writes a small CSV with the standard comment header, atomically.
fn write_small_csv(path: &Path, echo: &[String], body: &str) -> Result<(), CmdError> {
    // Reuse the field-CSV comment convention: version line plus config echo.
    let mut text = format!("# epdiff-cli {}\n", env!("CARGO_PKG_VERSION"));
    for line in echo {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str(body);
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, text)
        .and_then(|()| std::fs::rename(&tmp, path))
        .map_err(|e| CmdError::Config(format!("cannot write {}: {e}", path.display())))
}
