//! Experiment harness: random Sobolev-class initial velocities, truncation
//! convergence studies against a high-cutoff reference, double-truncation
//! runs, log–log rate fitting, and the metric-norm drift diagnostic.

use crate::dynamics::DynamicsConfig;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::FrequencyGrid;
use crate::integrate::{integrate_geodesic, Trajectory};
use crate::ops::{sobolev_norm, truncate, SobolevWeight};
use crate::real::Real;
use crate::tableau::ButcherTableau;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// Recipe for a random velocity field with prescribed Sobolev smoothness.
///
/// Coefficients are drawn once per mode with an `s`-independent envelope and
/// only then weighted by `(1+|ξ|²)^{-s/2}`, so two specs differing only in
/// `smoothness` share the same raw draw for equal seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    /// Spatial dimension (1–3); the field gets one component per dimension.
    pub dim: usize,
    /// Target regularity exponent `s ≥ 0`.
    pub smoothness: f64,
    /// Generation cutoff: modes are drawn for `|ξ|_∞ ≤ cutoff`.
    pub cutoff: i64,
    /// Extra tail-decay exponent `ε > 0` in the `log`-factor of the envelope.
    pub tail_exponent: f64,
    /// Seed for the deterministic stream (ChaCha8).
    pub seed: u64,
    /// Draw nonnegative real coefficients instead of uniformly random phases.
    pub literal_real_draw: bool,
}

impl InitSpec {
    /// Spec with the default tail exponent 0.1 and random phases.
    pub fn new(dim: usize, smoothness: f64, cutoff: i64, seed: u64) -> Self {
        Self {
            dim,
            smoothness,
            cutoff,
            tail_exponent: 0.1,
            seed,
            literal_real_draw: false,
        }
    }
}

/// Draws a Hermitian-symmetric random field whose coefficients obey
/// `|v̂(ξ)| ≤ 2(1+|ξ|²)^{-(s+1)/2} · ln(2+|ξ|²)^{-(1/2+ε)}`.
///
/// Per component: draw `ŵ(ξ)` for every mode with magnitude uniform in
/// `[0, (1+|ξ|²)^{-1/2} ln(2+|ξ|²)^{-(1/2+ε)})` and phase uniform in
/// `[0, 2π)`, symmetrize `û(ξ) = ŵ(ξ) + conj(ŵ(-ξ))`, then scale by
/// `(1+|ξ|²)^{-s/2}`. The draw order (components outer, grid index inner)
/// is part of the determinism contract.
pub fn random_sobolev_field<T: Real>(spec: &InitSpec) -> Result<SpectralField<T>> {
    if !spec.smoothness.is_finite() || spec.smoothness < 0.0 {
        return Err(Error::BadConfig(format!(
            "smoothness must be ≥ 0, got {}",
            spec.smoothness
        )));
    }
    if !spec.tail_exponent.is_finite() || spec.tail_exponent <= 0.0 {
        return Err(Error::BadConfig(format!(
            "tail exponent must be > 0, got {}",
            spec.tail_exponent
        )));
    }
    let grid = FrequencyGrid::new(spec.dim, spec.cutoff)?;
    let ncomp = spec.dim;
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Raw draw; everything here is independent of `smoothness`.
    let mut raw = vec![Complex::new(0.0f64, 0.0); n * ncomp];
    for comp in raw.chunks_exact_mut(n) {
        for (idx, slot) in comp.iter_mut().enumerate() {
            let q = grid.norm_sq(idx) as f64;
            let envelope = (1.0 + q).powf(-0.5) / (2.0 + q).ln().powf(0.5 + spec.tail_exponent);
            let mag = rng.gen_range(0.0..envelope);
            let phase = if spec.literal_real_draw {
                0.0
            } else {
                rng.gen_range(0.0..std::f64::consts::TAU)
            };
            *slot = Complex::from_polar(mag, phase);
        }
    }

    // Symmetrize and apply the smoothness weight. Hermitian symmetry is
    // exact: both û(ξ) and conj(û(-ξ)) are the same commutative sum, and
    // the weight depends on ξ only through |ξ|².
    let mut coeffs = vec![Complex::new(T::zero(), T::zero()); n * ncomp];
    for c in 0..ncomp {
        let w = &raw[c * n..(c + 1) * n];
        for idx in 0..n {
            let q = grid.norm_sq(idx) as f64;
            let weight = (1.0 + q).powf(-0.5 * spec.smoothness);
            let u = w[idx] + w[grid.mirror(idx)].conj();
            let v = u * weight;
            coeffs[c * n + idx] = Complex::new(T::of(v.re), T::of(v.im));
        }
    }
    SpectralField::from_coeffs(grid, ncomp, coeffs)
}

/// Worst deviation of the metric norm `√⟨𝓛V,V⟩` from its initial value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDrift<T> {
    /// `max_t |√E_t − √E_0| / √E_0`, or the absolute deviation when flagged.
    pub value: T,
    /// Set when the initial energy vanished and no relative value exists.
    pub absolute: bool,
}

/// Relative drift of the metric norm along a trajectory's energy log.
pub fn energy_drift<T: Real>(traj: &Trajectory<T>) -> EnergyDrift<T> {
    let n0 = traj.energy_log[0].max(T::zero()).sqrt();
    let mut worst = T::zero();
    for &e in &traj.energy_log[1..] {
        let dev = (e.max(T::zero()).sqrt() - n0).abs();
        if dev > worst {
            worst = dev;
        }
    }
    if n0 == T::zero() {
        EnergyDrift { value: worst, absolute: true }
    } else {
        EnergyDrift { value: worst / n0, absolute: false }
    }
}

/// Least-squares slope of `ln error` against `ln R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit<T> {
    /// Fitted exponent: `error ∝ R^slope`.
    pub slope: T,
    /// Points that entered the fit.
    pub points_used: usize,
    /// Points dropped for nonpositive or non-finite coordinates.
    pub points_excluded: usize,
}

/// Fits `error ≈ C·R^slope` through `(R, error)` points by least squares in
/// log–log coordinates. Nonpositive or non-finite entries are excluded (and
/// counted); fewer than two usable points with distinct `R` is an error.
pub fn fit_rate<T: Real>(points: &[(T, T)]) -> Result<RateFit<T>> {
    let mut xs: Vec<T> = Vec::with_capacity(points.len());
    let mut ys: Vec<T> = Vec::with_capacity(points.len());
    let mut excluded = 0usize;
    for &(r, err) in points {
        let ok = r > T::zero() && err > T::zero() && r.is_finite() && err.is_finite();
        if ok {
            xs.push(r.ln());
            ys.push(err.ln());
        } else {
            excluded += 1;
        }
    }
    let used = xs.len();
    if used < 2 {
        return Err(Error::FitUnderdetermined { valid: used });
    }
    let n = T::of(used as f64);
    let mean = |v: &[T]| v.iter().fold(T::zero(), |a, &b| a + b) / n;
    let (mx, my) = (mean(&xs), mean(&ys));
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for i in 0..used {
        let dx = xs[i] - mx;
        sxx += dx * dx;
        sxy += dx * (ys[i] - my);
    }
    if sxx == T::zero() {
        // All abscissae coincide: only one distinct R value.
        return Err(Error::FitUnderdetermined { valid: 1 });
    }
    Ok(RateFit {
        slope: sxy / sxx,
        points_used: used,
        points_excluded: excluded,
    })
}

/// Integrates the geodesic with the doubly truncated initial condition
/// `V_0 = Π_r v_0` embedded at the solver cutoff `cfg.cutoff()`.
pub fn double_truncation_run<T: Real>(
    v0: &SpectralField<T>,
    inner_cutoff: i64,
    cfg: &DynamicsConfig,
    nsteps: usize,
    tab: &ButcherTableau<T>,
    sample_times: &[f64],
) -> Result<Trajectory<T>> {
    if inner_cutoff > cfg.cutoff() {
        return Err(Error::BadConfig(format!(
            "inner cutoff {inner_cutoff} exceeds solver cutoff {}",
            cfg.cutoff()
        )));
    }
    // Π_r is the identity on modes the field never had, so clamp to its grid.
    let narrowed = truncate(v0, inner_cutoff.min(v0.grid().cutoff()))?;
    let lifted = narrowed.resized(cfg.cutoff())?;
    integrate_geodesic(&lifted, nsteps, tab, cfg, sample_times)
}

/// Rule for the inner (initial-data) cutoff of a study run at cutoff `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerCutoffRule {
    /// The same inner cutoff for every run (clamped to each run's `R`).
    Fixed(i64),
    /// `r = ⌈log₂ R⌉`, applied to every run including the reference.
    Log2,
}

impl InnerCutoffRule {
    fn apply(self, r: i64) -> i64 {
        match self {
            InnerCutoffRule::Fixed(k) => k.min(r),
            InnerCutoffRule::Log2 => {
                let mut k = 0i64;
                while (1i64 << k) < r {
                    k += 1;
                }
                k
            }
        }
    }
}

/// Full description of a truncation convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Spatial dimension (1–3).
    pub dim: usize,
    /// Metric order `m` of the solver.
    pub metric_order: i32,
    /// Regularity exponents, one report per entry.
    pub smoothness_list: Vec<f64>,
    /// Run cutoffs; each must stay below the reference cutoff.
    pub cutoff_list: Vec<i64>,
    /// Cutoff of the reference run (also the generation cutoff of `v_0`).
    pub reference_cutoff: i64,
    /// Fixed RK steps over `[0, 1]` for every run.
    pub nsteps: usize,
    /// Tableau name (`"dopri5"` or `"rk4"`).
    pub tableau: String,
    /// RNG seed for the initial data.
    pub seed: u64,
    /// Tail exponent `ε` of the random-field envelope.
    pub tail_exponent: f64,
    /// Draw literal nonnegative real coefficients instead of random phases.
    pub literal_real_draw: bool,
    /// Optional double-truncation rule for the initial data.
    pub inner_cutoff: Option<InnerCutoffRule>,
}

impl StudyConfig {
    /// Study with dopri5, tail exponent 0.1, random phases, no inner cutoff.
    pub fn new(
        dim: usize,
        metric_order: i32,
        smoothness_list: Vec<f64>,
        cutoff_list: Vec<i64>,
        reference_cutoff: i64,
        nsteps: usize,
        seed: u64,
    ) -> Self {
        Self {
            dim,
            metric_order,
            smoothness_list,
            cutoff_list,
            reference_cutoff,
            nsteps,
            tableau: "dopri5".to_string(),
            seed,
            tail_exponent: 0.1,
            literal_real_draw: false,
            inner_cutoff: None,
        }
    }
}

/// One `(R, s)` run of a study.
#[derive(Debug, Clone)]
pub struct ReportRow<T> {
    /// Solver cutoff of this run.
    pub cutoff: i64,
    /// Regularity exponent of the initial data.
    pub smoothness: f64,
    /// `‖V_1 − v_1^ref‖_{H^m}` (common support plus reference tail energy in
    /// quadrature); NaN when this run or the reference blew up.
    pub error_hm: T,
    /// Metric-norm drift of this run; NaN when it blew up.
    pub energy_drift: T,
    /// Flag from [`energy_drift`]: the drift is absolute, not relative.
    pub drift_absolute: bool,
    /// Wall-clock integration time of this run in seconds.
    pub wall_time_s: f64,
    /// The run left the representable range and was aborted.
    pub blown_up: bool,
}

/// Study results for one regularity exponent.
#[derive(Debug, Clone)]
pub struct ConvergenceReport<T> {
    /// Regularity exponent of this report.
    pub smoothness: f64,
    /// Cutoff of the reference run.
    pub reference_cutoff: i64,
    /// Rows sorted by cutoff ascending.
    pub rows: Vec<ReportRow<T>>,
    /// Log–log slope fitted through the usable rows, when determined.
    pub fitted_slope: Option<T>,
    /// The reference run itself blew up (all errors are NaN then).
    pub reference_blew_up: bool,
    /// Configuration echo of the study that produced this report.
    pub config: StudyConfig,
}

struct RunOutcome<T: Real> {
    final_v: Option<SpectralField<T>>,
    drift: EnergyDrift<T>,
    wall_time_s: f64,
    blown_up: bool,
}

/// Runs one geodesic to `t = 1` and reports the final state, drift, and wall
/// time. A blow-up is folded into the outcome; other errors propagate.
fn study_run<T: Real>(
    v0: &SpectralField<T>,
    cfg: &DynamicsConfig,
    nsteps: usize,
    tab: &ButcherTableau<T>,
) -> Result<RunOutcome<T>> {
    let start = Instant::now();
    match integrate_geodesic(v0, nsteps, tab, cfg, &[0.0, 1.0]) {
        Ok(traj) => {
            let drift = energy_drift(&traj);
            Ok(RunOutcome {
                final_v: Some(traj.final_state().v.clone()),
                drift,
                wall_time_s: start.elapsed().as_secs_f64(),
                blown_up: false,
            })
        }
        Err(Error::BlowUp { .. }) => Ok(RunOutcome {
            final_v: None,
            drift: EnergyDrift { value: T::nan(), absolute: false },
            wall_time_s: start.elapsed().as_secs_f64(),
            blown_up: true,
        }),
        Err(e) => Err(e),
    }
}

/// Initial data for a study run: outer truncation to the run cutoff plus the
/// optional inner truncation, embedded back at the run cutoff.
fn study_initial<T: Real>(
    v0_full: &SpectralField<T>,
    run_cutoff: i64,
    rule: Option<InnerCutoffRule>,
) -> Result<SpectralField<T>> {
    let outer = truncate(v0_full, run_cutoff)?;
    match rule {
        None => Ok(outer),
        Some(rule) => {
            let inner = rule.apply(run_cutoff).min(run_cutoff);
            Ok(truncate(&outer, inner)?.resized(run_cutoff)?)
        }
    }
}

/// Runs the truncation convergence study described by `cfg`: for each
/// regularity exponent, generate `v_0` at the reference cutoff, integrate the
/// reference and every run cutoff to `t = 1`, and measure
/// `‖V_1 − v_1^ref‖_{H^m}` as the common-support difference plus the
/// reference's tail energy in quadrature. Rows of a report share one draw of
/// `v_0`; runs are independent and execute in parallel, and rows are
/// assembled in deterministic cutoff order.
pub fn run_convergence_study<T: Real>(cfg: &StudyConfig) -> Result<Vec<ConvergenceReport<T>>> {
    if cfg.smoothness_list.is_empty() {
        return Err(Error::BadConfig("no smoothness exponents requested".into()));
    }
    if cfg.cutoff_list.is_empty() {
        return Err(Error::BadConfig("no run cutoffs requested".into()));
    }
    let mut cutoffs = cfg.cutoff_list.clone();
    cutoffs.sort_unstable();
    cutoffs.dedup();
    if cutoffs[0] < 1 {
        return Err(Error::BadCutoff(cutoffs[0]));
    }
    if *cutoffs.last().unwrap() >= cfg.reference_cutoff {
        return Err(Error::BadConfig(format!(
            "run cutoff {} must stay below the reference cutoff {}",
            cutoffs.last().unwrap(),
            cfg.reference_cutoff
        )));
    }
    let tab = ButcherTableau::<T>::by_name(&cfg.tableau)?;
    let m = cfg.metric_order;
    let weight = T::of(m as f64);

    cfg.smoothness_list
        .par_iter()
        .map(|&s| -> Result<ConvergenceReport<T>> {
            let spec = InitSpec {
                dim: cfg.dim,
                smoothness: s,
                cutoff: cfg.reference_cutoff,
                tail_exponent: cfg.tail_exponent,
                seed: cfg.seed,
                literal_real_draw: cfg.literal_real_draw,
            };
            let v0_full = random_sobolev_field::<T>(&spec)?;

            let ref_cfg = DynamicsConfig::new(cfg.dim, m, cfg.reference_cutoff)?;
            let ref_v0 = study_initial(&v0_full, cfg.reference_cutoff, cfg.inner_cutoff)?;
            let reference = study_run(&ref_v0, &ref_cfg, cfg.nsteps, &tab)?;

            let outcomes: Vec<RunOutcome<T>> = cutoffs
                .par_iter()
                .map(|&r| {
                    let run_cfg = DynamicsConfig::new(cfg.dim, m, r)?;
                    let v0 = study_initial(&v0_full, r, cfg.inner_cutoff)?;
                    study_run(&v0, &run_cfg, cfg.nsteps, &tab)
                })
                .collect::<Result<Vec<_>>>()?;

            let mut rows = Vec::with_capacity(cutoffs.len());
            for (idx, outcome) in outcomes.into_iter().enumerate() {
                let error_hm = match (&reference.final_v, &outcome.final_v) {
                    (Some(v_ref), Some(v_run)) => {
                        let mut diff = v_ref.clone();
                        diff.axpy(-T::one(), &v_run.resized(cfg.reference_cutoff)?)?;
                        sobolev_norm(&diff, weight, SobolevWeight::PowerOfSum)
                    }
                    _ => T::nan(),
                };
                rows.push(ReportRow {
                    cutoff: cutoffs[idx],
                    smoothness: s,
                    error_hm,
                    energy_drift: outcome.drift.value,
                    drift_absolute: outcome.drift.absolute,
                    wall_time_s: outcome.wall_time_s,
                    blown_up: outcome.blown_up,
                });
            }

            let points: Vec<(T, T)> = rows
                .iter()
                .filter(|row| !row.blown_up && row.error_hm.is_finite())
                .map(|row| (T::of(row.cutoff as f64), row.error_hm))
                .collect();
            let fitted_slope = fit_rate(&points).ok().map(|fit| fit.slope);

            Ok(ConvergenceReport {
                smoothness: s,
                reference_cutoff: cfg.reference_cutoff,
                rows,
                fitted_slope,
                reference_blew_up: reference.blown_up,
                config: cfg.clone(),
            })
        })
        .collect()
}
