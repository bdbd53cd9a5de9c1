//! Flow maps of a velocity trajectory and the weak momentum-transport
//! diagnostic.
//!
//! The flow `φ` of a time-dependent velocity solves `φ̇_t = V_t(φ_t)`, and
//! its Jacobian solves the differentiated equation `(Dφ)˙ = DV_t(φ)·Dφ`.
//! Both are integrated jointly with the velocity itself — one Runge–Kutta
//! system per particle grid — so that stage-time velocities are exact
//! rather than interpolated.  Displacements are stored unwrapped (in ℝ^d,
//! not reduced mod 1) to keep them continuous; wrapping happens only inside
//! point evaluation.

use crate::convolve::{next_fast_len, FftWorkspace};
use crate::dynamics::{discrete_rhs_ws, DynamicsConfig};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::integrate::{rk_step_with, sample_steps, OdeState, Trajectory};
use crate::multiplier::{apply_multiplier, FourierMultiplier};
use crate::real::Real;
use crate::sampling::{evaluate_at_points, synthesize_on_grid_ws};
use crate::tableau::ButcherTableau;

/// The flow map at one time, sampled on the uniform particle grid
/// `x_n = n/N`, `n ∈ {0,…,N−1}^d`.  Nodes are enumerated row-major with
/// the last axis fastest — the same layout as grid synthesis, so flow
/// samples and field samples can be paired index by index.
#[derive(Clone, Debug)]
pub struct FlowMap<T> {
    /// Particles per axis.
    pub n: usize,
    /// Spatial dimension.
    pub d: usize,
    /// Time of this snapshot.
    pub t: T,
    /// Unwrapped displacement `φ(x_n) − x_n`, point-major `[node*d + i]`.
    pub disp: Vec<T>,
    /// Jacobian `Dφ(x_n)`, `[node*d*d + i*d + j]` = `∂φ_i/∂x_j`.
    pub jac: Vec<T>,
}

/// Multi-index of node `p` on an `n^d` grid (row-major, last axis fastest).
fn node_of(p: usize, n: usize, d: usize) -> Vec<usize> {
    let mut idx = vec![0usize; d];
    let mut rest = p;
    for a in (0..d).rev() {
        idx[a] = rest % n;
        rest /= n;
    }
    idx
}

impl<T: Real> FlowMap<T> {
    /// Total number of particle nodes, `N^d`.
    pub fn npts(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Multi-index of a node (row-major, last axis fastest).
    pub fn node(&self, p: usize) -> Vec<usize> {
        node_of(p, self.n, self.d)
    }

    /// Jacobian determinant at node `p`.
    pub fn det_at(&self, p: usize) -> T {
        det_small(&self.jac[p * self.d * self.d..(p + 1) * self.d * self.d], self.d)
    }

    /// Smallest Jacobian determinant over all nodes.
    pub fn min_det(&self) -> T {
        (0..self.npts())
            .map(|p| self.det_at(p))
            .fold(T::infinity(), T::min)
    }
}

/// Default particle-grid size for a solver cutoff `R`: twice the minimal
/// alias-free size `2R+1`, rounded up to an FFT-friendly length.
pub fn default_flow_grid(r: i64) -> usize {
    next_fast_len(2 * (2 * r as usize + 1))
}

/// Determinant of a small row-major `d×d` matrix (`d ≤ 3`).
fn det_small<T: Real>(a: &[T], d: usize) -> T {
    match d {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => unreachable!("dimensions are validated to 1..=3"),
    }
}

/// Solves the `d×d` system `a·y = b` by Cramer's rule, given `det(a)`.
fn solve_small<T: Real>(a: &[T], b: &[T], d: usize, det: T, y: &mut [T]) {
    match d {
        1 => y[0] = b[0] / det,
        2 => {
            y[0] = (b[0] * a[3] - b[1] * a[1]) / det;
            y[1] = (a[0] * b[1] - a[2] * b[0]) / det;
        }
        3 => {
            // Column replacement determinants.
            let d0 = b[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (b[1] * a[8] - a[5] * b[2])
                + a[2] * (b[1] * a[7] - a[4] * b[2]);
            let d1 = a[0] * (b[1] * a[8] - a[5] * b[2]) - b[0] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * b[2] - b[1] * a[6]);
            let d2 = a[0] * (a[4] * b[2] - b[1] * a[7]) - a[1] * (a[3] * b[2] - b[1] * a[6])
                + b[0] * (a[3] * a[7] - a[4] * a[6]);
            y[0] = d0 / det;
            y[1] = d1 / det;
            y[2] = d2 / det;
        }
        _ => unreachable!("dimensions are validated to 1..=3"),
    }
}

/// Joint ODE state: velocity field, particle displacements, Jacobians.
#[derive(Clone)]
struct FlowState<T: Real> {
    v: SpectralField<T>,
    disp: Vec<T>,
    jac: Vec<T>,
}

impl<T: Real> OdeState<T> for FlowState<T> {
    fn combine(&self, terms: &[(T, &Self)]) -> Self {
        let mut out = self.clone();
        for &(c, s) in terms {
            out.v.axpy(c, &s.v).expect("stage fields share one grid");
            for (o, &x) in out.disp.iter_mut().zip(s.disp.iter()) {
                *o += c * x;
            }
            for (o, &x) in out.jac.iter_mut().zip(s.jac.iter()) {
                *o += c * x;
            }
        }
        out
    }

    fn all_finite(&self) -> bool {
        self.v.is_finite()
            && self.disp.iter().all(|x| x.is_finite())
            && self.jac.iter().all(|x| x.is_finite())
    }
}

/// Stacks a velocity with its full gradient into one `(d + d²)`-component
/// field: components `0..d` are `v_i`, component `d + i·d + j` is `∂_j v_i`.
/// One stacked field means one shared phase computation per point when
/// evaluating off-grid.
fn stack_with_gradient<T: Real>(v: &SpectralField<T>) -> Result<SpectralField<T>> {
    let grid = v.grid();
    let d = grid.dim();
    let len = grid.len();
    let dv: Vec<SpectralField<T>> = (0..d)
        .map(|j| apply_multiplier(&FourierMultiplier::Partial { axis: j }, v))
        .collect::<Result<_>>()?;
    let mut coeffs = Vec::with_capacity((d + d * d) * len);
    for i in 0..d {
        coeffs.extend_from_slice(v.comp(i));
    }
    for i in 0..d {
        for j in 0..d {
            coeffs.extend_from_slice(dv[j].comp(i));
        }
    }
    SpectralField::from_coeffs(grid, d + d * d, coeffs)
}

fn check_orientation<T: Real>(jac: &[T], n: usize, d: usize, time: T) -> Result<()> {
    let dd = d * d;
    for p in 0..jac.len() / dd {
        let det = det_small(&jac[p * dd..(p + 1) * dd], d);
        if !(det > T::zero()) {
            return Err(Error::DegenerateFlow {
                time: time.to_f64().unwrap_or(f64::NAN),
                node: node_of(p, n, d),
                det: det.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(())
}

fn integrate_flow_impl<T: Real>(
    v0: &SpectralField<T>,
    cfg: Option<&DynamicsConfig>,
    n: usize,
    tab: &ButcherTableau<T>,
    nsteps: usize,
    sample_times: &[f64],
) -> Result<Vec<FlowMap<T>>> {
    let d = v0.grid().dim();
    if v0.ncomp() != d {
        return Err(Error::ComponentMismatch(d, v0.ncomp()));
    }
    if let Some(cfg) = cfg {
        cfg.check_velocity(v0)?;
    }
    if n == 0 {
        return Err(Error::BadConfig("particle grid size must be positive".into()));
    }
    if nsteps == 0 {
        return Err(Error::BadConfig("nsteps must be positive".into()));
    }
    let record_at = sample_steps(sample_times, nsteps)?;
    let npts = n.pow(d as u32);
    let dd = d * d;

    // Base node coordinates x = node/N, point-major.
    let mut base = vec![T::zero(); npts * d];
    for p in 0..npts {
        let mut rest = p;
        for a in (0..d).rev() {
            base[p * d + a] = T::of((rest % n) as f64 / n as f64);
            rest /= n;
        }
    }

    let mut jac0 = vec![T::zero(); npts * dd];
    for p in 0..npts {
        for i in 0..d {
            jac0[p * dd + i * d + i] = T::one();
        }
    }
    let mut state = FlowState { v: v0.clone(), disp: vec![T::zero(); npts * d], jac: jac0 };

    let mut ws = FftWorkspace::new();
    let zero_slope = SpectralField::zeros(v0.grid(), d)?;
    let mut pts = vec![T::zero(); npts * d];
    let mut rhs = |_t: T, s: &FlowState<T>| -> Result<FlowState<T>> {
        let kv = match cfg {
            Some(cfg) => discrete_rhs_ws(&s.v, cfg, &mut ws)?,
            None => zero_slope.clone(),
        };
        let stacked = stack_with_gradient(&s.v)?;
        for (pt, (&b, &dx)) in pts.iter_mut().zip(base.iter().zip(s.disp.iter())) {
            *pt = b + dx;
        }
        let vals = evaluate_at_points(&stacked, &pts)?;
        let mut kdisp = vec![T::zero(); npts * d];
        let mut kjac = vec![T::zero(); npts * dd];
        for p in 0..npts {
            for i in 0..d {
                kdisp[p * d + i] = vals[i * npts + p];
                for j in 0..d {
                    let mut acc = T::zero();
                    for k in 0..d {
                        acc += vals[(d + i * d + k) * npts + p] * s.jac[p * dd + k * d + j];
                    }
                    kjac[p * dd + i * d + j] = acc;
                }
            }
        }
        Ok(FlowState { v: kv, disp: kdisp, jac: kjac })
    };

    let h = T::one() / T::of(nsteps as f64);
    let mut maps = Vec::with_capacity(record_at.len());
    let mut next = 0;
    let last_step = *record_at.last().expect("validated non-empty");
    for k in 0..=last_step {
        let t = T::of(k as f64 / nsteps as f64);
        if record_at[next] == k {
            maps.push(FlowMap { n, d, t, disp: state.disp.clone(), jac: state.jac.clone() });
            next += 1;
            if next == record_at.len() {
                break;
            }
        }
        state = rk_step_with(t, &state, h, tab, &mut rhs)?;
        check_orientation(&state.jac, n, d, t + h)?;
    }
    Ok(maps)
}

/// Integrates the flow (and Jacobian transport) of a geodesic trajectory on
/// an `N^d` particle grid, re-running the velocity integration jointly so
/// stage-time velocities are exact.  Passing the trajectory's own scheme
/// and step count reproduces its states bit for bit inside the joint
/// system.  Flow maps are returned at the trajectory's sample times, which
/// must be step multiples of `nsteps`; orientation (`det Dφ > 0`) is
/// checked after every step.
pub fn integrate_flow<T: Real>(
    traj: &Trajectory<T>,
    n: usize,
    tab: &ButcherTableau<T>,
    nsteps: usize,
) -> Result<Vec<FlowMap<T>>> {
    let times: Vec<f64> = traj
        .states
        .iter()
        .map(|s| s.t.to_f64().unwrap_or(f64::NAN))
        .collect();
    integrate_flow_impl(&traj.initial().v, Some(&traj.cfg), n, tab, nsteps, &times)
}

/// Integrates particle transport under a *frozen* (time-independent)
/// velocity field: `φ̇ = V(φ)` with `V` fixed.  Used for autonomous
/// transport oracles; the geodesic dynamics are not involved.
pub fn integrate_flow_frozen<T: Real>(
    v: &SpectralField<T>,
    n: usize,
    tab: &ButcherTableau<T>,
    nsteps: usize,
    sample_times: &[f64],
) -> Result<Vec<FlowMap<T>>> {
    integrate_flow_impl(v, None, n, tab, nsteps, sample_times)
}

/// Central-difference Jacobian of the displacement field on the periodic
/// particle grid: `I + δ(disp)`, same layout as [`FlowMap::jac`].  Noisier
/// than the transported Jacobian; kept as an independent cross-check.
pub fn finite_difference_jacobian<T: Real>(flow: &FlowMap<T>) -> Vec<T> {
    let (n, d) = (flow.n, flow.d);
    let npts = flow.npts();
    let dd = d * d;
    let half_n = T::of(n as f64) / T::of(2.0);
    let mut out = vec![T::zero(); npts * dd];
    let mut strides = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * n;
    }
    for p in 0..npts {
        let idx = flow.node(p);
        for j in 0..d {
            let fwd = p + strides[j] * (if idx[j] + 1 == n { 0 } else { idx[j] + 1 })
                - strides[j] * idx[j];
            let bwd = p + strides[j] * (if idx[j] == 0 { n - 1 } else { idx[j] - 1 })
                - strides[j] * idx[j];
            for i in 0..d {
                let diff = flow.disp[fwd * d + i] - flow.disp[bwd * d + i];
                let delta = if i == j { T::one() } else { T::zero() };
                out[p * dd + i * d + j] = delta + diff * half_n;
            }
        }
    }
    out
}

/// Samples `Ad_{φ⁻¹} w` on the particle grid without inverting `φ`:
/// at each node, solve `Dφ(x_n)·y = w(φ(x_n))`.  Returns component-major
/// samples `[c·N^d + node]`, matching grid-synthesis layout.
pub fn ad_inverse_apply<T: Real>(flow: &FlowMap<T>, w: &SpectralField<T>) -> Result<Vec<T>> {
    let d = flow.d;
    if w.grid().dim() != d || w.ncomp() != d {
        return Err(Error::ComponentMismatch(d, w.ncomp()));
    }
    let npts = flow.npts();
    let n = flow.n;
    let dd = d * d;
    let mut pts = vec![T::zero(); npts * d];
    for p in 0..npts {
        let idx = flow.node(p);
        for a in 0..d {
            pts[p * d + a] = T::of(idx[a] as f64 / n as f64) + flow.disp[p * d + a];
        }
    }
    let wvals = evaluate_at_points(w, &pts)?;
    let mut out = vec![T::zero(); d * npts];
    let mut b = vec![T::zero(); d];
    let mut y = vec![T::zero(); d];
    for p in 0..npts {
        let a = &flow.jac[p * dd..(p + 1) * dd];
        let det = det_small(a, d);
        if !(det > T::zero()) {
            return Err(Error::DegenerateFlow {
                time: flow.t.to_f64().unwrap_or(f64::NAN),
                node: flow.node(p),
                det: det.to_f64().unwrap_or(f64::NAN),
            });
        }
        for c in 0..d {
            b[c] = wvals[c * npts + p];
        }
        solve_small(a, &b, d, det, &mut y);
        for c in 0..d {
            out[c * npts + p] = y[c];
        }
    }
    Ok(out)
}

/// Weak momentum-transport residuals `⟨P_t, w⟩ − ⟨P_0, Ad_{φ_t⁻¹} w⟩` at
/// every sample of the trajectory, the second pairing taken by rectangle
/// quadrature on the particle grid (exact for alias-free bandwidths).
/// At the continuous level momentum is transported exactly, so for the
/// discretized system the residual is a convergence diagnostic.
pub fn momentum_transport_residual<T: Real>(
    traj: &Trajectory<T>,
    flows: &[FlowMap<T>],
    w: &SpectralField<T>,
) -> Result<Vec<T>> {
    let cfg = &traj.cfg;
    let d = cfg.dim();
    if w.grid().dim() != d || w.ncomp() != d {
        return Err(Error::ComponentMismatch(d, w.ncomp()));
    }
    if w.grid().cutoff() > cfg.cutoff() {
        return Err(Error::CutoffTooLarge {
            requested: w.grid().cutoff(),
            limit: cfg.cutoff(),
        });
    }
    if flows.len() != traj.states.len() {
        return Err(Error::BadConfig(format!(
            "{} flow maps for {} trajectory samples",
            flows.len(),
            traj.states.len()
        )));
    }
    for (f, s) in flows.iter().zip(traj.states.iter()) {
        if (f.t - s.t).abs() > T::of(1e-12) {
            return Err(Error::BadConfig(format!(
                "flow time {:?} does not match sample time {:?}",
                f.t.to_f64(),
                s.t.to_f64()
            )));
        }
    }
    let p0 = traj.initial().momentum(cfg)?;
    let mut ws = FftWorkspace::new();
    let mut residuals = Vec::with_capacity(flows.len());
    let mut p0_samples: Option<(usize, Vec<T>)> = None;
    for (flow, state) in flows.iter().zip(traj.states.iter()) {
        let pt = state.momentum(cfg)?;
        let lhs = crate::dynamics::weak_pairing(&pt, w)?;
        if p0_samples.as_ref().map(|(n, _)| *n) != Some(flow.n) {
            p0_samples = Some((flow.n, synthesize_on_grid_ws(&p0, flow.n, &mut ws)?));
        }
        let samples = &p0_samples.as_ref().expect("just filled").1;
        let transported = ad_inverse_apply(flow, w)?;
        let mut q = T::zero();
        for (a, b) in samples.iter().zip(transported.iter()) {
            q += *a * *b;
        }
        q /= T::of(flow.npts() as f64);
        residuals.push(lhs - q);
    }
    Ok(residuals)
}
