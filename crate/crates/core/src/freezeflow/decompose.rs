use std::collections::hash_map::{Entry, HashMap};

use serde::{Deserialize, Serialize};

use super::{frozen_at, state, FrozenOperator, FrozenSolver};
use crate::conesolve::{componentwise, linear_step, plan_segments, ConeModel, SolverConfig, TimeStepper, Trajectory};
use crate::error::{invalid, ConeError, Result};
use crate::meshnorm::{fit_exponent, mellin_norm, weighted_lp, ConeField, FitReport};

/// Norm parameters of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeOptions {
    /// Spatial exponent of the weighted `L^p` norm.
    pub p: f64,
    /// Time exponent.
    pub q: f64,
    /// Weight of the spatial norm.
    pub gamma: f64,
    /// Highest operator power in the smoothness check.
    pub k_max: usize,
    /// Radial window for the tip-exponent fit of `v_tau`.
    pub fit_window: [f64; 2],
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { p: 2.0, q: 2.0, gamma: 0.0, k_max: 2, fit_window: [1e-4, 1e-2] }
    }
}

impl DecomposeOptions {
    fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !(self.q >= 1.0) || !self.p.is_finite() || !self.q.is_finite() {
            return invalid(format!("need finite p, q >= 1, got p = {}, q = {}", self.p, self.q));
        }
        if !self.gamma.is_finite() {
            return invalid("gamma must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub k: usize,
    /// Weighted norm of `A_tau^k v` (sup over the checked times).
    pub norm: f64,
    pub divergent: bool,
    /// `eps ||A||^k ||v||`: size of the rounding floor of the explicit powers.
    pub roundoff_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCheck {
    pub t: f64,
    pub rows: Vec<PowerRow>,
    /// Tip exponent of `v` after removing its tip value.
    pub fit: Option<FitReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub tau: f64,
    pub nu: f64,
    pub options: DecomposeOptions,
    pub times: Vec<f64>,
    /// Spatial norms of `G_tau(t)` per time.
    pub g_norms: Vec<f64>,
    /// Spatial norms of `w_tau(t)` per time.
    pub w_norms: Vec<f64>,
    /// `L^q` in time of the spatial norm of `G_tau`.
    pub g_norm: f64,
    pub w_lq: f64,
    pub dw_lq: f64,
    pub aw_lq: f64,
    /// `w_lq + dw_lq + aw_lq`.
    pub w_norm: f64,
    /// `w_norm / g_norm`; absent when the forcing vanishes.
    pub fitted_c: Option<f64>,
    pub vacuous: bool,
    /// `max_abs(w_tau(tau))`.
    pub endpoint_residual: f64,
    /// Largest spatial norm of the difference of the subtraction and
    /// convolution remainders.
    pub route_gap: f64,
    pub power_check: Vec<PowerRow>,
    #[serde(skip)]
    pub v_tau: Vec<ConeField>,
    #[serde(skip)]
    pub w_tau: Vec<ConeField>,
    #[serde(skip)]
    pub w_duhamel: Vec<ConeField>,
}

impl DecompositionReport {
    /// The fitted constant, or an error when the bound is vacuous.
    pub fn constant(&self) -> Result<f64> {
        self.fitted_c.ok_or(ConeError::VacuousBound(self.g_norm))
    }
}

fn step_all(fr: &FrozenOperator, solvers: &[FrozenSolver], u: &ConeField, f: Option<&ConeField>, h: f64) -> Result<ConeField> {
    componentwise(u, |i, v| {
        let g = f.map(|f| f.components[i].values.as_slice());
        linear_step(&solvers[u.components[i].mode], fr.scheme, v, g, h)
    })
}

/// `v_tau` at `times` (all `>= tau`), propagated by the trajectory's stepper
/// with steps no longer than the configured `dt`.
pub fn smooth_part(fr: &FrozenOperator, u_tau: &ConeField, times: &[f64]) -> Result<Vec<ConeField>> {
    if !u_tau.same_layout(&fr.model.zeros()) {
        return invalid("u(tau) does not match the frozen operator's model");
    }
    if times.first().is_some_and(|&t| t < fr.tau - 1e-12 * fr.tau.abs().max(1.0)) {
        return invalid("smooth part requested before tau");
    }
    let rel: Vec<f64> = times.iter().map(|t| (t - fr.tau).max(0.0)).collect();
    let mut cache: HashMap<u64, Vec<FrozenSolver>> = HashMap::new();
    let mut v = u_tau.clone();
    let mut out = Vec::with_capacity(times.len());
    for ((t0, t1, n), &t_abs) in plan_segments(&rel, fr.config.dt)?.into_iter().zip(times) {
        if n > 0 {
            let h = (t1 - t0) / n as f64;
            if let Entry::Vacant(e) = cache.entry(h.to_bits()) {
                e.insert(fr.solvers(h)?);
            }
            let solvers = &cache[&h.to_bits()];
            for _ in 0..n {
                v = step_all(fr, solvers, &v, None, h)?;
            }
        }
        v.t = t_abs;
        out.push(v.clone());
    }
    Ok(out)
}

/// `w_tau = state(u) - v_tau`, slice by slice.
pub fn remainder(states: &[ConeField], v_tau: &[ConeField]) -> Result<Vec<ConeField>> {
    if states.len() != v_tau.len() {
        return Err(ConeError::TimeMismatch(format!("{} slices against {} smooth-part slices", states.len(), v_tau.len())));
    }
    states
        .iter()
        .zip(v_tau)
        .map(|(u, v)| {
            if (u.t - v.t).abs() > 1e-12 * u.t.abs().max(1.0) {
                return Err(ConeError::TimeMismatch(format!("slice at t = {} against smooth part at t = {}", u.t, v.t)));
            }
            let mut w = u.sub(v)?;
            w.t = u.t;
            Ok(w)
        })
        .collect()
}

/// The remainder from the discrete variation-of-constants formula: one step
/// of the trajectory's stepper per slice interval, driven by `G_tau` taken at
/// the right end (backward Euler) or averaged over the interval (TR-BDF2).
pub fn duhamel_remainder(fr: &FrozenOperator, slices: &[ConeField]) -> Result<Vec<ConeField>> {
    let g: Vec<ConeField> = slices.iter().map(|s| fr.forcing(s)).collect::<Result<_>>()?;
    duhamel_with(fr, slices, &g)
}

fn duhamel_with(fr: &FrozenOperator, slices: &[ConeField], g: &[ConeField]) -> Result<Vec<ConeField>> {
    let Some(first) = slices.first() else { return Ok(Vec::new()) };
    let mut r = first.zeros_like();
    r.t = first.t;
    let mut out = vec![r.clone()];
    let mut cache: HashMap<u64, Vec<FrozenSolver>> = HashMap::new();
    for i in 0..slices.len() - 1 {
        let h = slices[i + 1].t - slices[i].t;
        if !(h > 0.0) {
            return Err(ConeError::TimeMismatch("slice times must increase".into()));
        }
        if let Entry::Vacant(e) = cache.entry(h.to_bits()) {
            e.insert(fr.solvers(h)?);
        }
        let f = match fr.scheme {
            TimeStepper::BackwardEuler => g[i + 1].clone(),
            TimeStepper::TrBdf2 => {
                let mut f = g[i].clone();
                f.axpy(1.0, &g[i + 1])?;
                f.scale(0.5);
                f
            }
        };
        r = step_all(fr, &cache[&h.to_bits()], &r, Some(&f), h)?;
        r.t = slices[i + 1].t;
        out.push(r.clone());
    }
    Ok(out)
}

fn lq_time(times: &[f64], vals: &[f64], q: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..times.len().saturating_sub(1) {
        acc += 0.5 * (times[i + 1] - times[i]) * (vals[i].powf(q) + vals[i + 1].powf(q));
    }
    acc.powf(1.0 / q)
}

/// Powers of `A_tau` applied to `v`, their weighted norms, and the tip fit of `v`.
pub fn domain_power_check(v: &ConeField, fr: &FrozenOperator, k_max: usize, gamma: f64, p: f64, fit_window: [f64; 2]) -> Result<PowerCheck> {
    let a_norm = (0..fr.model.spectrum.len()).map(|j| fr.matrix(j).norm_inf()).fold(0.0, f64::max);
    let v_inf = v.max_abs();
    let mut f = v.clone();
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        f = fr.apply(&f);
        let mn = mellin_norm(&f, 0, gamma, p)?;
        let estimate = f64::EPSILON * a_norm.powi(k as i32) * v_inf;
        let size = f.max_abs();
        if k > 3 && estimate > 1e-3 * size {
            return Err(ConeError::AmplifiedRoundoff { k, estimate, norm: size });
        }
        rows.push(PowerRow { k, norm: mn.value, divergent: mn.divergent, roundoff_estimate: estimate });
    }
    let fit = fit_exponent(v, v.components[0].harmonic, (fit_window[0], fit_window[1]), true).ok();
    Ok(PowerCheck { t: v.t, rows, fit })
}

/// Splits `traj` on the slice window `[tau, nu]`.
pub fn decompose(
    traj: &Trajectory,
    model: &ConeModel,
    cfg: &SolverConfig,
    tau: f64,
    nu: f64,
    opts: &DecomposeOptions,
) -> Result<DecompositionReport> {
    opts.validate()?;
    let (a, b) = (traj.index_of(tau)?, traj.index_of(nu)?);
    if b <= a {
        return invalid(format!("window [{tau}, {nu}] holds no step"));
    }
    let slices = &traj.slices[a..=b];
    let fr = frozen_at(&slices[0], traj.problem, traj.scheme, model, cfg)?;
    let times: Vec<f64> = slices.iter().map(|s| s.t).collect();
    let states: Vec<ConeField> = slices.iter().map(|s| state(traj.problem, cfg.m, s)).collect();
    let v = smooth_part(&fr, &states[0], &times)?;
    let w = remainder(&states, &v)?;
    let g: Vec<ConeField> = slices.iter().map(|s| fr.forcing(s)).collect::<Result<_>>()?;
    let wd = duhamel_with(&fr, slices, &g)?;

    let x0 = |f: &ConeField| weighted_lp(f, opts.gamma, opts.p);
    let g_norms: Vec<f64> = g.iter().map(x0).collect();
    let w_norms: Vec<f64> = w.iter().map(x0).collect();
    let aw: Vec<f64> = w.iter().map(|f| x0(&fr.apply(f))).collect();
    let mut dw = 0.0;
    for i in 0..w.len() - 1 {
        let h = times[i + 1] - times[i];
        let mut d = w[i + 1].sub(&w[i])?;
        d.scale(1.0 / h);
        dw += h * x0(&d).powf(opts.q);
    }
    let g_norm = lq_time(&times, &g_norms, opts.q);
    let w_lq = lq_time(&times, &w_norms, opts.q);
    let aw_lq = lq_time(&times, &aw, opts.q);
    let dw_lq = dw.powf(1.0 / opts.q);
    let w_norm = w_lq + dw_lq + aw_lq;
    let vacuous = g_norm < 1e-14;
    let route_gap = w.iter().zip(&wd).map(|(a, b)| a.sub(b).map(|d| x0(&d))).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);

    let mut power_check: Vec<PowerRow> = Vec::new();
    for vi in v.iter().take(v.len() - 1).skip(1) {
        let pc = domain_power_check(vi, &fr, opts.k_max, opts.gamma, opts.p, opts.fit_window)?;
        if power_check.is_empty() {
            power_check = pc.rows;
        } else {
            for (acc, r) in power_check.iter_mut().zip(pc.rows) {
                acc.norm = acc.norm.max(r.norm);
                acc.divergent |= r.divergent;
                acc.roundoff_estimate = acc.roundoff_estimate.max(r.roundoff_estimate);
            }
        }
    }

    Ok(DecompositionReport {
        tau: times[0],
        nu: times[times.len() - 1],
        options: *opts,
        endpoint_residual: w[0].max_abs(),
        times,
        g_norms,
        w_norms,
        g_norm,
        w_lq,
        dw_lq,
        aw_lq,
        w_norm,
        fitted_c: if vacuous { None } else { Some(w_norm / g_norm) },
        vacuous,
        route_gap,
        power_check,
        v_tau: v,
        w_tau: w,
        w_duhamel: wd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundScan {
    pub tau: f64,
    pub nus: Vec<f64>,
    pub fitted_c: Vec<Option<f64>>,
    pub vacuous: bool,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl BoundScan {
    /// `max / min` of the fitted constants.
    pub fn spread(&self) -> Option<f64> {
        Some(self.max? / self.min?)
    }
}

/// Fitted constants over nested windows `[tau, nu]`.
pub fn remainder_bound(
    traj: &Trajectory,
    model: &ConeModel,
    cfg: &SolverConfig,
    tau: f64,
    nus: &[f64],
    opts: &DecomposeOptions,
) -> Result<BoundScan> {
    if nus.len() < 3 {
        return invalid(format!("need at least 3 windows, got {}", nus.len()));
    }
    let opts = DecomposeOptions { k_max: 0, ..*opts };
    let fitted_c: Vec<Option<f64>> =
        nus.iter().map(|&nu| decompose(traj, model, cfg, tau, nu, &opts).map(|r| r.fitted_c)).collect::<Result<_>>()?;
    let vals: Vec<f64> = fitted_c.iter().flatten().copied().collect();
    let vacuous = vals.len() < fitted_c.len();
    let (min, max) = if vals.is_empty() {
        (None, None)
    } else {
        (Some(vals.iter().cloned().fold(f64::INFINITY, f64::min)), Some(vals.iter().cloned().fold(0.0, f64::max)))
    };
    Ok(BoundScan { tau, nus: nus.to_vec(), fitted_c, vacuous, min, max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSearch {
    pub t: f64,
    pub eps: f64,
    pub t1: f64,
    pub t2: f64,
    pub norm: f64,
    pub halvings: usize,
}

/// Shrinks a slice window `(t1, t2)` around `t` until the remainder of the
/// split frozen at `t1` has norm below `eps`.
pub fn epsilon_window(
    traj: &Trajectory,
    model: &ConeModel,
    cfg: &SolverConfig,
    t: f64,
    eps: f64,
    opts: &DecomposeOptions,
) -> Result<WindowSearch> {
    if !(eps > 0.0) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    let times = traj.times();
    let i = traj.index_of(t)?;
    if i == 0 || i + 1 == times.len() {
        return invalid("the search point must be an interior slice");
    }
    let opts = DecomposeOptions { k_max: 0, ..*opts };
    let mut k = i.min(times.len() - 1 - i);
    let mut halvings = 0;
    let mut best = f64::INFINITY;
    loop {
        let (t1, t2) = (times[i - k], times[i + k]);
        let r = decompose(traj, model, cfg, t1, t2, &opts)?;
        best = best.min(r.w_norm);
        if r.w_norm < eps {
            return Ok(WindowSearch { t, eps, t1, t2, norm: r.w_norm, halvings });
        }
        if k == 1 {
            return Err(ConeError::WindowSearchFailed { eps, best });
        }
        k = (k / 2).max(1);
        halvings += 1;
    }
}
