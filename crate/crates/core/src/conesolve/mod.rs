//! Mode-by-mode radial solvers on the straight model cone `(0, 1] x Y`.
//!
//! Every component of a [`ConeField`] evolves under its own radial operator
//! `L_j`; linear problems never couple components, so each time step solves
//! the modes in parallel.

mod eigen;
mod heat;
mod operator;
mod pme;
mod sh;
mod stepper;
mod transform;

use serde::{Deserialize, Serialize};

pub use eigen::{mode_eigenpairs, operator_eigenpairs, EigenPair};
pub use heat::solve_heat;
pub use operator::{
    assemble_mode_operator, radial_operator, ConeModel, MeshSpec, ModeOperator, ModelSpec, OuterBc,
};
pub use pme::{solve_pme, PmeForm};
pub use sh::{solve_sh, ShOperator};
pub use stepper::{linear_step, plan_segments, ShiftedSolve, TimeStepper, TrBdf2Coeffs, TRBDF2_GAMMA};
pub use transform::ModeTransform;

use crate::error::{invalid, ConeError, Result};
use crate::indicial::Problem;
use crate::meshnorm::ConeField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// `None` picks backward Euler for the porous medium equation and
    /// TR-BDF2 otherwise.
    pub time_stepper: Option<TimeStepper>,
    pub dt: f64,
    pub t_end: f64,
    /// Output times; empty means `[t_end]`. The initial slice is always kept.
    pub times: Vec<f64>,
    /// Swift-Hohenberg: `(L+1)^2` implicit, `V` explicit. The only split
    /// implemented; `false` is rejected.
    pub imex_split: bool,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Porous medium exponent.
    pub m: f64,
    pub pme_form: PmeForm,
    /// `V(u, t) = sum_k (sum_i v_coeffs[k][i] t^i) u^k`.
    pub v_coeffs: Vec<Vec<f64>>,
    /// Largest per-step norm growth tolerated without forcing.
    pub growth_limit: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            time_stepper: None,
            dt: 1e-3,
            t_end: 1.0,
            times: Vec::new(),
            imex_split: true,
            newton_tol: 1e-12,
            max_newton: 50,
            m: 1.0,
            pme_form: PmeForm::Transformed,
            v_coeffs: Vec::new(),
            growth_limit: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.newton_tol > 0.0) {
            return invalid(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        if !(self.m > 0.0) || !self.m.is_finite() {
            return invalid(format!("m must be positive, got {}", self.m));
        }
        if self.max_newton == 0 {
            return invalid("max_newton must be at least 1");
        }
        if !(self.growth_limit > 1.0) {
            return invalid("growth_limit must exceed 1");
        }
        if self.v_coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return invalid("V coefficients must be finite");
        }
        self.output_times().map(|_| ())
    }

    pub fn output_times(&self) -> Result<Vec<f64>> {
        let times = if self.times.is_empty() { vec![self.t_end] } else { self.times.clone() };
        if times.iter().any(|t| !t.is_finite()) {
            return invalid("output times must be finite");
        }
        plan_segments(&times, self.dt)?;
        Ok(times)
    }

    pub fn stepper_for(&self, problem: Problem) -> TimeStepper {
        self.time_stepper.unwrap_or(match problem {
            Problem::Pme => TimeStepper::BackwardEuler,
            _ => TimeStepper::TrBdf2,
        })
    }

    /// `V` has no nonzero coefficient.
    pub fn v_is_zero(&self) -> bool {
        self.v_coeffs.iter().flatten().all(|&c| c == 0.0)
    }

    /// `V(u, t)` at a point.
    pub fn v_eval(&self, u: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for k in (0..self.v_coeffs.len()).rev() {
            let c = self.v_coeffs[k].iter().rev().fold(0.0, |a, &ci| a * t + ci);
            acc = acc * u + c;
        }
        acc
    }
}

/// Time slices of one run. The first slice is the initial data.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub problem: Problem,
    pub scheme: TimeStepper,
    /// Largest step used.
    pub dt: f64,
    pub slices: Vec<ConeField>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.t).collect()
    }

    /// Slice with time stamp `t` (to `1e-12` relative).
    pub fn at(&self, t: f64) -> Option<&ConeField> {
        self.slices.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.slices
            .iter()
            .position(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| ConeError::TimeMismatch(format!("no slice at t = {t}")))
    }

    pub fn last(&self) -> &ConeField {
        self.slices.last().expect("trajectory holds the initial slice")
    }
}

pub(crate) fn check_initial(model: &ConeModel, u0: &ConeField) -> Result<()> {
    if !model.same_mesh(u0) || *model.cross_section != *u0.cross_section {
        return invalid("initial data is not on the model mesh and cross section");
    }
    if u0.components.len() != model.zeros().components.len() {
        return invalid("initial data does not match the model spectrum cutoff");
    }
    if !u0.is_finite() {
        return invalid("initial data is not finite");
    }
    Ok(())
}

/// Sets held outer nodes to the boundary values.
pub(crate) fn impose_outer(model: &ConeModel, f: &mut ConeField) {
    for c in &mut f.components {
        if let Some(g) = model.boundary_value(c.mode) {
            let g = if c.harmonic.is_constant() { g } else { 0.0 };
            *c.values.last_mut().expect("non-empty mesh") = g;
        }
    }
}

/// Runs `step(u, dt)` through the output times, recording one slice per time.
pub(crate) fn march(
    u0: &ConeField,
    cfg: &SolverConfig,
    mut step: impl FnMut(&ConeField, f64) -> Result<ConeField>,
) -> Result<(Vec<ConeField>, f64)> {
    let times = cfg.output_times()?;
    let mut u = u0.clone();
    u.t = 0.0;
    let mut out = vec![u.clone()];
    let mut dt_max: f64 = 0.0;
    for (t0, t1, n) in plan_segments(&times, cfg.dt)? {
        if n == 0 {
            continue;
        }
        let h = (t1 - t0) / n as f64;
        dt_max = dt_max.max(h);
        for i in 0..n {
            let mut next = step(&u, h)?;
            next.t = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };
            u = next;
        }
        out.push(u.clone());
    }
    Ok((out, dt_max))
}

/// Applies `f(component_index, values)` to every component in parallel.
pub(crate) fn componentwise<F>(u: &ConeField, f: F) -> Result<ConeField>
where
    F: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
{
    use rayon::prelude::*;
    let values: Vec<Vec<f64>> =
        u.components.par_iter().enumerate().map(|(i, c)| f(i, &c.values)).collect::<Result<_>>()?;
    let mut out = u.clone();
    for (c, v) in out.components.iter_mut().zip(values) {
        c.values = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_polynomial() {
        let cfg = SolverConfig { v_coeffs: vec![vec![0.0], vec![1.0, 2.0], vec![], vec![-1.0]], ..Default::default() };
        // (1 + 2t) u - u^3
        assert!((cfg.v_eval(0.5, 0.25) - (1.5 * 0.5 - 0.125)).abs() < 1e-15);
        assert!(!cfg.v_is_zero());
        assert!(SolverConfig::default().v_is_zero());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { m: -1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { newton_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { times: vec![0.3, 0.2], ..Default::default() }.validate().is_err());
        let cfg: SolverConfig = serde_json::from_str(r#"{"dt": 0.01, "time_stepper": "trbdf2"}"#).unwrap();
        assert_eq!(cfg.stepper_for(Problem::Pme), TimeStepper::TrBdf2);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"dtt": 0.01}"#).is_err());
    }
}
