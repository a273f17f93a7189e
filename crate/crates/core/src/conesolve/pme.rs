use serde::{Deserialize, Serialize};

use super::operator::{ConeModel, ModeOperator};
use super::stepper::{TimeStepper, TrBdf2Coeffs};
use super::{check_initial, impose_outer, march, SolverConfig, Trajectory};
use crate::error::{ConeError, Result};
use crate::indicial::Problem;
use crate::meshnorm::ConeField;

/// Which equation the porous medium solver integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmeForm {
    /// `w' = m w^{(m-1)/m} L w` for `w = u^m`, coefficient lagged.
    Transformed,
    /// `u' = L(u^m)` with Newton iteration.
    Direct,
}

/// `u' = L(u^m)` for strictly positive, axisymmetric data.
///
/// The transformed form is linearly implicit: each stage is an M-matrix
/// solve, so backward Euler preserves the bounds of the data. The direct form
/// uses Newton with a step-size stopping rule.
pub fn solve_pme(model: &ConeModel, u0: &ConeField, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(model, u0)?;
    if !u0.is_axisymmetric() {
        return Err(ConeError::Unsupported("the porous medium solver takes axisymmetric data only".into()));
    }
    let mut start = u0.clone();
    impose_outer(model, &mut start);
    let min = start.components[0].values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(ConeError::PositivityLoss { t: 0.0, min });
    }
    let scheme = cfg.stepper_for(Problem::Pme);
    let op = model.operator(0)?;
    let m = cfg.m;
    let (slices, dt) = match cfg.pme_form {
        PmeForm::Transformed => {
            // March w = u^m, convert back on output.
            let mut w0 = start.clone();
            w0.components[0].values.iter_mut().for_each(|v| *v = v.powf(m));
            let (mut ws, dt) = march(&w0, cfg, |w, h| {
                let mut next = w.clone();
                next.components[0].values = transformed_step(&op, scheme, m, &w.components[0].values, h, w.t)?;
                Ok(next)
            })?;
            for s in &mut ws {
                s.components[0].values.iter_mut().for_each(|v| *v = v.powf(1.0 / m));
            }
            (ws, dt)
        }
        PmeForm::Direct => march(&start, cfg, |u, h| {
            let mut next = u.clone();
            next.components[0].values = direct_step(&op, scheme, cfg, &u.components[0].values, h, u.t)?;
            Ok(next)
        })?,
    };
    Ok(Trajectory { problem: Problem::Pme, scheme, dt, slices })
}

fn check_positive(v: &[f64], t: f64) -> Result<()> {
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 && min.is_finite() {
        Ok(())
    } else {
        Err(ConeError::PositivityLoss { t, min })
    }
}

/// Solves `(I - kappa m w_c^{(m-1)/m} L) w = rhs`, with `w_c` the frozen state.
fn lagged_solve(op: &ModeOperator, m: f64, kappa: f64, frozen: &[f64], rhs: &[f64], held: f64) -> Result<Vec<f64>> {
    let e = (m - 1.0) / m;
    let a: Vec<f64> = frozen.iter().map(|w| 1.0 / (kappa * m * w.powf(e))).collect();
    let mut b: Vec<f64> = rhs.iter().zip(&a).map(|(r, a)| a * r).collect();
    if op.is_dirichlet() {
        *b.last_mut().expect("non-empty") = held;
    }
    op.solve_diag_shifted(&a, 1.0, &b)
}

fn transformed_step(op: &ModeOperator, scheme: TimeStepper, m: f64, w: &[f64], dt: f64, t: f64) -> Result<Vec<f64>> {
    let held = *w.last().expect("non-empty");
    let next = match scheme {
        TimeStepper::BackwardEuler => lagged_solve(op, m, dt, w, w, held)?,
        TimeStepper::TrBdf2 => {
            let k = TrBdf2Coeffs::default();
            let c = 0.5 * k.gamma * dt;
            let half = lagged_solve(op, m, c, w, w, held)?;
            let star: Vec<f64> = half.iter().zip(w).map(|(h, w)| 2.0 * h - w).collect();
            check_positive(&star, t + k.gamma * dt)?;
            let rhs: Vec<f64> = star.iter().zip(w).map(|(s, w)| k.a1 * s - k.a0 * w).collect();
            lagged_solve(op, m, k.wd * dt, &star, &rhs, held)?
        }
    };
    check_positive(&next, t + dt)?;
    Ok(next)
}

fn direct_step(op: &ModeOperator, scheme: TimeStepper, cfg: &SolverConfig, u: &[f64], dt: f64, t: f64) -> Result<Vec<f64>> {
    let next = match scheme {
        TimeStepper::BackwardEuler => newton(op, cfg, dt, u, u, t + dt)?,
        TimeStepper::TrBdf2 => {
            // Implicit midpoint in place of the trapezoidal stage: never
            // applies L explicitly to data.
            let k = TrBdf2Coeffs::default();
            let c = 0.5 * k.gamma * dt;
            let half = newton(op, cfg, c, u, u, t + c)?;
            let star: Vec<f64> = half.iter().zip(u).map(|(h, u)| 2.0 * h - u).collect();
            check_positive(&star, t + k.gamma * dt)?;
            let rhs: Vec<f64> = star.iter().zip(u).map(|(s, u)| k.a1 * s - k.a0 * u).collect();
            newton(op, cfg, k.wd * dt, &rhs, &star, t + dt)?
        }
    };
    check_positive(&next, t + dt)?;
    Ok(next)
}

/// Solves `u - kappa L(u^m) = b` starting from `guess`.
///
/// With `D = m u^{m-1}` and `y = D delta` the Newton system is the M-matrix
/// `(D^{-1}/kappa - L) y = -F/kappa`. Iteration stops once the update is
/// below `newton_tol` relative to `u`: near the tip the residual itself has
/// a rounding floor far above the attainable accuracy of `u`.
fn newton(op: &ModeOperator, cfg: &SolverConfig, kappa: f64, b: &[f64], guess: &[f64], t: f64) -> Result<Vec<f64>> {
    let m = cfg.m;
    let mut u = guess.to_vec();
    let last = u.len() - 1;
    if op.is_dirichlet() {
        u[last] = b[last];
    }
    let mut step = f64::INFINITY;
    for _ in 0..cfg.max_newton {
        check_positive(&u, t)?;
        let um: Vec<f64> = u.iter().map(|v| v.powf(m)).collect();
        let lu = op.apply(&um);
        let d: Vec<f64> = u.iter().map(|v| m * v.powf(m - 1.0)).collect();
        let a: Vec<f64> = d.iter().map(|d| 1.0 / (kappa * d)).collect();
        let mut rhs: Vec<f64> = (0..u.len()).map(|i| -(u[i] - b[i] - kappa * lu[i]) / kappa).collect();
        if op.is_dirichlet() {
            rhs[last] = 0.0;
        }
        let y = op.solve_diag_shifted(&a, 1.0, &rhs)?;
        let mut big = 0.0f64;
        step = 0.0;
        for i in 0..u.len() {
            let delta = y[i] / d[i];
            u[i] += delta;
            big = big.max(u[i].abs());
            step = step.max(delta.abs());
        }
        step /= big;
        if !step.is_finite() {
            break;
        }
        if step <= cfg.newton_tol {
            return Ok(u);
        }
    }
    Err(ConeError::NewtonDivergence { t, residual: step })
}
