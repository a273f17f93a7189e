use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `2 - sqrt(2)`: the TR-BDF2 stage fraction that makes both stages share a
/// Jacobian scaling.
pub const TRBDF2_GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStepper {
    BackwardEuler,
    #[serde(rename = "trbdf2")]
    TrBdf2,
}

impl TimeStepper {
    pub fn label(&self) -> &'static str {
        match self {
            TimeStepper::BackwardEuler => "backward_euler",
            TimeStepper::TrBdf2 => "trbdf2",
        }
    }

    /// Formal order of accuracy.
    pub fn order(&self) -> usize {
        match self {
            TimeStepper::BackwardEuler => 1,
            TimeStepper::TrBdf2 => 2,
        }
    }
}

/// Stage coefficients of TR-BDF2.
#[derive(Debug, Clone, Copy)]
pub struct TrBdf2Coeffs {
    pub gamma: f64,
    /// Implicit weight of the BDF2 stage (times `dt`).
    pub wd: f64,
    /// `u^{n+1} = a1 u* - a0 u^n + wd dt (...)`.
    pub a1: f64,
    pub a0: f64,
}

impl Default for TrBdf2Coeffs {
    fn default() -> Self {
        let g = TRBDF2_GAMMA;
        Self { gamma: g, wd: (1.0 - g) / (2.0 - g), a1: 1.0 / (g * (2.0 - g)), a0: (1.0 - g).powi(2) / (g * (2.0 - g)) }
    }
}

/// Per-component linear operator `A` (the generator is `-A`) that can solve
/// `(I + kappa A) u = rhs`.
pub trait ShiftedSolve {
    fn solve_shifted(&self, kappa: f64, rhs: &[f64]) -> Result<Vec<f64>>;
}

/// One step of `u' + A u = f` with `f` frozen at the start of the step.
///
/// The trapezoidal stage is computed as `2 (I + c A)^{-1}(u + c f) - u`, which
/// equals `(I + cA)^{-1}((I - cA) u + 2c f)` without ever applying `A`.
pub fn linear_step<S: ShiftedSolve + ?Sized>(
    op: &S,
    scheme: TimeStepper,
    u: &[f64],
    f: Option<&[f64]>,
    dt: f64,
) -> Result<Vec<f64>> {
    match scheme {
        TimeStepper::BackwardEuler => {
            let rhs: Vec<f64> = match f {
                Some(f) => u.iter().zip(f).map(|(a, b)| a + dt * b).collect(),
                None => u.to_vec(),
            };
            op.solve_shifted(dt, &rhs)
        }
        TimeStepper::TrBdf2 => {
            let k = TrBdf2Coeffs::default();
            let c = 0.5 * k.gamma * dt;
            let rhs: Vec<f64> = match f {
                Some(f) => u.iter().zip(f).map(|(a, b)| a + c * b).collect(),
                None => u.to_vec(),
            };
            let half = op.solve_shifted(c, &rhs)?;
            let star: Vec<f64> = half.iter().zip(u).map(|(h, u)| 2.0 * h - u).collect();
            let rhs2: Vec<f64> = match f {
                Some(f) => (0..u.len()).map(|i| k.a1 * star[i] - k.a0 * u[i] + k.wd * dt * f[i]).collect(),
                None => (0..u.len()).map(|i| k.a1 * star[i] - k.a0 * u[i]).collect(),
            };
            op.solve_shifted(k.wd * dt, &rhs2)
        }
    }
}

/// Sub-steps needed to reach each output time with steps no longer than `dt`.
///
/// Returns `(t_start, t_end, n_steps)` per segment; uniform steps inside a segment.
pub fn plan_segments(times: &[f64], dt: f64) -> Result<Vec<(f64, f64, usize)>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return invalid(format!("dt must be positive, got {dt}"));
    }
    if times.is_empty() {
        return invalid("at least one output time is required");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
        return invalid("output times must be non-negative and strictly increasing");
    }
    let mut out = Vec::new();
    let mut t = 0.0;
    for &target in times {
        let span = target - t;
        let n = if span <= 0.0 { 0 } else { ((span / dt) - 1e-9).ceil().max(1.0) as usize };
        out.push((t, target, n));
        t = target;
    }
    Ok(out)
}
