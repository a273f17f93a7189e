use super::operator::{ConeModel, ModeOperator};
use super::stepper::{linear_step, ShiftedSolve};
use super::{check_initial, componentwise, impose_outer, march, SolverConfig, Trajectory};
use crate::error::Result;
use crate::indicial::Problem;
use crate::meshnorm::ConeField;

/// `A = -L_j`.
impl ShiftedSolve for ModeOperator {
    fn solve_shifted(&self, kappa: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        ModeOperator::solve_shifted(self, kappa, rhs)
    }
}

/// `u' = L u` mode by mode.
pub fn solve_heat(model: &ConeModel, u0: &ConeField, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(model, u0)?;
    let scheme = cfg.stepper_for(Problem::Laplacian);
    let ops: Vec<ModeOperator> = (0..model.spectrum.len()).map(|j| model.operator(j)).collect::<Result<_>>()?;
    let mut start = u0.clone();
    impose_outer(model, &mut start);
    let (slices, dt) = march(&start, cfg, |u, h| {
        componentwise(u, |i, v| linear_step(&ops[u.components[i].mode], scheme, v, None, h))
    })?;
    Ok(Trajectory { problem: Problem::Laplacian, scheme, dt, slices })
}
