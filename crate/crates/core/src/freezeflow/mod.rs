//! Frozen-coefficient splitting of computed trajectories.
//!
//! For a trajectory `u` of `u' + A(u) u = F` and a freezing time `tau`,
//! `u = v_tau + w_tau` where `v_tau` solves the linear problem with the
//! operator frozen at `tau` and `w_tau` is driven by the forcing
//! `G_tau = (A_tau - A(u)) u + F`.
//!
//! For the porous medium equation the split is applied to the transformed
//! variable `w = u^m`, where the operator is `-m w^{(m-1)/m} L`.

mod decompose;
mod expm;
mod probe;

pub use decompose::{
    decompose, domain_power_check, duhamel_remainder, epsilon_window, remainder, remainder_bound, smooth_part,
    BoundScan, DecomposeOptions, DecompositionReport, PowerCheck, PowerRow, WindowSearch,
};
pub use expm::exponential_reference;
pub use probe::{sample_points, sectorial_probe, uniform_bound_scan, ProbeBlock, ProbeOperator, ProbeReport, ScanRow};

use crate::conesolve::{
    ConeModel, ModeOperator, ModeTransform, ShOperator, ShiftedSolve, SolverConfig, TimeStepper, Trajectory,
    TrBdf2Coeffs,
};
use crate::error::{invalid, ConeError, Result};
use crate::indicial::Problem;
use crate::linalg::{BandLu, Banded};
use crate::meshnorm::ConeField;

/// `A_tau` for one trajectory and freezing time.
#[derive(Debug, Clone)]
pub struct FrozenOperator {
    pub tau: f64,
    pub problem: Problem,
    pub scheme: TimeStepper,
    /// Porous medium: `m w(tau)^{(m-1)/m}` per radial node; ones otherwise.
    pub coeff: Vec<f64>,
    pub model: ConeModel,
    pub config: SolverConfig,
    ops: Vec<ModeOperator>,
    sh: Vec<ShOperator>,
}

/// The variable the split acts on: `u^m` for the porous medium equation,
/// `u` otherwise.
pub fn state(problem: Problem, m: f64, u: &ConeField) -> ConeField {
    let mut s = u.clone();
    if problem == Problem::Pme && m != 1.0 {
        for c in &mut s.components {
            c.values.iter_mut().for_each(|v| *v = v.powf(m));
        }
    }
    s
}

fn pme_coefficient(m: f64, w: &ConeField, t: f64) -> Result<Vec<f64>> {
    if !w.is_axisymmetric() {
        return Err(ConeError::Unsupported("porous medium splitting needs axisymmetric slices".into()));
    }
    let vals = &w.components[0].values;
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(ConeError::PositivityLoss { t, min });
    }
    let e = (m - 1.0) / m;
    Ok(vals.iter().map(|v| m * v.powf(e)).collect())
}

/// Freezes the operator of `traj` at the slice with time stamp `tau`.
pub fn frozen_operator(traj: &Trajectory, tau: f64, model: &ConeModel, config: &SolverConfig) -> Result<FrozenOperator> {
    let slice = &traj.slices[traj.index_of(tau)?];
    frozen_at(slice, traj.problem, traj.scheme, model, config)
}

/// Freezes the operator at a single slice.
pub fn frozen_at(
    slice: &ConeField,
    problem: Problem,
    scheme: TimeStepper,
    model: &ConeModel,
    config: &SolverConfig,
) -> Result<FrozenOperator> {
    config.validate()?;
    if !model.same_mesh(slice) {
        return invalid("slice is not on the model mesh");
    }
    let ops: Vec<ModeOperator> = (0..model.spectrum.len()).map(|j| model.operator(j)).collect::<Result<_>>()?;
    let n = model.mesh.len();
    let (coeff, sh) = match problem {
        Problem::Laplacian => (vec![1.0; n], Vec::new()),
        Problem::Pme => (pme_coefficient(config.m, &state(problem, config.m, slice), slice.t)?, Vec::new()),
        Problem::Sh => (vec![1.0; n], ops.iter().map(ShOperator::new).collect::<Result<_>>()?),
    };
    Ok(FrozenOperator { tau: slice.t, problem, scheme, coeff, model: model.clone(), config: config.clone(), ops, sh })
}

impl FrozenOperator {
    pub fn mode_operator(&self, j: usize) -> &ModeOperator {
        &self.ops[j]
    }

    /// Number of free unknowns of mode `j`.
    pub fn free(&self, j: usize) -> usize {
        self.ops[j].free()
    }

    /// `A_tau` on mode `j` as a band matrix on the free unknowns.
    pub fn matrix(&self, j: usize) -> Banded {
        match self.problem {
            Problem::Sh => self.sh[j].band.clone(),
            _ => {
                let l = self.ops[j].banded();
                let mut a = l.scaled_plus_identity(-1.0, 0.0);
                let m = a.dim();
                for i in 0..m {
                    for c in i.saturating_sub(1)..(i + 2).min(m) {
                        a.set(i, c, a.get(i, c) * self.coeff[i]);
                    }
                }
                a
            }
        }
    }

    /// `A_tau v` per component; zero in held rows.
    pub fn apply(&self, f: &ConeField) -> ConeField {
        let mut out = f.clone();
        for c in &mut out.components {
            c.values = match self.problem {
                Problem::Sh => self.sh[c.mode].apply(&c.values),
                _ => self.ops[c.mode].apply(&c.values).iter().zip(&self.coeff).map(|(l, d)| -d * l).collect(),
            };
        }
        out
    }

    /// `G_tau` at a trajectory slice (in the split variable).
    pub fn forcing(&self, slice: &ConeField) -> Result<ConeField> {
        match self.problem {
            Problem::Laplacian => Ok(slice.zeros_like()),
            Problem::Sh => {
                if self.config.v_is_zero() {
                    return Ok(slice.zeros_like());
                }
                let tr = ModeTransform::for_field(slice)?;
                tr.map_pointwise(slice, |v| self.config.v_eval(v, slice.t))
            }
            Problem::Pme => {
                let w = state(self.problem, self.config.m, slice);
                let d = pme_coefficient(self.config.m, &w, slice.t)?;
                let mut g = w.zeros_like();
                let lw = self.ops[0].apply(&w.components[0].values);
                for i in 0..lw.len() {
                    g.components[0].values[i] = (d[i] - self.coeff[i]) * lw[i];
                }
                Ok(g)
            }
        }
    }

    /// Solvers for `(I + kappa A_tau)` on every mode, for the stage sizes of
    /// one step of length `h`.
    pub(crate) fn solvers(&self, h: f64) -> Result<Vec<FrozenSolver>> {
        let kappas: Vec<f64> = match self.scheme {
            TimeStepper::BackwardEuler => vec![h],
            TimeStepper::TrBdf2 => {
                let k = TrBdf2Coeffs::default();
                vec![0.5 * k.gamma * h, k.wd * h]
            }
        };
        (0..self.ops.len())
            .map(|j| match self.problem {
                Problem::Sh => {
                    let lus = kappas
                        .iter()
                        .map(|&k| Ok((k, self.sh[j].band.scaled_plus_identity(k, 1.0).lu()?)))
                        .collect::<Result<_>>()?;
                    Ok(FrozenSolver::Band { lus, len: self.ops[j].len() })
                }
                _ => Ok(FrozenSolver::Tri { op: self.ops[j].clone(), coeff: self.coeff.clone() }),
            })
            .collect()
    }
}

/// `(I + kappa A_tau)^{-1}` for one mode.
#[derive(Debug, Clone)]
pub(crate) enum FrozenSolver {
    /// `A = -diag(coeff) L`.
    Tri { op: ModeOperator, coeff: Vec<f64> },
    Band { lus: Vec<(f64, BandLu)>, len: usize },
}

impl ShiftedSolve for FrozenSolver {
    fn solve_shifted(&self, kappa: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            FrozenSolver::Tri { op, coeff } => {
                let a: Vec<f64> = coeff.iter().map(|d| 1.0 / (kappa * d)).collect();
                let mut b: Vec<f64> = rhs.iter().zip(&a).map(|(r, a)| r * a).collect();
                if op.is_dirichlet() {
                    *b.last_mut().expect("non-empty") = *rhs.last().expect("non-empty");
                }
                op.solve_diag_shifted(&a, 1.0, &b)
            }
            FrozenSolver::Band { lus, len } => {
                let lu = lus
                    .iter()
                    .find(|(k, _)| *k == kappa)
                    .map(|(_, lu)| lu)
                    .ok_or_else(|| ConeError::Singular(format!("no factorization for kappa = {kappa}")))?;
                let mut u = lu.solve(&rhs[..lu.dim()]);
                u.resize(*len, 0.0);
                Ok(u)
            }
        }
    }
}
