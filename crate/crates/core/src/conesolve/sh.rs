use std::collections::hash_map::{Entry, HashMap};

use super::operator::{ConeModel, ModeOperator};
use super::stepper::{linear_step, ShiftedSolve, TimeStepper, TrBdf2Coeffs};
use super::transform::ModeTransform;
use super::{check_initial, componentwise, impose_outer, march, SolverConfig, Trajectory};
use crate::error::{invalid, ConeError, Result};
use crate::indicial::Problem;
use crate::linalg::{BandLu, Banded};
use crate::meshnorm::ConeField;

/// `(L_j + 1)^2` on the free unknowns of one mode, as a pentadiagonal band.
/// A held outer node carries the value zero.
#[derive(Debug, Clone)]
pub struct ShOperator {
    pub mode: usize,
    pub band: Banded,
    len: usize,
}

impl ShOperator {
    pub fn new(op: &ModeOperator) -> Result<Self> {
        if op.fixed_outer.is_some_and(|g| g != 0.0) {
            return Err(ConeError::Unsupported("the fourth-order solver needs a zero Dirichlet value".into()));
        }
        let b = op.banded().scaled_plus_identity(1.0, 1.0);
        Ok(Self { mode: op.mode, band: b.matmul(&b), len: op.len() })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Factorization of `I + kappa (L+1)^2`.
    pub fn factor(&self, kappa: f64) -> Result<FactoredSh> {
        Ok(FactoredSh { kappas: vec![(kappa, self.band.scaled_plus_identity(kappa, 1.0).lu()?)], len: self.len })
    }

    /// `(L+1)^2 u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.band.matvec(&u[..self.band.dim()]);
        out.resize(self.len, 0.0);
        out
    }
}

/// Cached factorizations of `I + kappa (L+1)^2` for a few values of `kappa`.
#[derive(Debug, Clone)]
pub struct FactoredSh {
    kappas: Vec<(f64, BandLu)>,
    len: usize,
}

impl FactoredSh {
    fn with(mut self, op: &ShOperator, kappa: f64) -> Result<Self> {
        self.kappas.push((kappa, op.band.scaled_plus_identity(kappa, 1.0).lu()?));
        Ok(self)
    }
}

impl ShiftedSolve for FactoredSh {
    fn solve_shifted(&self, kappa: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self
            .kappas
            .iter()
            .find(|(k, _)| *k == kappa)
            .map(|(_, lu)| lu)
            .ok_or_else(|| ConeError::Singular(format!("no factorization for kappa = {kappa}")))?;
        let mut u = lu.solve(&rhs[..lu.dim()]);
        u.resize(self.len, 0.0);
        Ok(u)
    }
}

/// `u' + (L+1)^2 u = V(u, t)`: implicit fourth-order part, explicit `V`
/// evaluated in physical space at the start of each step.
pub fn solve_sh(model: &ConeModel, u0: &ConeField, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(model, u0)?;
    if !cfg.imex_split {
        return invalid("only the IMEX split is implemented for the fourth-order problem");
    }
    let scheme = cfg.stepper_for(Problem::Sh);
    let ops: Vec<ShOperator> =
        (0..model.spectrum.len()).map(|j| ShOperator::new(&model.operator(j)?)).collect::<Result<_>>()?;
    let v_zero = cfg.v_is_zero();
    let transform = if v_zero { None } else { Some(ModeTransform::for_field(u0)?) };
    if let Some(t) = &transform {
        t.to_physical(u0)?;
    }
    let mut start = u0.clone();
    impose_outer(model, &mut start);
    let mut cache: HashMap<u64, Vec<FactoredSh>> = HashMap::new();
    let (slices, dt) = march(&start, cfg, |u, h| {
        if let Entry::Vacant(e) = cache.entry(h.to_bits()) {
            let facs = ops
                .iter()
                .map(|op| match scheme {
                    TimeStepper::BackwardEuler => op.factor(h),
                    TimeStepper::TrBdf2 => {
                        let k = TrBdf2Coeffs::default();
                        op.factor(0.5 * k.gamma * h)?.with(op, k.wd * h)
                    }
                })
                .collect::<Result<_>>()?;
            e.insert(facs);
        }
        let facs = &cache[&h.to_bits()];
        let forcing = match &transform {
            Some(tr) => Some(tr.map_pointwise(u, |v| cfg.v_eval(v, u.t))?),
            None => None,
        };
        let next = componentwise(u, |i, v| {
            let f = forcing.as_ref().map(|f| f.components[i].values.as_slice());
            linear_step(&facs[u.components[i].mode], scheme, v, f, h)
        })?;
        if !next.is_finite() {
            return Err(ConeError::Instability { t: u.t + h, factor: f64::INFINITY });
        }
        if v_zero {
            let (a, b) = (u.max_abs(), next.max_abs());
            if a > 0.0 && b > cfg.growth_limit * a {
                return Err(ConeError::Instability { t: u.t + h, factor: b / a });
            }
        }
        Ok(next)
    })?;
    Ok(Trajectory { problem: Problem::Sh, scheme, dt, slices })
}
