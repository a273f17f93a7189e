use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{frozen_operator, FrozenOperator};
use crate::conesolve::{ConeModel, SolverConfig, Trajectory};
use crate::error::{invalid, ConeError, Result};
use crate::indicial::Problem;
use crate::linalg::{solve_m_tridiag, Banded, ComplexTridiagLu};

/// Blocks up to this size use a dense singular value decomposition.
pub const DENSE_LIMIT: usize = 256;
/// Tridiagonal blocks up to this size use a dense SVD; everything else uses
/// power iteration on an LU factorisation.
const TRIDIAG_DENSE_LIMIT: usize = 64;
const POWER_ITERS: usize = 500;
const POWER_TOL: f64 = 1e-12;

/// Exact M-matrix form `diag(excess + lower + upper) - lower shift - upper shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct MParts {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub excess: Vec<f64>,
}

/// One diagonal block of a block-diagonal operator, with the weights of the
/// inner product `sum w_i u_i v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBlock {
    pub label: String,
    pub matrix: Banded,
    pub weights: Vec<f64>,
    /// Exact splitting for tridiagonal M-matrix blocks; used to detect
    /// singularity on the real axis without cancellation.
    pub mparts: Option<MParts>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOperator {
    pub blocks: Vec<ProbeBlock>,
}

impl ProbeOperator {
    /// Diagonal matrix with unit weights.
    pub fn from_diagonal(d: &[f64]) -> Self {
        let zeros = vec![0.0; d.len()];
        let block = ProbeBlock {
            label: "diag".into(),
            matrix: Banded::tridiagonal(&zeros, d, &zeros),
            weights: vec![1.0; d.len()],
            mparts: None,
        };
        Self { blocks: vec![block] }
    }

    /// `A_tau` mode by mode, in the weighted `L^2` norm with weight
    /// `x^{(n+1)/2 - gamma}` against `dx/x`.
    pub fn from_frozen(fr: &FrozenOperator, gamma: f64) -> Self {
        let x = fr.model.mesh.nodes();
        let blocks = (0..fr.model.spectrum.len())
            .map(|j| {
                let op = fr.mode_operator(j);
                let m = op.free();
                let weights = (0..m).map(|i| op.weights[i] * x[i].powf(-2.0 * gamma)).collect();
                let mparts = (fr.problem != Problem::Sh).then(|| {
                    let d = &fr.coeff[..m];
                    MParts {
                        lower: (0..m).map(|i| if i > 0 { d[i] * op.lower[i] } else { 0.0 }).collect(),
                        upper: (0..m).map(|i| if i + 1 < op.len() { d[i] * op.upper[i] } else { 0.0 }).collect(),
                        excess: (0..m).map(|i| d[i] * op.excess[i]).collect(),
                    }
                });
                ProbeBlock { label: format!("mode{j}"), matrix: fr.matrix(j), weights, mparts }
            })
            .collect();
        Self { blocks }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub theta: f64,
    pub shift: f64,
    pub k_est: f64,
    /// `lambda` (re, im) attaining `k_est`.
    pub worst: [f64; 2],
    /// `(re, im, (1 + |lambda|) ||(A + c + lambda)^{-1}||)` per sample.
    pub samples: Vec<[f64; 3]>,
}

/// Sample points: `0` and `r e^{+-i theta}` with `r` log-spaced in `[1e-3, 1e6]`.
pub fn sample_points(theta: f64, samples: usize) -> Vec<Complex64> {
    let per_ray = ((samples.saturating_sub(1)) / 2).max(1);
    let mut out = vec![Complex64::new(0.0, 0.0)];
    for k in 0..per_ray {
        let e = if per_ray == 1 { -3.0 } else { -3.0 + 9.0 * k as f64 / (per_ray - 1) as f64 };
        let r = 10f64.powf(e);
        out.push(Complex64::from_polar(r, theta));
        out.push(Complex64::from_polar(r, -theta));
    }
    out
}

/// `sup (1 + |lambda|) ||(A + c + lambda)^{-1}||` over rays `arg lambda = +-theta`
/// and `lambda = 0`, in the block weights' operator norm.
pub fn sectorial_probe(op: &ProbeOperator, theta: f64, shift: f64, samples: usize) -> Result<ProbeReport> {
    use std::f64::consts::{FRAC_PI_2, PI};
    if !(theta > FRAC_PI_2 && theta < PI) {
        return invalid(format!("theta must lie in (pi/2, pi), got {theta}"));
    }
    if !(shift >= 0.0) || !shift.is_finite() {
        return invalid(format!("shift must be non-negative, got {shift}"));
    }
    if samples < 3 {
        return invalid("at least 3 samples are needed");
    }
    for b in &op.blocks {
        check_sector(b, theta, shift)?;
    }
    let points = sample_points(theta, samples);
    let vals: Vec<f64> = points
        .par_iter()
        .map(|&lam| {
            let z = lam + shift;
            let mut worst: f64 = 0.0;
            for b in &op.blocks {
                worst = worst.max(block_resolvent_norm(b, z).map_err(|e| match e {
                    ConeError::Singular(_) => ConeError::SingularResolvent { re: lam.re, im: lam.im },
                    other => other,
                })?);
            }
            Ok((1.0 + lam.norm()) * worst)
        })
        .collect::<Result<_>>()?;
    let (mut k_est, mut worst) = (0.0, [0.0, 0.0]);
    for (p, v) in points.iter().zip(&vals) {
        if *v > k_est {
            k_est = *v;
            worst = [p.re, p.im];
        }
    }
    Ok(ProbeReport {
        theta,
        shift,
        k_est,
        worst,
        samples: points.iter().zip(&vals).map(|(p, v)| [p.re, p.im, *v]).collect(),
    })
}

/// Rejects spectra reaching into `-closure(sector)`: exact M-matrix test on
/// the real axis, dense eigenvalues for small blocks.
fn check_sector(b: &ProbeBlock, theta: f64, shift: f64) -> Result<()> {
    if let Some(mp) = &b.mparts {
        let excess: Vec<f64> = mp.excess.iter().map(|e| e + shift).collect();
        let probe = vec![1.0; excess.len()];
        if solve_m_tridiag(&mp.lower, &mp.upper, &excess, &probe).is_err() {
            return Err(ConeError::SingularResolvent { re: 0.0, im: 0.0 });
        }
        // A non-singular M-matrix that is symmetrizable has positive real
        // spectrum; a dense test would drown in the tip rows' scale.
        return Ok(());
    }
    let n = b.matrix.dim();
    if n > DENSE_LIMIT {
        return Ok(());
    }
    let a = DMatrix::from_fn(n, n, |r, c| b.matrix.get(r, c) + if r == c { shift } else { 0.0 });
    if numerically_singular(&a.map(|v| Complex64::new(v, 0.0))) {
        return Err(ConeError::SingularResolvent { re: 0.0, im: 0.0 });
    }
    for z in a.complex_eigenvalues().iter() {
        // lambda = -z lies in the sector iff |arg z| >= pi - theta.
        if z.im.atan2(z.re).abs() >= std::f64::consts::PI - theta - 1e-12 {
            return Err(ConeError::SpectrumInSector(z.re));
        }
    }
    Ok(())
}

/// `||(A + z)^{-1}||` in the block's weighted norm.
fn block_resolvent_norm(b: &ProbeBlock, z: Complex64) -> Result<f64> {
    let n = b.matrix.dim();
    let s: Vec<f64> = b.weights.iter().map(|w| w.sqrt()).collect();
    let entry = |r: usize, c: usize| -> Complex64 {
        let v = Complex64::new(b.matrix.get(r, c) * s[r] / s[c], 0.0);
        if r == c {
            v + z
        } else {
            v
        }
    };
    let (kl, ku) = b.matrix.bandwidths();
    let tridiagonal = kl <= 1 && ku <= 1;
    // Wider (fourth-order) blocks span ~17 orders of magnitude on graded
    // meshes; a dense SVD cannot resolve their smallest singular value.
    if tridiagonal && n <= TRIDIAG_DENSE_LIMIT {
        let m = DMatrix::from_fn(n, n, entry);
        let sv = m.singular_values();
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        if !(smin > 0.0) || (b.mparts.is_none() && !(smin > 1e-14 * smax) && numerically_singular(&unscaled(b, z))) {
            return Err(ConeError::Singular("resolvent".into()));
        }
        return Ok(1.0 / smin);
    }
    if tridiagonal {
        let sub: Vec<Complex64> = (0..n - 1).map(|i| entry(i + 1, i)).collect();
        let diag: Vec<Complex64> = (0..n).map(|i| entry(i, i)).collect();
        let sup: Vec<Complex64> = (0..n - 1).map(|i| entry(i, i + 1)).collect();
        let lu = ComplexTridiagLu::factor(&sub, &diag, &sup)?;
        power_norm(n, |x| lu.solve(x), |x| lu.solve_adjoint(x))
    } else {
        // Wider bands (fourth-order blocks): dense LU.
        let m = DMatrix::from_fn(n, n, entry);
        let adj = m.adjoint().lu();
        let lu = m.lu();
        let apply = |f: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>, x: &[Complex64]| {
            f.solve(&nalgebra::DVector::from_column_slice(x))
                .map(|v| v.as_slice().to_vec())
                .unwrap_or_else(|| vec![Complex64::new(f64::NAN, 0.0); x.len()])
        };
        power_norm(n, |x| apply(&lu, x), |x| apply(&adj, x))
    }
}

/// `A + z` without the weight similarity; same singularity, better row balance.
fn unscaled(b: &ProbeBlock, z: Complex64) -> DMatrix<Complex64> {
    let n = b.matrix.dim();
    DMatrix::from_fn(n, n, |r, c| Complex64::new(b.matrix.get(r, c), 0.0) + if r == c { z } else { Complex64::new(0.0, 0.0) })
}

/// Rank test after scaling each row to unit max norm, so that graded
/// fourth-order rows near the tip do not mask a well-posed block.
fn numerically_singular(m: &DMatrix<Complex64>) -> bool {
    let mut e = m.clone();
    for mut row in e.row_iter_mut() {
        let big = row.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if big == 0.0 {
            return true;
        }
        row /= Complex64::new(big, 0.0);
    }
    let sv = e.singular_values();
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    !(smin > 1e-13 * smax)
}

/// `||M^{-1}||_2` by power iteration on `M^{-H} M^{-1}`.
fn power_norm(n: usize, solve: impl Fn(&[Complex64]) -> Vec<Complex64>, solve_adj: impl Fn(&[Complex64]) -> Vec<Complex64>) -> Result<f64> {
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    // Deterministic start with components in every mode.
    let mut x: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + 0.37 * ((i * 7919) % 101) as f64 / 101.0, 0.0)).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|c| *c /= nx);
    let mut prev = 0.0;
    for _ in 0..POWER_ITERS {
        let y = solve(&x);
        let zv = solve_adj(&y);
        let est = norm(&y);
        if !est.is_finite() {
            return Err(ConeError::Singular("resolvent".into()));
        }
        let nz = norm(&zv);
        x = zv.into_iter().map(|c| c / nz).collect();
        if (est - prev).abs() <= POWER_TOL * est {
            return Ok(est);
        }
        prev = est;
    }
    Ok(prev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub t: f64,
    /// Smallest shift from `{0, 1, 2, 4, ...}` with a finite probe.
    pub c_needed: Option<f64>,
    pub k_est: Option<f64>,
    pub error: Option<String>,
}

/// Shifts in the uniform-boundedness scan.
pub const SHIFT_GRID: [f64; 12] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0];

/// Per time stamp: the smallest grid shift making the probe finite.
#[allow(clippy::too_many_arguments)]
pub fn uniform_bound_scan(
    traj: &Trajectory,
    model: &ConeModel,
    cfg: &SolverConfig,
    times: &[f64],
    theta: f64,
    gamma: f64,
    samples: usize,
) -> Result<Vec<ScanRow>> {
    times
        .iter()
        .map(|&t| {
            let fr = match frozen_operator(traj, t, model, cfg) {
                Ok(fr) => fr,
                Err(e @ ConeError::TimeMismatch(_)) => return Err(e),
                Err(e) => return Ok(ScanRow { t, c_needed: None, k_est: None, error: Some(e.to_string()) }),
            };
            let op = ProbeOperator::from_frozen(&fr, gamma);
            let mut last_err = String::new();
            for c in SHIFT_GRID {
                match sectorial_probe(&op, theta, c, samples) {
                    Ok(r) => return Ok(ScanRow { t, c_needed: Some(c), k_est: Some(r.k_est), error: None }),
                    Err(e @ ConeError::InvalidInput(_)) => return Err(e),
                    Err(e) => last_err = e.to_string(),
                }
            }
            Ok(ScanRow { t, c_needed: None, k_est: None, error: Some(last_err) })
        })
        .collect()
}
