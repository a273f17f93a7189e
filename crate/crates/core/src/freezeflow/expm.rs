use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::FrozenOperator;
use crate::error::{invalid, ConeError, Result};
use crate::indicial::Problem;
use crate::meshnorm::ConeField;

/// Largest radial mesh for the dense reference.
pub const MAX_DENSE: usize = 256;

/// `e^{-(t - tau) A_tau} u(tau)` by dense eigendecomposition.
///
/// Every frozen operator is self-adjoint for a diagonal weight (`W` for
/// the heat and fourth-order operators, `W / coeff` for the porous medium
/// one), so `A = S^{-1} Q diag(a) Q^T S` with `S = weight^{1/2}`. A held
/// outer node enters through the steady state of the free block.
pub fn exponential_reference(fr: &FrozenOperator, u_tau: &ConeField, t: f64) -> Result<ConeField> {
    let len = fr.model.mesh.len();
    if len > MAX_DENSE {
        return invalid(format!("dense exponential limited to {MAX_DENSE} nodes, mesh has {len}"));
    }
    let dt = t - fr.tau;
    if dt < 0.0 {
        return invalid("reference requested before tau");
    }
    let mut out = u_tau.clone();
    out.t = t;
    for c in &mut out.components {
        let j = c.mode;
        let op = fr.mode_operator(j);
        let m = op.free();
        let band = fr.matrix(j);
        let a = DMatrix::from_fn(m, m, |r, k| band.get(r, k));
        let weight: Vec<f64> = (0..m)
            .map(|i| match fr.problem {
                Problem::Pme => op.weights[i] / fr.coeff[i],
                _ => op.weights[i],
            })
            .collect();
        let s: Vec<f64> = weight.iter().map(|w| w.sqrt()).collect();
        let sym = DMatrix::from_fn(m, m, |r, k| s[r] * a[(r, k)] / s[k]);
        let sym = (&sym + sym.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);

        // Coupling to a held value: A_fN g enters as a constant source.
        let mut shift = DVector::<f64>::zeros(m);
        if m < c.values.len() {
            let g = c.values[m];
            if g != 0.0 {
                let coupling = -fr.coeff[m - 1] * op.upper[m - 1] * g;
                let mut rhs = DVector::<f64>::zeros(m);
                rhs[m - 1] = -coupling;
                shift = a.clone().lu().solve(&rhs).ok_or_else(|| ConeError::Singular("free block".into()))?;
            }
        }
        let v0 = DVector::from_fn(m, |i, _| (c.values[i] - shift[i]) * s[i]);
        let coef = eig.eigenvectors.transpose() * v0;
        let decayed = DVector::from_fn(m, |i, _| coef[i] * (-dt * eig.eigenvalues[i]).exp());
        let v = &eig.eigenvectors * decayed;
        for i in 0..m {
            c.values[i] = v[i] / s[i] + shift[i];
        }
    }
    Ok(out)
}
