use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operator::{radial_operator, ConeModel, ModeOperator};
use crate::error::{invalid, ConeError, Result};

const MAX_ITER: usize = 2000;
const TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// Eigenvalue of `-L_j`.
    pub mu: f64,
    /// Weighted-unit eigenvector on all nodes (zero at a held outer node).
    pub vector: Vec<f64>,
}

/// The `count` smallest eigenvalues of `-L_j` with homogeneous outer conditions.
pub fn mode_eigenpairs(model: &ConeModel, j: usize, count: usize) -> Result<Vec<EigenPair>> {
    if j >= model.spectrum.len() {
        return invalid(format!("mode {j} beyond spectrum cutoff {}", model.spectrum.l_max));
    }
    let fixed = model.boundary_value(j).map(|_| 0.0);
    let op = radial_operator(&model.mesh, model.n(), model.spectrum.lambda(j), j, fixed);
    operator_eigenpairs(&op, count)
}

/// Subspace inverse iteration on `(sigma - L)^{-1}` in the weighted inner
/// product, with Rayleigh-Ritz on every sweep. Only tridiagonal M-matrix
/// solves are used, so no product with the stiff tip rows is ever formed.
pub fn operator_eigenpairs(op: &ModeOperator, count: usize) -> Result<Vec<EigenPair>> {
    let m = op.free();
    if count == 0 || count > m {
        return invalid(format!("cannot compute {count} eigenpairs of a {m}-node operator"));
    }
    let sigma = if op.is_dirichlet() { 0.0 } else { 1.0 };
    let p = (count + 4).min(m);
    let shift = vec![sigma; op.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + op.mode as u64);
    let mut q: Vec<Vec<f64>> = (0..p).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    orthonormalize(op, &mut q)?;

    let mut prev = vec![f64::INFINITY; count];
    for _ in 0..MAX_ITER {
        let y = apply_inverse(op, &shift, &q)?;
        let (theta, vecs) = ritz(op, &q, &y);
        let mu: Vec<f64> = theta.iter().take(count).map(|t| 1.0 / t - sigma).collect();
        let converged = mu.iter().zip(&prev).all(|(a, b)| (a - b).abs() <= TOL * a.abs().max(1.0));
        prev = mu;
        if converged {
            let pairs = (0..count)
                .map(|c| {
                    let mut v = vec![0.0; op.len()];
                    for (k, qk) in q.iter().enumerate() {
                        for i in 0..m {
                            v[i] += vecs[(k, c)] * qk[i];
                        }
                    }
                    let big = v.iter().fold(0.0f64, |a, &b| if b.abs() > a.abs() { b } else { a });
                    if big < 0.0 {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                    EigenPair { mu: prev[c], vector: v }
                })
                .collect();
            return Ok(pairs);
        }
        // Next basis: Ritz combination of the inverse iterates.
        let mut next = vec![vec![0.0; m]; p];
        for c in 0..p {
            for (k, yk) in y.iter().enumerate() {
                let w = vecs[(k, c)];
                for i in 0..m {
                    next[c][i] += w * yk[i];
                }
            }
        }
        q = next;
        orthonormalize(op, &mut q)?;
    }
    Err(ConeError::EigenNoConvergence(MAX_ITER))
}

fn apply_inverse(op: &ModeOperator, shift: &[f64], q: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = op.free();
    q.iter()
        .map(|col| {
            let mut rhs = col.clone();
            rhs.resize(op.len(), 0.0);
            let mut y = op.solve_diag_shifted(shift, 1.0, &rhs)?;
            y.truncate(m);
            Ok(y)
        })
        .collect()
}

/// Ritz values (descending) and coefficient vectors of `Q^T W Y`.
fn ritz(op: &ModeOperator, q: &[Vec<f64>], y: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let p = q.len();
    let mut h = DMatrix::<f64>::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            h[(a, b)] = op.inner(&q[a], &y[b]);
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let theta = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    (theta, vecs)
}

/// Modified Gram-Schmidt, applied twice, in the weighted inner product.
fn orthonormalize(op: &ModeOperator, q: &mut [Vec<f64>]) -> Result<()> {
    for _ in 0..2 {
        for c in 0..q.len() {
            for k in 0..c {
                let d = op.inner(&q[c], &q[k]);
                let (head, tail) = q.split_at_mut(c);
                for (a, b) in tail[0].iter_mut().zip(&head[k]) {
                    *a -= d * b;
                }
            }
            let nrm = op.inner(&q[c], &q[c]).sqrt();
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(ConeError::Singular("eigen basis collapsed".into()));
            }
            q[c].iter_mut().for_each(|v| *v /= nrm);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conesolve::OuterBc;
    use crate::meshnorm::RadialMesh;
    use crate::spectrum::CrossSection;

    fn model(bc: OuterBc, n_int: usize) -> ConeModel {
        ConeModel::new(CrossSection::Circle { a: 1.0 }, 2, RadialMesh::geometric(n_int, 1e-6).unwrap(), bc).unwrap()
    }

    #[test]
    fn neumann_ground_state_is_constant() {
        let m = model(OuterBc::Neumann, 200);
        let e = mode_eigenpairs(&m, 0, 2).unwrap();
        assert!(e[0].mu.abs() < 1e-10);
        let v0 = e[0].vector[0];
        assert!(e[0].vector.iter().all(|v| (v - v0).abs() < 1e-8 * v0.abs()));
    }

    #[test]
    fn dirichlet_first_eigenvalue_near_bessel_zero() {
        let m = model(OuterBc::Dirichlet { value: 0.0 }, 800);
        let e = mode_eigenpairs(&m, 0, 1).unwrap();
        let j01: f64 = 2.404_825_557_695_77;
        assert!((e[0].mu / (j01 * j01) - 1.0).abs() < 1e-3, "{}", e[0].mu);
        assert_eq!(*e[0].vector.last().unwrap(), 0.0);
    }

    #[test]
    fn eigenvectors_are_weighted_orthonormal() {
        let m = model(OuterBc::Dirichlet { value: 0.0 }, 300);
        let op = m.operator(1).unwrap();
        let e = operator_eigenpairs(&op, 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let d = op.inner(&e[a].vector, &e[b].vector);
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
        // -L v = mu v away from the tip rows.
        let lv = op.apply(&e[0].vector);
        let i = op.len() / 2;
        assert!((lv[i] + e[0].mu * e[0].vector[i]).abs() < 1e-6 * e[0].mu * e[0].vector[i].abs());
    }
}
