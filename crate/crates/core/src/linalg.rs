//! Small banded solvers used by the radial discretization.
//!
//! The radial operators are tridiagonal M-matrices whose entries span many
//! orders of magnitude near the tip. [`solve_m_tridiag`] eliminates without
//! subtractions so that tiny solution components keep their relative accuracy.

use num_complex::Complex64;

use crate::error::{ConeError, Result};

/// Solves `M x = b` for the tridiagonal M-matrix with off-diagonals
/// `-lower[i]` (column `i-1`) and `-upper[i]` (column `i+1`) and diagonal
/// `excess[i] + lower[i] + upper[i]`.
///
/// `lower[0]` and `upper[K-1]` couple to implicit zero-valued outside nodes;
/// they still count towards the diagonal. All inputs must be non-negative.
pub fn solve_m_tridiag(lower: &[f64], upper: &[f64], excess: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let k = rhs.len();
    debug_assert!(lower.len() == k && upper.len() == k && excess.len() == k);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut dred = vec![0.0; k];
    let mut bred = vec![0.0; k];
    let mut e_prev = excess[0] + lower[0];
    dred[0] = e_prev + upper[0];
    bred[0] = rhs[0];
    if dred[0] <= 0.0 {
        return Err(ConeError::Singular("zero pivot in row 0".into()));
    }
    for i in 1..k {
        let ratio = lower[i] / dred[i - 1];
        let e = excess[i] + lower[i] * (e_prev / dred[i - 1]);
        dred[i] = e + upper[i];
        bred[i] = rhs[i] + ratio * bred[i - 1];
        if !(dred[i] > 0.0) {
            return Err(ConeError::Singular(format!("zero pivot in row {i}")));
        }
        e_prev = e;
    }
    if !(e_prev > 0.0) && upper[k - 1] == 0.0 {
        return Err(ConeError::Singular("M-matrix has no excess (pure Neumann kernel)".into()));
    }
    let mut x = vec![0.0; k];
    x[k - 1] = bred[k - 1] / dred[k - 1];
    for i in (0..k - 1).rev() {
        x[i] = (bred[i] + upper[i] * x[i + 1]) / dred[i];
    }
    Ok(x)
}

/// Square band matrix stored row-wise, `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut b = Self::zeros(n, kl, ku);
        for i in 0..n {
            b.set(i, i, 1.0);
        }
        b
    }

    /// Tridiagonal matrix from its three diagonals (`sub[0]` and `sup[n-1]` ignored).
    pub fn tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        let mut b = Self::zeros(n, 1, 1);
        for i in 0..n {
            b.set(i, i, diag[i]);
            if i > 0 {
                b.set(i, i - 1, sub[i]);
            }
            if i + 1 < n {
                b.set(i, i + 1, sup[i]);
            }
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.cols(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `alpha * self + beta * I`.
    pub fn scaled_plus_identity(&self, alpha: f64, beta: f64) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= alpha;
        }
        for i in 0..self.n {
            let v = out.get(i, i) + beta;
            out.set(i, i, v);
        }
        out
    }

    pub fn matmul(&self, other: &Banded) -> Banded {
        assert_eq!(self.n, other.n);
        let mut out = Banded::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.cols(i) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in other.cols(k) {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Infinity norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.cols(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// LU factorization without pivoting. Intended for matrices that are
    /// diagonally dominant or symmetrizable positive definite.
    pub fn lu(&self) -> Result<BandLu> {
        let mut a = self.clone();
        let n = self.n;
        for k in 0..n {
            let pivot = a.get(k, k);
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(ConeError::Singular(format!("zero pivot at band row {k}")));
            }
            let imax = (k + self.kl + 1).min(n);
            let jmax = (k + self.ku + 1).min(n);
            for i in k + 1..imax {
                let l = a.get(i, k) / pivot;
                a.set(i, k, l);
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..jmax {
                    let v = a.get(i, j) - l * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
        Ok(BandLu { lu: a })
    }
}

/// Factorized band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    lu: Banded,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let a = &self.lu;
        let n = a.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(a.kl);
            let mut s = y[i];
            for (j, yj) in y.iter().enumerate().take(i).skip(lo) {
                s -= a.get(i, j) * yj;
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + a.ku + 1).min(n);
            let mut s = y[i];
            for (j, yj) in y.iter().enumerate().take(hi).skip(i + 1) {
                s -= a.get(i, j) * yj;
            }
            y[i] = s / a.get(i, i);
        }
        y
    }
}

/// Complex tridiagonal LU with partial pivoting (the `gttrf` scheme).
#[derive(Debug, Clone)]
pub struct ComplexTridiagLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swap: Vec<bool>,
}

impl ComplexTridiagLu {
    /// `sub[i]` is entry `(i+1, i)`, `sup[i]` is entry `(i, i+1)`; both have length `n-1`.
    pub fn factor(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i].norm() != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swap[i] = true;
            }
        }
        if let Some(i) = d.iter().position(|v| v.norm() == 0.0 || !v.norm().is_finite()) {
            return Err(ConeError::Singular(format!("complex tridiagonal pivot {i} vanishes")));
        }
        Ok(Self { dl, d, du, du2, swap })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if !self.swap[i] {
                let t = self.dl[i] * x[i];
                x[i + 1] -= t;
            } else {
                let temp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = temp - self.dl[i] * x[i];
            }
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }

    /// Solves with the conjugate transpose.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.d.len();
        let mut x = b.to_vec();
        x[0] /= self.d[0].conj();
        if n > 1 {
            x[1] = (x[1] - self.du[0].conj() * x[0]) / self.d[1].conj();
        }
        for i in 2..n {
            x[i] = (x[i] - self.du[i - 1].conj() * x[i - 1] - self.du2[i - 2].conj() * x[i - 2])
                / self.d[i].conj();
        }
        for i in (0..n.saturating_sub(1)).rev() {
            if !self.swap[i] {
                let t = self.dl[i].conj() * x[i + 1];
                x[i] -= t;
            } else {
                let temp = x[i + 1];
                x[i + 1] = x[i] - self.dl[i].conj() * temp;
                x[i] = temp;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn dense_from_m(lower: &[f64], upper: &[f64], excess: &[f64]) -> DMatrix<f64> {
        let k = excess.len();
        DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                excess[i] + lower[i] + upper[i]
            } else if j + 1 == i {
                -lower[i]
            } else if j == i + 1 {
                -upper[i]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn m_tridiag_matches_dense_solve() {
        let lower = [0.0, 2.0, 1.0, 0.5, 3.0];
        let upper = [1.0, 0.5, 2.0, 1.0, 0.0];
        let excess = [0.1, 0.0, 0.3, 0.0, 1.0];
        let rhs = [1.0, -2.0, 0.5, 3.0, 1.0];
        let x = solve_m_tridiag(&lower, &upper, &excess, &rhs).unwrap();
        let m = dense_from_m(&lower, &upper, &excess);
        let r = &m * DVector::from_column_slice(&x) - DVector::from_column_slice(&rhs);
        assert!(r.amax() < 1e-13, "{r}");
    }

    #[test]
    fn m_tridiag_keeps_tiny_components_accurate() {
        // Graded chain: couplings 1e20 near node 0, positive right-hand side.
        let k = 60;
        let lower: Vec<f64> = (0..k).map(|i| if i == 0 { 0.0 } else { 10f64.powf(20.0 - i as f64 / 3.0) }).collect();
        let upper: Vec<f64> = (0..k).map(|i| if i + 1 == k { 0.0 } else { 10f64.powf(20.0 - i as f64 / 3.0) }).collect();
        let excess: Vec<f64> = (0..k).map(|i| if i + 1 == k { 1.0 } else { 1e-30 * (i as f64 + 1.0) }).collect();
        let rhs: Vec<f64> = vec![1.0; k];
        let x = solve_m_tridiag(&lower, &upper, &excess, &rhs).unwrap();
        assert!(x.iter().all(|v| *v > 0.0));
        // Residual per row relative to the row's own magnitude.
        for i in 0..k {
            let mut ax = (excess[i] + lower[i] + upper[i]) * x[i];
            let mut mag = ax.abs();
            if i > 0 {
                ax -= lower[i] * x[i - 1];
                mag += (lower[i] * x[i - 1]).abs();
            }
            if i + 1 < k {
                ax -= upper[i] * x[i + 1];
                mag += (upper[i] * x[i + 1]).abs();
            }
            assert!((ax - rhs[i]).abs() <= 1e-12 * mag.max(1.0), "row {i}");
        }
    }

    #[test]
    fn m_tridiag_reports_pure_neumann_kernel() {
        let lower = [0.0, 1.0, 1.0];
        let upper = [1.0, 1.0, 0.0];
        let excess = [0.0, 0.0, 0.0];
        assert!(solve_m_tridiag(&lower, &upper, &excess, &[1.0, 0.0, -1.0]).is_err());
    }

    #[test]
    fn band_lu_solves_pentadiagonal() {
        let t = Banded::tridiagonal(&[0.0, -1.0, -1.0, -1.0, -1.0, -1.0], &[3.0; 6], &[-1.0, -1.0, -1.0, -1.0, -1.0, 0.0]);
        let p = t.matmul(&t).scaled_plus_identity(0.5, 1.0);
        assert_eq!(p.bandwidths(), (2, 2));
        let x_true = vec![1.0, -2.0, 3.0, 0.5, 0.25, -1.0];
        let b = p.matvec(&x_true);
        let x = p.lu().unwrap().solve(&b);
        for (a, e) in x.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_tridiag_solves_and_adjoint_solves() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let sub = vec![c(5.0, 1.0), c(-1.0, 0.0), c(0.2, -3.0), c(1.0, 1.0)];
        let diag = vec![c(0.1, 0.0), c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 0.1), c(2.0, 0.0)];
        let sup = vec![c(1.0, 0.0), c(2.0, -1.0), c(0.5, 0.5), c(-4.0, 0.0)];
        let n = diag.len();
        let dense = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i == j + 1 {
                sub[j]
            } else if j == i + 1 {
                sup[i]
            } else {
                c(0.0, 0.0)
            }
        });
        let lu = ComplexTridiagLu::factor(&sub, &diag, &sup).unwrap();
        let b: Vec<Complex64> = (0..n).map(|i| c(i as f64 + 1.0, 1.0 - i as f64)).collect();
        let x = lu.solve(&b);
        let r = &dense * DVector::from_vec(x) - DVector::from_vec(b.clone());
        assert!(r.camax() < 1e-12);
        let y = lu.solve_adjoint(&b);
        let r = dense.adjoint() * DVector::from_vec(y) - DVector::from_vec(b);
        assert!(r.camax() < 1e-12);
    }
}
