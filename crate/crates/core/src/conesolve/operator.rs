use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{solve_m_tridiag, Banded};
use crate::meshnorm::{ConeField, Grading, RadialMesh, DEFAULT_X0};
use crate::spectrum::{CrossSection, ModeSpectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OuterBc {
    /// `u = value` at `x = 1` (constant in `y`; other components vanish there).
    Dirichlet { value: f64 },
    /// Zero radial flux at `x = 1`.
    Neumann,
}

impl OuterBc {
    pub fn label(&self) -> &'static str {
        match self {
            OuterBc::Dirichlet { .. } => "dirichlet",
            OuterBc::Neumann => "neumann",
        }
    }
}

/// Serializable mesh description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grading", rename_all = "snake_case")]
pub enum MeshSpec {
    Geometric {
        intervals: usize,
        #[serde(default = "default_x0")]
        x0: f64,
    },
    PowerLaw {
        intervals: usize,
        beta: f64,
    },
}

fn default_x0() -> f64 {
    DEFAULT_X0
}

impl MeshSpec {
    pub fn build(&self) -> Result<RadialMesh> {
        match *self {
            MeshSpec::Geometric { intervals, x0 } => RadialMesh::geometric(intervals, x0),
            MeshSpec::PowerLaw { intervals, beta } => RadialMesh::power_law(intervals, beta),
        }
    }
}

/// Serializable description of a straight model cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub cross_section: CrossSection,
    /// Spectrum cutoff; ignored for custom cross sections.
    pub l_max: usize,
    pub mesh: MeshSpec,
    pub outer_bc: OuterBc,
}

impl ModelSpec {
    pub fn build(&self) -> Result<ConeModel> {
        ConeModel::new(self.cross_section.clone(), self.l_max, self.mesh.build()?, self.outer_bc)
    }
}

/// The straight cone `(0, 1] x cross section` with metric `dx^2 + x^2 h`, `h` constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeModel {
    pub cross_section: Arc<CrossSection>,
    pub spectrum: ModeSpectrum,
    pub mesh: Arc<RadialMesh>,
    pub outer_bc: OuterBc,
}

impl ConeModel {
    pub fn new(cs: CrossSection, l_max: usize, mesh: RadialMesh, outer_bc: OuterBc) -> Result<Self> {
        let spectrum = cs.spectrum(l_max)?;
        Ok(Self { cross_section: Arc::new(cs), spectrum, mesh: Arc::new(mesh), outer_bc })
    }

    pub fn n(&self) -> usize {
        self.cross_section.dim()
    }

    pub fn zeros(&self) -> ConeField {
        ConeField::zeros(self.mesh.clone(), self.cross_section.clone(), &self.spectrum)
    }

    /// Constant field `c`.
    pub fn constant(&self, c: f64) -> ConeField {
        let mut f = self.zeros();
        f.components[0].values.iter_mut().for_each(|v| *v = c);
        f
    }

    pub fn operator(&self, j: usize) -> Result<ModeOperator> {
        assemble_mode_operator(self, j)
    }

    /// Outer value imposed on a component with eigenvalue index `j`.
    pub fn boundary_value(&self, j: usize) -> Option<f64> {
        match self.outer_bc {
            OuterBc::Dirichlet { value } => Some(if j == 0 { value } else { 0.0 }),
            OuterBc::Neumann => None,
        }
    }

    pub fn same_mesh(&self, f: &ConeField) -> bool {
        Arc::ptr_eq(&self.mesh, &f.mesh) || *self.mesh == *f.mesh
    }

    /// Grading label for reports.
    pub fn grading_label(&self) -> String {
        match self.mesh.grading {
            Grading::Geometric { ratio } => format!("geometric(r={ratio})"),
            Grading::PowerLaw { beta } => format!("power_law(beta={beta})"),
        }
    }
}

/// Flux-form discretization of `L_j = x^{-2}((x d_x)^2 + (n-1) x d_x + lambda_j)`
/// in `s = log x`:
///
/// `(L u)_i = lower_i (u_{i-1} - u_i) + upper_i (u_{i+1} - u_i) - excess_i u_i`.
///
/// Face fluxes use `x_{i+1/2} = sqrt(x_i x_{i+1})` and the cell weight is
/// `w_i = x_i^{n+1} H_i` with `H_i` the dual cell width, so `w_i L_ij` is
/// symmetric. No condition is imposed at `x_0`: the inner face carries zero
/// flux. With a Dirichlet outer condition the last node is held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    pub mode: usize,
    pub lambda: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub excess: Vec<f64>,
    /// Mass weights `x_i^{n+1} H_i` (discrete `x^n dx`).
    pub weights: Vec<f64>,
    /// Held value at `x = 1`, if any.
    pub fixed_outer: Option<f64>,
}

pub fn assemble_mode_operator(model: &ConeModel, j: usize) -> Result<ModeOperator> {
    if j >= model.spectrum.len() {
        return invalid(format!("mode {j} beyond spectrum cutoff {}", model.spectrum.l_max));
    }
    let lambda = model.spectrum.lambda(j);
    Ok(radial_operator(&model.mesh, model.n(), lambda, j, model.boundary_value(j)))
}

/// Operator for an explicit eigenvalue; `fixed_outer` selects Dirichlet.
pub fn radial_operator(mesh: &RadialMesh, n: usize, lambda: f64, mode: usize, fixed_outer: Option<f64>) -> ModeOperator {
    let x = mesh.nodes();
    let s = mesh.log_nodes();
    let k = x.len();
    let nm1 = n as i32 - 1;
    let flux: Vec<f64> = (0..k - 1).map(|i| (x[i] * x[i + 1]).sqrt().powi(nm1) / (s[i + 1] - s[i])).collect();
    let mut lower = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut excess = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        let left = if i > 0 { s[i] - s[i - 1] } else { 0.0 };
        let right = if i + 1 < k { s[i + 1] - s[i] } else { 0.0 };
        let w = x[i].powi(n as i32 + 1) * 0.5 * (left + right);
        weights[i] = w;
        if i > 0 {
            lower[i] = flux[i - 1] / w;
        }
        if i + 1 < k {
            upper[i] = flux[i] / w;
        }
        excess[i] = -lambda / (x[i] * x[i]);
    }
    if fixed_outer.is_some() {
        lower[k - 1] = 0.0;
        excess[k - 1] = 0.0;
    }
    ModeOperator { mode, lambda, lower, upper, excess, weights, fixed_outer }
}

impl ModeOperator {
    pub fn len(&self) -> usize {
        self.excess.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excess.is_empty()
    }

    pub fn is_dirichlet(&self) -> bool {
        self.fixed_outer.is_some()
    }

    /// Number of free unknowns.
    pub fn free(&self) -> usize {
        self.len() - usize::from(self.is_dirichlet())
    }

    /// `L u`; zero in the held row.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut out = vec![0.0; k];
        for i in 0..self.free() {
            let mut v = -self.excess[i] * u[i];
            if i > 0 {
                v += self.lower[i] * (u[i - 1] - u[i]);
            }
            if i + 1 < k {
                v += self.upper[i] * (u[i + 1] - u[i]);
            }
            out[i] = v;
        }
        out
    }

    /// Solves `(a I - c L) u = rhs` with `a > 0`, `c >= 0`, and diagonal
    /// scaling `d` on the identity term: `(a diag(d) - c L)`. The held row
    /// returns `rhs` unchanged.
    pub fn solve_diag_shifted(&self, a: &[f64], c: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let k = self.len();
        let m = self.free();
        let lower: Vec<f64> = (0..m).map(|i| if i > 0 { c * self.lower[i] } else { 0.0 }).collect();
        let upper: Vec<f64> = (0..m).map(|i| if i + 1 < k { c * self.upper[i] } else { 0.0 }).collect();
        let excess: Vec<f64> = (0..m).map(|i| a[i] + c * self.excess[i]).collect();
        let mut b = rhs[..m].to_vec();
        if self.is_dirichlet() {
            // Coupling to the held node moves to the right-hand side; the
            // solver then treats the node as a zero outside value.
            b[m - 1] += c * self.upper[m - 1] * rhs[k - 1];
        }
        let mut u = solve_m_tridiag(&lower, &upper, &excess, &b)?;
        if self.is_dirichlet() {
            u.push(rhs[k - 1]);
        }
        Ok(u)
    }

    /// Solves `(I - c L) u = rhs`.
    pub fn solve_shifted(&self, c: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_diag_shifted(&vec![1.0; self.len()], c, rhs)
    }

    /// `L` as a band matrix on the free unknowns.
    pub fn banded(&self) -> Banded {
        let m = self.free();
        let k = self.len();
        let sub: Vec<f64> = (0..m).map(|i| self.lower[i]).collect();
        let sup: Vec<f64> = (0..m).map(|i| if i + 1 < k { self.upper[i] } else { 0.0 }).collect();
        // With a held outer node, sup[m-1] still drains the last free row's
        // diagonal but its column falls outside the band.
        let diag: Vec<f64> = (0..m).map(|i| -(sub[i] + sup[i] + self.excess[i])).collect();
        Banded::tridiagonal(&sub, &diag, &sup)
    }

    /// Weighted inner product `sum w_i u_i v_i` over free unknowns.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.free()).map(|i| self.weights[i] * u[i] * v[i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(n: usize, bc: OuterBc) -> ConeModel {
        let cs = if n == 1 { CrossSection::Circle { a: 1.0 } } else { CrossSection::Sphere { n, a: 1.0 } };
        ConeModel::new(cs, 3, RadialMesh::geometric(400, 1e-4).unwrap(), bc).unwrap()
    }

    #[test]
    fn laplacian_of_x_squared_in_the_plane() {
        let m = model(1, OuterBc::Neumann);
        let op = m.operator(0).unwrap();
        let u: Vec<f64> = m.mesh.nodes().iter().map(|x| x * x).collect();
        let lu = op.apply(&u);
        for v in &lu[1..lu.len() - 1] {
            assert!((v - 4.0).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn harmonic_power_is_in_kernel() {
        // L_j x = (1 + n - 1 + lambda) x^{-1} = 0 for n = 2, lambda = -2.
        let m = model(2, OuterBc::Neumann);
        let op = m.operator(1).unwrap();
        let u: Vec<f64> = m.mesh.nodes().to_vec();
        let lu = op.apply(&u);
        for (v, x) in lu[1..lu.len() - 1].iter().zip(&m.mesh.nodes()[1..]) {
            assert!((v * x).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn constants_are_exact_kernel() {
        let m = model(1, OuterBc::Neumann);
        let op = m.operator(0).unwrap();
        assert!(op.apply(&vec![3.0; m.mesh.len()]).iter().all(|&v| v == 0.0));
        let m = model(3, OuterBc::Dirichlet { value: 3.0 });
        let op = m.operator(0).unwrap();
        assert!(op.apply(&vec![3.0; m.mesh.len()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weighted_symmetry() {
        let m = model(2, OuterBc::Neumann);
        let op = m.operator(2).unwrap();
        for i in 0..op.len() - 1 {
            let a = op.weights[i] * op.upper[i];
            let b = op.weights[i + 1] * op.lower[i + 1];
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn shifted_solve_inverts_apply() {
        let m = model(1, OuterBc::Dirichlet { value: 2.0 });
        let op = m.operator(0).unwrap();
        let mut u: Vec<f64> = m.mesh.nodes().iter().map(|x| 1.0 + (3.0 * x).sin()).collect();
        *u.last_mut().unwrap() = 2.0;
        let lu = op.apply(&u);
        let c = 1e-3;
        let rhs: Vec<f64> = u.iter().zip(&lu).map(|(a, b)| a - c * b).collect();
        let back = op.solve_shifted(c, &rhs).unwrap();
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
        let band = op.banded();
        let lu_band = band.matvec(&u[..op.free()]);
        // The band matrix omits the held neighbour's contribution.
        let fix = op.upper[op.free() - 1] * 2.0;
        assert!((lu_band[op.free() - 1] + fix - lu[op.free() - 1]).abs() < 1e-6 * lu[op.free() - 1].abs().max(1.0));
    }
}
