use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mesh::RadialMesh;
use crate::error::{invalid, ConeError, Result};
use crate::spectrum::{unit_sphere_volume, CrossSection, ModeSpectrum};

/// Real angular basis function attached to one radial coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "l", rename_all = "snake_case")]
pub enum Harmonic {
    /// `cos(l theta)` on a circle.
    Cos(usize),
    /// `sin(l theta)` on a circle, `l >= 1`.
    Sin(usize),
    /// Zonal harmonic of degree `l` on `S^n`, normalized to 1 at the pole.
    Zonal(usize),
    /// Eigenfunction `j` of a user-supplied spectrum (orthonormal, not evaluable).
    Mode(usize),
}

impl Harmonic {
    pub fn degree(&self) -> usize {
        match *self {
            Harmonic::Cos(l) | Harmonic::Sin(l) | Harmonic::Zonal(l) | Harmonic::Mode(l) => l,
        }
    }

    /// Column label used in CSV output.
    pub fn label(&self) -> String {
        match *self {
            Harmonic::Cos(l) => format!("cos{l}"),
            Harmonic::Sin(l) => format!("sin{l}"),
            Harmonic::Zonal(l) => format!("zonal{l}"),
            Harmonic::Mode(l) => format!("mode{l}"),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }
}

/// Radial coefficient of one angular basis function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub harmonic: Harmonic,
    /// Index into the spectrum.
    pub mode: usize,
    pub lambda: f64,
    pub values: Vec<f64>,
}

/// Angular basis for a cross section and a truncated spectrum.
pub fn basis(cs: &CrossSection, spec: &ModeSpectrum) -> Vec<(Harmonic, usize, f64)> {
    let mut out = Vec::new();
    for (j, e) in spec.entries.iter().enumerate() {
        match cs {
            CrossSection::Circle { .. } | CrossSection::Sphere { n: 1, .. } => {
                out.push((Harmonic::Cos(j), j, e.lambda));
                if j > 0 {
                    out.push((Harmonic::Sin(j), j, e.lambda));
                }
            }
            CrossSection::Sphere { .. } => out.push((Harmonic::Zonal(j), j, e.lambda)),
            CrossSection::Custom { .. } => out.push((Harmonic::Mode(j), j, e.lambda)),
        }
    }
    out
}

/// A time-stamped field on the model cone, stored as radial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeField {
    pub t: f64,
    pub mesh: Arc<RadialMesh>,
    pub cross_section: Arc<CrossSection>,
    pub components: Vec<Component>,
}

impl ConeField {
    pub fn zeros(mesh: Arc<RadialMesh>, cs: Arc<CrossSection>, spec: &ModeSpectrum) -> Self {
        let n = mesh.len();
        let components = basis(&cs, spec)
            .into_iter()
            .map(|(harmonic, mode, lambda)| Component { harmonic, mode, lambda, values: vec![0.0; n] })
            .collect();
        Self { t: 0.0, mesh, cross_section: cs, components }
    }

    /// Same layout as `self`, all coefficients zero.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.components {
            c.values.iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }

    /// Cross-section dimension.
    pub fn dim(&self) -> usize {
        self.cross_section.dim()
    }

    pub fn index_of(&self, h: Harmonic) -> Option<usize> {
        self.components.iter().position(|c| c.harmonic == h)
    }

    pub fn component(&self, h: Harmonic) -> Option<&Component> {
        self.components.iter().find(|c| c.harmonic == h)
    }

    pub fn values(&self, h: Harmonic) -> Result<&[f64]> {
        self.component(h).map(|c| c.values.as_slice()).ok_or_else(|| missing(h))
    }

    pub fn values_mut(&mut self, h: Harmonic) -> Result<&mut Vec<f64>> {
        self.components.iter_mut().find(|c| c.harmonic == h).map(|c| &mut c.values).ok_or_else(|| missing(h))
    }

    /// Sets a coefficient from a function of `x`.
    pub fn set_fn(&mut self, h: Harmonic, f: impl Fn(f64) -> f64) -> Result<()> {
        let xs = self.mesh.nodes().to_vec();
        let v = self.values_mut(h)?;
        for (vi, x) in v.iter_mut().zip(xs) {
            *vi = f(x);
        }
        Ok(())
    }

    /// The constant-in-`y` component.
    pub fn constant_component(&self) -> &Component {
        &self.components[0]
    }

    /// Only the constant component is non-zero.
    pub fn is_axisymmetric(&self) -> bool {
        self.components[1..].iter().all(|c| c.values.iter().all(|&v| v == 0.0))
    }

    pub fn same_layout(&self, other: &ConeField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    fn check_layout(&self, other: &ConeField) -> Result<()> {
        if !self.same_layout(other) || self.components.len() != other.components.len() {
            return invalid("fields live on different meshes or mode sets");
        }
        if self.components.iter().zip(&other.components).any(|(a, b)| a.harmonic != b.harmonic) {
            return invalid("fields use different angular bases");
        }
        Ok(())
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &ConeField) -> Result<()> {
        self.check_layout(other)?;
        for (c, o) in self.components.iter_mut().zip(&other.components) {
            for (v, w) in c.values.iter_mut().zip(&o.values) {
                *v += a * w;
            }
        }
        Ok(())
    }

    /// `self - other`, time stamp of `self`.
    pub fn sub(&self, other: &ConeField) -> Result<ConeField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.components {
            c.values.iter_mut().for_each(|v| *v *= a);
        }
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.components.iter().flat_map(|c| c.values.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.values.iter().all(|v| v.is_finite()))
    }

    /// Columnar CSV: `x`, then one column per angular basis function.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x");
        for c in &self.components {
            s.push(',');
            s.push_str(&c.harmonic.label());
        }
        s.push('\n');
        for (i, x) in self.mesh.nodes().iter().enumerate() {
            let _ = write!(s, "{x:.16e}");
            for c in &self.components {
                let _ = write!(s, ",{:.16e}", c.values[i]);
            }
            s.push('\n');
        }
        s
    }
}

fn missing(h: Harmonic) -> ConeError {
    ConeError::InvalidInput(format!("field has no component {}", h.label()))
}

/// `C_l^alpha(t) / C_l^alpha(1)` for `l = 0..=l_max`, `alpha = (n-1)/2 > 0`.
pub fn zonal_values(n: usize, l_max: usize, t: f64) -> Vec<f64> {
    let alpha = (n as f64 - 1.0) / 2.0;
    let mut c = vec![1.0; l_max + 1];
    let mut c1 = vec![1.0; l_max + 1];
    if l_max >= 1 {
        c[1] = 2.0 * alpha * t;
        c1[1] = 2.0 * alpha;
    }
    for l in 1..l_max {
        let lf = l as f64;
        c[l + 1] = (2.0 * t * (lf + alpha) * c[l] - (lf + 2.0 * alpha - 1.0) * c[l - 1]) / (lf + 1.0);
        c1[l + 1] = (2.0 * (lf + alpha) * c1[l] - (lf + 2.0 * alpha - 1.0) * c1[l - 1]) / (lf + 1.0);
    }
    c.iter().zip(&c1).map(|(a, b)| a / b).collect()
}

/// Sample points on the cross section with quadrature weights, and the basis
/// evaluated there. Custom cross sections have no sample points.
#[derive(Debug, Clone)]
pub struct AngularQuadrature {
    pub weights: Vec<f64>,
    /// `table[k][c]`: basis function `c` at sample `k`.
    pub table: Vec<Vec<f64>>,
}

impl AngularQuadrature {
    /// Quadrature fine enough for `|u|^p` of band-limited fields; `None` for custom spectra.
    pub fn for_field(f: &ConeField) -> Option<Self> {
        let harmonics: Vec<Harmonic> = f.components.iter().map(|c| c.harmonic).collect();
        let l_max = harmonics.iter().map(|h| h.degree()).max().unwrap_or(0);
        match *f.cross_section {
            CrossSection::Circle { a } | CrossSection::Sphere { n: 1, a } => {
                let m = (8 * (l_max + 1)).max(64);
                let w = 2.0 * PI * a / m as f64;
                let table = (0..m)
                    .map(|k| {
                        let th = 2.0 * PI * k as f64 / m as f64;
                        harmonics.iter().map(|h| circle_basis(*h, th)).collect()
                    })
                    .collect();
                Some(Self { weights: vec![w; m], table })
            }
            CrossSection::Sphere { n, a } => {
                let m = (16 * (l_max + 1)).max(512);
                let dth = PI / m as f64;
                let scale = unit_sphere_volume(n - 1) * a.powi(n as i32) * dth;
                let mut weights = Vec::with_capacity(m);
                let mut table = Vec::with_capacity(m);
                for k in 0..m {
                    let th = (k as f64 + 0.5) * dth;
                    weights.push(scale * th.sin().powi(n as i32 - 1));
                    let z = zonal_values(n, l_max, th.cos());
                    table.push(harmonics.iter().map(|h| z[h.degree()]).collect());
                }
                Some(Self { weights, table })
            }
            CrossSection::Custom { .. } => None,
        }
    }

    fn point_values(&self, f: &ConeField, i: usize) -> impl Iterator<Item = f64> + '_ {
        let coeffs: Vec<f64> = f.components.iter().map(|c| c.values[i]).collect();
        self.table.iter().map(move |row| row.iter().zip(&coeffs).map(|(b, c)| b * c).sum())
    }
}

fn circle_basis(h: Harmonic, th: f64) -> f64 {
    match h {
        Harmonic::Cos(l) => (l as f64 * th).cos(),
        Harmonic::Sin(l) => (l as f64 * th).sin(),
        _ => unreachable!("circle fields carry only cos/sin components"),
    }
}

/// `(int |u(x_i, y)|^p dy)^(1/p)` at every node.
///
/// Custom spectra fall back to the coefficient l2 norm (orthonormal eigenfunctions).
pub fn cross_norms(f: &ConeField, p: f64) -> Vec<f64> {
    let n = f.mesh.len();
    match AngularQuadrature::for_field(f) {
        Some(q) => (0..n)
            .map(|i| {
                let s: f64 = q.point_values(f, i).zip(&q.weights).map(|(u, w)| w * u.abs().powf(p)).sum();
                s.powf(1.0 / p)
            })
            .collect(),
        None => (0..n).map(|i| f.components.iter().map(|c| c.values[i] * c.values[i]).sum::<f64>().sqrt()).collect(),
    }
}

/// `sup_y |u(x_i, y)|` on the sample grid; custom spectra use `sum |c_j|`.
pub fn sup_abs(f: &ConeField) -> Vec<f64> {
    let n = f.mesh.len();
    match AngularQuadrature::for_field(f) {
        Some(q) => (0..n).map(|i| q.point_values(f, i).fold(0.0f64, |m, u| m.max(u.abs()))).collect(),
        None => (0..n).map(|i| f.components.iter().map(|c| c.values[i].abs()).sum()).collect(),
    }
}
