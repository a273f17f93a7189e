use std::f64::consts::PI;

use crate::error::{ConeError, Result};
use crate::meshnorm::{ConeField, Harmonic};
use crate::spectrum::CrossSection;

/// Node-wise transform between radial mode coefficients and values on an
/// angular grid. Circles use `2 l_max + 2` equispaced angles; other cross
/// sections support axisymmetric fields only, where the transform is the
/// identity on the constant component.
#[derive(Debug, Clone)]
pub struct ModeTransform {
    /// `basis[k][c]`: component `c` evaluated at angle `k`.
    basis: Vec<Vec<f64>>,
    /// `analysis[c][k]`: weight of angle `k` in coefficient `c`.
    analysis: Vec<Vec<f64>>,
    axisymmetric_only: bool,
}

impl ModeTransform {
    pub fn for_field(f: &ConeField) -> Result<Self> {
        match *f.cross_section {
            CrossSection::Circle { .. } | CrossSection::Sphere { n: 1, .. } => {
                let l_max = f.components.iter().map(|c| c.harmonic.degree()).max().unwrap_or(0);
                let m = 2 * l_max + 2;
                let angles: Vec<f64> = (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect();
                let eval = |h: Harmonic, th: f64| match h {
                    Harmonic::Cos(l) => (l as f64 * th).cos(),
                    Harmonic::Sin(l) => (l as f64 * th).sin(),
                    _ => 0.0,
                };
                let basis = angles.iter().map(|&th| f.components.iter().map(|c| eval(c.harmonic, th)).collect()).collect();
                let analysis = f
                    .components
                    .iter()
                    .map(|c| {
                        let w = if c.harmonic.degree() == 0 { 1.0 } else { 2.0 } / m as f64;
                        angles.iter().map(|&th| w * eval(c.harmonic, th)).collect()
                    })
                    .collect();
                Ok(Self { basis, analysis, axisymmetric_only: false })
            }
            _ => Ok(Self { basis: vec![vec![1.0]], analysis: vec![vec![1.0]], axisymmetric_only: true }),
        }
    }

    /// Number of angular sample points.
    pub fn points(&self) -> usize {
        self.basis.len()
    }

    fn check(&self, f: &ConeField) -> Result<()> {
        if self.axisymmetric_only && !f.is_axisymmetric() {
            return Err(ConeError::Unsupported(
                "pointwise nonlinearities on this cross section need axisymmetric data".into(),
            ));
        }
        Ok(())
    }

    /// `values[i][k]` at radial node `i`, angle `k`.
    pub fn to_physical(&self, f: &ConeField) -> Result<Vec<Vec<f64>>> {
        self.check(f)?;
        let n = f.mesh.len();
        Ok((0..n)
            .map(|i| {
                self.basis
                    .iter()
                    .map(|row| row.iter().zip(&f.components).map(|(b, c)| b * c.values[i]).sum())
                    .collect()
            })
            .collect())
    }

    /// Coefficients of `values` in the layout of `template`.
    pub fn from_physical(&self, values: &[Vec<f64>], template: &ConeField) -> ConeField {
        let mut out = template.zeros_like();
        for (c, weights) in out.components.iter_mut().zip(&self.analysis) {
            for (i, v) in c.values.iter_mut().enumerate() {
                *v = weights.iter().zip(&values[i]).map(|(w, u)| w * u).sum();
            }
        }
        out
    }

    /// Applies `g` pointwise in physical space.
    pub fn map_pointwise(&self, f: &ConeField, g: impl Fn(f64) -> f64) -> Result<ConeField> {
        let mut vals = self.to_physical(f)?;
        vals.iter_mut().flat_map(|r| r.iter_mut()).for_each(|v| *v = g(*v));
        let mut out = self.from_physical(&vals, f);
        out.t = f.t;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshnorm::RadialMesh;
    use crate::spectrum::{circle_spectrum, sphere_spectrum};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn circle_field(l_max: usize) -> ConeField {
        let spec = circle_spectrum(1.0, l_max).unwrap();
        ConeField::zeros(Arc::new(RadialMesh::geometric(6, 1e-2).unwrap()), Arc::new(CrossSection::Circle { a: 1.0 }), &spec)
    }

    #[test]
    fn round_trip_band_limited() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut f = circle_field(5);
        for c in &mut f.components {
            c.values.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let t = ModeTransform::for_field(&f).unwrap();
        assert_eq!(t.points(), 12);
        let back = t.from_physical(&t.to_physical(&f).unwrap(), &f);
        for (a, b) in f.components.iter().zip(&back.components) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_maps_to_mode_zero() {
        let f = circle_field(3);
        let t = ModeTransform::for_field(&f).unwrap();
        let vals = vec![vec![2.5; t.points()]; f.mesh.len()];
        let g = t.from_physical(&vals, &f);
        assert!(g.components[0].values.iter().all(|v| (v - 2.5).abs() < 1e-14));
        assert!(g.components[1..].iter().all(|c| c.values.iter().all(|v| v.abs() < 1e-14)));
    }

    #[test]
    fn radial_profile_is_untouched() {
        let mut f = circle_field(2);
        f.set_fn(Harmonic::Sin(1), |x| x * x).unwrap();
        let t = ModeTransform::for_field(&f).unwrap();
        let g = t.map_pointwise(&f, |v| v).unwrap();
        for (x, v) in f.mesh.nodes().iter().zip(g.values(Harmonic::Sin(1)).unwrap()) {
            assert!((v - x * x).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_requires_axisymmetric_data() {
        let spec = sphere_spectrum(2, 1.0, 2).unwrap();
        let mut f = ConeField::zeros(
            Arc::new(RadialMesh::geometric(6, 1e-2).unwrap()),
            Arc::new(CrossSection::Sphere { n: 2, a: 1.0 }),
            &spec,
        );
        f.set_fn(Harmonic::Zonal(0), |x| x).unwrap();
        let t = ModeTransform::for_field(&f).unwrap();
        let g = t.map_pointwise(&f, |v| v * v).unwrap();
        assert!((g.components[0].values[3] - f.mesh.x(3).powi(2)).abs() < 1e-15);
        f.set_fn(Harmonic::Zonal(1), |x| x).unwrap();
        assert!(matches!(t.map_pointwise(&f, |v| v), Err(ConeError::Unsupported(_))));
    }
}
