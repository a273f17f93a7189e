//! Cross-section Laplacian spectra.
//!
//! Sign convention: the Laplacian is negative, so every eigenvalue is `<= 0`
//! and the zero eigenvalue belongs to the constants.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ConeError, Result};

/// Geometry of the cross section at the conical tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrossSection {
    /// Circle of circumference `2 pi a` (cross-section dimension 1).
    Circle { a: f64 },
    /// Round sphere `S^n` of radius `a`.
    Sphere { n: usize, a: f64 },
    /// User-supplied eigenvalue list with multiplicities.
    Custom { n: usize, pairs: Vec<(f64, usize)> },
}

impl CrossSection {
    /// Dimension `n` of the cross section.
    pub fn dim(&self) -> usize {
        match self {
            CrossSection::Circle { .. } => 1,
            CrossSection::Sphere { n, .. } | CrossSection::Custom { n, .. } => *n,
        }
    }

    /// Spectrum truncated at `l_max` (ignored for custom lists).
    pub fn spectrum(&self, l_max: usize) -> Result<ModeSpectrum> {
        match self {
            CrossSection::Circle { a } => circle_spectrum(*a, l_max),
            CrossSection::Sphere { n: 1, a } => circle_spectrum(*a, l_max),
            CrossSection::Sphere { n, a } => sphere_spectrum(*n, *a, l_max),
            CrossSection::Custom { n, pairs } => custom_spectrum(pairs, *n),
        }
    }

    /// Closed-form presets can be extended to any cutoff; custom lists cannot.
    pub fn is_preset(&self) -> bool {
        !matches!(self, CrossSection::Custom { .. })
    }

    /// Total measure of the cross section.
    pub fn volume(&self) -> f64 {
        match self {
            CrossSection::Circle { a } => 2.0 * std::f64::consts::PI * a,
            CrossSection::Sphere { n, a } => unit_sphere_volume(*n) * a.powi(*n as i32),
            // Normalized so that the constant mode has unit mass density.
            CrossSection::Custom { .. } => 1.0,
        }
    }
}

/// Surface measure of the unit sphere `S^n` in `R^{n+1}`.
pub fn unit_sphere_volume(n: usize) -> f64 {
    // vol(S^0) = 2, vol(S^1) = 2 pi, vol(S^n) = 2 pi / (n - 1) vol(S^{n-2}).
    let mut v = if n.is_multiple_of(2) { 2.0 } else { 2.0 * std::f64::consts::PI };
    let mut k = if n.is_multiple_of(2) { 0 } else { 1 };
    while k < n {
        k += 2;
        v *= 2.0 * std::f64::consts::PI / (k as f64 - 1.0);
    }
    v
}

/// One distinct eigenvalue of the cross-section Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub mult: usize,
}

#[derive(Deserialize)]
struct RawSpectrum {
    n: usize,
    entries: Vec<SpectrumEntry>,
    #[allow(dead_code)]
    l_max: Option<usize>,
    #[serde(default = "default_truncated")]
    truncated: bool,
}

fn default_truncated() -> bool {
    true
}

/// Distinct eigenvalues `0 = lambda_0 > lambda_1 > ...` with multiplicities.
///
/// Mode index `j` is the position in `entries`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrum")]
pub struct ModeSpectrum {
    pub n: usize,
    pub entries: Vec<SpectrumEntry>,
    pub l_max: usize,
    /// Eigenvalues below the last entry exist but are not listed.
    pub truncated: bool,
}

impl TryFrom<RawSpectrum> for ModeSpectrum {
    type Error = ConeError;

    fn try_from(raw: RawSpectrum) -> Result<Self> {
        let pairs: Vec<(f64, usize)> = raw.entries.iter().map(|e| (e.lambda, e.mult)).collect();
        let mut s = custom_spectrum(&pairs, raw.n)?;
        s.truncated = raw.truncated;
        Ok(s)
    }
}

impl ModeSpectrum {
    fn validated(n: usize, entries: Vec<SpectrumEntry>) -> Result<Self> {
        if n == 0 {
            return invalid("cross-section dimension must be >= 1");
        }
        if entries.is_empty() {
            return invalid("spectrum must not be empty");
        }
        if let Some(e) = entries.iter().find(|e| !e.lambda.is_finite()) {
            return invalid(format!("non-finite eigenvalue {}", e.lambda));
        }
        if let Some(e) = entries.iter().find(|e| e.lambda > 0.0) {
            return Err(ConeError::PositiveEigenvalue(e.lambda));
        }
        if entries.iter().any(|e| e.mult == 0) {
            return invalid("multiplicities must be >= 1");
        }
        let mut sorted = entries;
        sorted.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
        if sorted[0].lambda != 0.0 {
            return Err(ConeError::MissingZeroEigenvalue);
        }
        for w in sorted.windows(2) {
            if w[0].lambda == w[1].lambda {
                return Err(ConeError::DuplicateEigenvalue(w[0].lambda));
            }
        }
        let l_max = sorted.len() - 1;
        Ok(Self { n, entries: sorted, l_max, truncated: true })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lambda(&self, j: usize) -> f64 {
        self.entries[j].lambda
    }

    /// Smallest (most negative) retained eigenvalue.
    pub fn last_lambda(&self) -> f64 {
        self.entries[self.entries.len() - 1].lambda
    }

    pub fn lambdas(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.lambda)
    }
}

/// Flat circle of circumference `2 pi a`: `lambda_l = -(l/a)^2`.
pub fn circle_spectrum(a: f64, l_max: usize) -> Result<ModeSpectrum> {
    if !(a > 0.0) || !a.is_finite() {
        return invalid(format!("circle factor a must be positive, got {a}"));
    }
    if l_max < 1 {
        return invalid("l_max must be >= 1");
    }
    let entries = (0..=l_max)
        .map(|l| {
            let q = l as f64 / a;
            SpectrumEntry { lambda: if l == 0 { 0.0 } else { -q * q }, mult: if l == 0 { 1 } else { 2 } }
        })
        .collect();
    ModeSpectrum::validated(1, entries)
}

/// Round sphere `S^n` of radius `a`: `lambda_l = -l(l+n-1)/a^2`.
pub fn sphere_spectrum(n: usize, a: f64, l_max: usize) -> Result<ModeSpectrum> {
    if n < 2 {
        return invalid(format!("sphere dimension must be >= 2, got {n}"));
    }
    if !(a > 0.0) || !a.is_finite() {
        return invalid(format!("sphere radius must be positive, got {a}"));
    }
    if l_max < 1 {
        return invalid("l_max must be >= 1");
    }
    let entries = (0..=l_max)
        .map(|l| {
            let lf = l as f64;
            let lambda = if l == 0 { 0.0 } else { -lf * (lf + n as f64 - 1.0) / (a * a) };
            SpectrumEntry { lambda, mult: spherical_harmonic_dim(n, l) }
        })
        .collect();
    ModeSpectrum::validated(n, entries)
}

/// Dimension of degree-`l` spherical harmonics on `S^n`.
pub fn spherical_harmonic_dim(n: usize, l: usize) -> usize {
    let b = |top: usize, k: usize| -> u128 {
        if k > top {
            return 0;
        }
        let mut r: u128 = 1;
        for i in 0..k as u128 {
            r = r * (top as u128 - i) / (i + 1);
        }
        r
    };
    let total = b(l + n, n);
    let lower = if l >= 2 { b(l + n - 2, n) } else { 0 };
    (total - lower) as usize
}

/// Validated user-supplied spectrum. Duplicates are rejected, not merged.
pub fn custom_spectrum(pairs: &[(f64, usize)], n: usize) -> Result<ModeSpectrum> {
    let entries = pairs.iter().map(|&(lambda, mult)| SpectrumEntry { lambda, mult }).collect();
    ModeSpectrum::validated(n, entries)
}

/// Largest strictly negative eigenvalue.
pub fn lambda1(s: &ModeSpectrum) -> Result<f64> {
    s.entries.get(1).map(|e| e.lambda).ok_or(ConeError::NoNonzeroEigenvalue)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(s: &ModeSpectrum) -> Vec<(f64, usize)> {
        s.entries.iter().map(|e| (e.lambda, e.mult)).collect()
    }

    #[test]
    fn circle_examples() {
        assert_eq!(pairs(&circle_spectrum(1.0, 2).unwrap()), vec![(0.0, 1), (-1.0, 2), (-4.0, 2)]);
        assert_eq!(pairs(&circle_spectrum(0.5, 1).unwrap()), vec![(0.0, 1), (-4.0, 2)]);
        let l: Vec<f64> = circle_spectrum(2.0, 3).unwrap().lambdas().collect();
        assert_eq!(l, vec![0.0, -0.25, -1.0, -2.25]);
    }

    #[test]
    fn sphere_examples() {
        assert_eq!(pairs(&sphere_spectrum(2, 1.0, 2).unwrap()), vec![(0.0, 1), (-2.0, 3), (-6.0, 5)]);
        assert_eq!(pairs(&sphere_spectrum(3, 1.0, 1).unwrap()), vec![(0.0, 1), (-3.0, 4)]);
        let l: Vec<f64> = sphere_spectrum(2, 2.0, 1).unwrap().lambdas().collect();
        assert_eq!(l, vec![0.0, -0.5]);
    }

    #[test]
    fn sphere_multiplicities_match_closed_forms() {
        for l in 0..12 {
            assert_eq!(spherical_harmonic_dim(2, l), 2 * l + 1);
            assert_eq!(spherical_harmonic_dim(3, l), (l + 1) * (l + 1));
            assert_eq!(spherical_harmonic_dim(1, l), if l == 0 { 1 } else { 2 });
        }
    }

    #[test]
    fn custom_examples() {
        assert!(custom_spectrum(&[(0.0, 1), (-2.0, 3)], 2).is_ok());
        assert_eq!(custom_spectrum(&[(-2.0, 3)], 2), Err(ConeError::MissingZeroEigenvalue));
        assert_eq!(custom_spectrum(&[(0.0, 1), (1.0, 1)], 2), Err(ConeError::PositiveEigenvalue(1.0)));
        assert_eq!(
            custom_spectrum(&[(0.0, 1), (-2.0, 1), (-2.0, 2)], 2),
            Err(ConeError::DuplicateEigenvalue(-2.0))
        );
        // Unsorted input is sorted.
        let s = custom_spectrum(&[(-6.0, 5), (0.0, 1), (-2.0, 3)], 2).unwrap();
        assert_eq!(s.lambdas().collect::<Vec<_>>(), vec![0.0, -2.0, -6.0]);
    }

    #[test]
    fn invalid_presets() {
        assert!(circle_spectrum(0.0, 2).is_err());
        assert!(circle_spectrum(-1.0, 2).is_err());
        assert!(circle_spectrum(1.0, 0).is_err());
        assert!(sphere_spectrum(1, 1.0, 2).is_err());
        assert!(sphere_spectrum(2, 0.0, 2).is_err());
        assert!(sphere_spectrum(2, 1.0, 0).is_err());
    }

    #[test]
    fn lambda1_examples() {
        assert_eq!(lambda1(&circle_spectrum(1.0, 3).unwrap()), Ok(-1.0));
        assert_eq!(lambda1(&sphere_spectrum(2, 1.0, 3).unwrap()), Ok(-2.0));
        let only_zero = custom_spectrum(&[(0.0, 1)], 1).unwrap();
        assert_eq!(lambda1(&only_zero), Err(ConeError::NoNonzeroEigenvalue));
    }

    #[test]
    fn json_shape_and_validation() {
        let s = sphere_spectrum(2, 1.0, 2).unwrap();
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["l_max"], 2);
        assert_eq!(v["entries"][1]["lambda"], -2.0);
        assert_eq!(v["entries"][1]["mult"], 3);
        let back: ModeSpectrum = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
        let bad = serde_json::json!({"n": 2, "entries": [{"lambda": -2.0, "mult": 3}], "l_max": 0});
        assert!(serde_json::from_value::<ModeSpectrum>(bad).is_err());
    }

    #[test]
    fn sphere_volume() {
        assert!((unit_sphere_volume(1) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_sphere_volume(2) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_sphere_volume(3) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-13);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn presets_are_strictly_decreasing(a in 0.1f64..5.0, l_max in 1usize..40, n in 2usize..6) {
                for s in [circle_spectrum(a, l_max).unwrap(), sphere_spectrum(n, a, l_max).unwrap()] {
                    prop_assert_eq!(s.lambda(0), 0.0);
                    for j in 1..s.len() {
                        prop_assert!(s.lambda(j) < s.lambda(j - 1));
                        prop_assert!(s.lambda(j) < 0.0);
                    }
                }
            }

            #[test]
            fn lambda1_of_circle(a in 0.05f64..20.0) {
                let l1 = lambda1(&circle_spectrum(a, 3).unwrap()).unwrap();
                prop_assert!((l1 + 1.0 / (a * a)).abs() <= 1e-14 * (1.0 / (a * a)));
            }

            #[test]
            fn unit_presets_are_exact_integers(l_max in 1usize..60, n in 2usize..7) {
                let c = circle_spectrum(1.0, l_max).unwrap();
                let s = sphere_spectrum(n, 1.0, l_max).unwrap();
                for l in 0..=l_max {
                    prop_assert_eq!(c.lambda(l), -((l * l) as f64));
                    prop_assert_eq!(s.lambda(l), -((l * (l + n - 1)) as f64));
                }
            }
        }
    }
}
