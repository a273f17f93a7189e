//! Conormal-symbol calculus for straight cones.
//!
//! For the Laplacian the conormal symbol on mode `j` is the quadratic
//! `p_j(z) = z^2 - (n-1) z + lambda_j`; the symbol of `Delta^k` is the product
//! of the shifted copies `p_j(z + 2 nu)`, `nu = 0..k-1`. Everything here is
//! closed form: no discretization is involved.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ConeError, Result};
use crate::spectrum::{CrossSection, ModeSpectrum};

/// Two candidate poles closer than this are the same point.
pub const MERGE_TOL: f64 = 1e-9;
/// Points this close to a strip endpoint are flagged as ambiguous.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Both roots of `p_j` for one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConormalRoots {
    pub mode: usize,
    pub lambda: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    /// Zero discriminant: `rho_plus == rho_minus` is a double root.
    pub double: bool,
}

/// `(n-1)/2 +- sqrt(((n-1)/2)^2 - lambda_j)` for each retained mode.
pub fn conormal_roots(s: &ModeSpectrum, n: usize) -> Vec<ConormalRoots> {
    let h = (n as f64 - 1.0) / 2.0;
    s.entries
        .iter()
        .enumerate()
        .map(|(mode, e)| {
            let disc = h * h - e.lambda;
            let r = disc.max(0.0).sqrt();
            ConormalRoots { mode, lambda: e.lambda, rho_plus: h + r, rho_minus: h - r, double: disc == 0.0 }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripKind {
    /// `[(n+1)/2 - gamma - mu, (n+1)/2 - gamma)`
    IMuGamma,
    /// `[(n+1)/2 - gamma - 2k, (n+1)/2 - gamma - 2)`
    SK,
    /// `[(n+1)/2 - gamma - 2k, (n+1)/2 - gamma - 2(k-1)]`, closed.
    VK,
}

/// A vertical strip in the Mellin plane, described by its real-part range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub kind: StripKind,
    pub re_min: f64,
    pub re_max: f64,
    pub upper_closed: bool,
}

impl Strip {
    pub fn contains(&self, re: f64) -> bool {
        re >= self.re_min && (re < self.re_max || (self.upper_closed && re <= self.re_max))
    }

    /// Within [`BOUNDARY_TOL`] of either endpoint.
    pub fn near_boundary(&self, re: f64) -> bool {
        (re - self.re_min).abs() < BOUNDARY_TOL || (re - self.re_max).abs() < BOUNDARY_TOL
    }
}

/// Builds a strip; `order` is `mu` for [`StripKind::IMuGamma`] and `k` otherwise.
pub fn make_strip(kind: StripKind, n: usize, gamma: f64, order: usize) -> Result<Strip> {
    if order < 1 {
        return invalid("strip order (mu or k) must be >= 1");
    }
    if !gamma.is_finite() {
        return invalid("gamma must be finite");
    }
    let top = (n as f64 + 1.0) / 2.0 - gamma;
    let o = order as f64;
    let (re_min, re_max, upper_closed) = match kind {
        StripKind::IMuGamma => (top - o, top, false),
        StripKind::SK => (top - 2.0 * o, top - 2.0, false),
        StripKind::VK => (top - 2.0 * o, top - 2.0 * (o - 1.0), true),
    };
    Ok(Strip { kind, re_min, re_max, upper_closed })
}

/// One `(mode, shift)` pair producing a pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootSource {
    pub mode: usize,
    pub shift: usize,
    /// 1, or 2 when the unshifted root is a double root of `p_j`.
    pub multiplicity: usize,
}

/// A pole of the inverse conormal symbol of `Delta^k` inside `S_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicialRoot {
    pub rho: Complex64,
    /// Pole order: max over modes of the summed root multiplicities.
    pub eta: usize,
    pub sources: Vec<RootSource>,
    /// Power of `x` in the asymptotic term, `-rho`.
    pub x_exponent: Complex64,
    pub boundary_ambiguous: bool,
}

impl IndicialRoot {
    /// Largest log power under the convention `log^eta` with `eta <= eta_rho - 1`.
    pub fn eta_standard(&self) -> usize {
        self.eta.saturating_sub(1)
    }
}

/// Root set of `Delta^k` in `S_k` together with the strip and a completeness flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSet {
    pub k: usize,
    pub strip: Strip,
    pub roots: Vec<IndicialRoot>,
    /// Omitted modes provably contribute no point of the strip.
    pub complete: bool,
}

/// Whether modes beyond the cutoff are guaranteed to stay outside `[re_min, re_max)`
/// after shifts `0..k-1`.
///
/// Omitted modes have `lambda < lambda_last`, hence roots strictly outside
/// `((n-1)/2 - s_last, (n-1)/2 + s_last)`. The minus branch only moves left under
/// shifts; the plus branch moves left by at most `2(k-1)`.
pub fn strip_complete(s: &ModeSpectrum, n: usize, re_min: f64, re_max: f64, k: usize) -> bool {
    if !s.truncated || k <= 1 {
        return true;
    }
    let h = (n as f64 - 1.0) / 2.0;
    let r = (h * h - s.last_lambda()).sqrt();
    h - r <= re_min && h + r - 2.0 * (k as f64 - 1.0) >= re_max
}

/// Multiplicity of `z` as a root of `p_j(. + 2 nu)`.
fn shifted_multiplicity(roots: &ConormalRoots, nu: usize, z: f64) -> usize {
    let shift = 2.0 * nu as f64;
    if roots.double {
        return if (roots.rho_plus - shift - z).abs() < MERGE_TOL { 2 } else { 0 };
    }
    [roots.rho_plus, roots.rho_minus].iter().filter(|&&r| (r - shift - z).abs() < MERGE_TOL).count()
}

/// `Q_k` with a completeness flag instead of an error on truncation.
pub fn q_set_report(s: &ModeSpectrum, n: usize, gamma: f64, k: usize) -> Result<QSet> {
    if k < 1 {
        return invalid("k must be >= 1");
    }
    let strip = make_strip(StripKind::SK, n, gamma, k)?;
    if k == 1 {
        return Ok(QSet { k, strip, roots: Vec::new(), complete: true });
    }
    let roots = conormal_roots(s, n);

    let mut candidates: Vec<f64> = Vec::new();
    for r in &roots {
        for nu in 0..k {
            for z in [r.rho_plus, r.rho_minus] {
                let z = z - 2.0 * nu as f64;
                if strip.contains(z) && !candidates.iter().any(|c| (c - z).abs() < MERGE_TOL) {
                    candidates.push(z);
                }
            }
        }
    }

    let mut out: Vec<IndicialRoot> = candidates
        .into_iter()
        .map(|z| {
            let mut sources = Vec::new();
            let mut eta = 0;
            for r in &roots {
                let mut per_mode = 0;
                for nu in 0..k {
                    let m = shifted_multiplicity(r, nu, z);
                    if m > 0 {
                        sources.push(RootSource { mode: r.mode, shift: nu, multiplicity: m });
                        per_mode += m;
                    }
                }
                eta = eta.max(per_mode);
            }
            let rho = Complex64::new(z, 0.0);
            IndicialRoot { rho, eta, sources, x_exponent: -rho, boundary_ambiguous: strip.near_boundary(z) }
        })
        .collect();
    out.sort_by(|a, b| b.rho.re.total_cmp(&a.rho.re));

    let complete = strip_complete(s, n, strip.re_min, strip.re_max, k);
    Ok(QSet { k, strip, roots: out, complete })
}

/// Poles of the inverse conormal symbol of `Delta^k` inside `S_k`, sorted by
/// real part descending. `Q_1` is empty.
///
/// This is the full candidate set; for special geometries the actual
/// asymptotics may use only a subset.
pub fn q_set(s: &ModeSpectrum, n: usize, gamma: f64, k: usize) -> Result<Vec<IndicialRoot>> {
    let q = q_set_report(s, n, gamma, k)?;
    if !q.complete {
        return Err(ConeError::IncompleteSpectrum { l_max: s.l_max, re_min: q.strip.re_min, re_max: q.strip.re_max });
    }
    Ok(q.roots)
}

/// Smallest cutoff for which [`q_set`] is certified complete on a preset cross section.
pub fn required_l_max(cs: &CrossSection, gamma: f64, k: usize) -> Result<usize> {
    if !cs.is_preset() {
        return invalid("cutoff search needs a closed-form cross section");
    }
    let n = cs.dim();
    let strip = make_strip(StripKind::SK, n, gamma, k.max(1))?;
    let mut l = 1;
    loop {
        let s = cs.spectrum(l)?;
        if strip_complete(&s, n, strip.re_min, strip.re_max, k) {
            return Ok(l);
        }
        l += 1;
        if l > 1_000_000 {
            return invalid("cutoff search did not terminate");
        }
    }
}

/// `(alpha, max_log_power)` with `alpha = -Re(rho)`, including the constant term `(0, 0)`.
pub fn predicted_x_exponents(s: &ModeSpectrum, n: usize, gamma: f64, k: usize) -> Result<Vec<(f64, usize)>> {
    let roots = q_set(s, n, gamma, k)?;
    let mut out = vec![(0.0, 0)];
    for r in roots {
        let alpha = -r.rho.re;
        if alpha.abs() < MERGE_TOL {
            out[0].1 = out[0].1.max(r.eta);
        } else {
            out.push((alpha, r.eta));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Laplacian,
    Pme,
    Sh,
}

/// One inequality `lhs < rhs` (or `<=` when `strict` is false).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub description: String,
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
}

impl Constraint {
    fn less(description: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { description: description.into(), satisfied: lhs < rhs, lhs, rhs, strict: true }
    }

    fn less_eq(description: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { description: description.into(), satisfied: lhs <= rhs, lhs, rhs, strict: false }
    }

    /// Re-evaluates the inequality from the stored numbers.
    pub fn recheck(&self) -> bool {
        if self.strict {
            self.lhs < self.rhs
        } else {
            self.lhs <= self.rhs
        }
    }
}

/// An interval for a scalar parameter plus the inequality ledger behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterWindow {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub constraints: Vec<Constraint>,
    pub admissible: bool,
}

impl ParameterWindow {
    fn open(name: &str, lo: f64, hi: f64, mut constraints: Vec<Constraint>) -> Self {
        constraints.insert(0, Constraint::less(format!("{name} interval non-empty"), lo, hi));
        let admissible = constraints.iter().all(|c| c.satisfied);
        Self { name: name.into(), lo, hi, lo_closed: false, hi_closed: false, constraints, admissible }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_closed { v >= self.lo } else { v > self.lo };
        let below = if self.hi_closed { v <= self.hi } else { v < self.hi };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    /// Midpoint of the interval, if non-empty.
    pub fn midpoint(&self) -> Option<f64> {
        (!self.is_empty()).then_some(0.5 * (self.lo + self.hi))
    }
}

fn spectral_gap(n: usize, lambda1: f64) -> f64 {
    let h = (n as f64 - 1.0) / 2.0;
    (h * h - lambda1).sqrt()
}

/// Admissible weights `gamma` for the Laplacian, PME, or Swift-Hohenberg problem.
pub fn weight_window(problem: Problem, n: usize, lambda1: f64, q: f64) -> Result<ParameterWindow> {
    if !(lambda1 < 0.0) {
        return invalid(format!("lambda1 must be negative, got {lambda1}"));
    }
    let mut lo = (n as f64 - 3.0) / 2.0;
    if problem != Problem::Laplacian {
        if !(q > 1.0) {
            return invalid(format!("q must exceed 1, got {q}"));
        }
        lo += 2.0 / q;
    }
    let hi = (-1.0 + spectral_gap(n, lambda1)).min((n as f64 + 1.0) / 2.0);
    Ok(ParameterWindow::open("gamma", lo, hi, Vec::new()))
}

/// Ledger of every well-posedness inequality for `(p, q, gamma, s0)`.
///
/// `gamma` and `s0` are optional; their constraints are listed only when given.
pub fn validate_parameters(
    problem: Problem,
    n: usize,
    lambda1: f64,
    p: f64,
    q: f64,
    gamma: Option<f64>,
    s0: Option<f64>,
) -> Result<ParameterWindow> {
    if !(p > 1.0 && q > 1.0) {
        return invalid(format!("p and q must exceed 1, got p={p}, q={q}"));
    }
    let window = weight_window(problem, n, lambda1, q)?;
    let nf = n as f64;
    let h = (nf - 1.0) / 2.0;
    let mut cs = Vec::new();
    if problem != Problem::Laplacian {
        cs.push(Constraint::less("2/q < -(n-1)/2 + sqrt(((n-1)/2)^2 - lambda1)", 2.0 / q, -h + spectral_gap(n, lambda1)));
        match problem {
            Problem::Pme => cs.push(Constraint::less("(n+1)/p + 2/q < 1", (nf + 1.0) / p + 2.0 / q, 1.0)),
            _ => cs.push(Constraint::less("2/q + (n+1)/p < 2", (nf + 1.0) / p + 2.0 / q, 2.0)),
        }
    }
    if let Some(g) = gamma {
        cs.push(Constraint::less("gamma above lower weight bound", window.lo, g));
        cs.push(Constraint::less("gamma below upper weight bound", g, window.hi));
    }
    if let Some(s0) = s0 {
        match problem {
            Problem::Pme => {
                let bound = (-1.0 + (nf + 1.0) / p + 2.0 / q).max(-2.0 / q);
                cs.push(Constraint::less("s0 > max{-1 + (n+1)/p + 2/q, -2/q}", bound, s0));
            }
            _ => cs.push(Constraint::less_eq("s0 >= 0", 0.0, s0)),
        }
    }
    let mut out = ParameterWindow::open("gamma", window.lo, window.hi, cs);
    out.name = "gamma".into();
    Ok(out)
}

/// Time-regularity window `(0, min{2 - (n+1)/p - 2/q, gamma - (n-3)/2 - 2/q} / 2)`.
pub fn delta_window(n: usize, p: f64, q: f64, gamma: f64) -> Result<ParameterWindow> {
    if !(p > 1.0 && q > 1.0) {
        return invalid(format!("p and q must exceed 1, got p={p}, q={q}"));
    }
    let nf = n as f64;
    let a = 2.0 - (nf + 1.0) / p - 2.0 / q;
    let b = gamma - (nf - 3.0) / 2.0 - 2.0 / q;
    let cs = vec![
        Constraint::less("0 < 2 - (n+1)/p - 2/q", 0.0, a),
        Constraint::less("0 < gamma - (n-3)/2 - 2/q", 0.0, b),
    ];
    Ok(ParameterWindow::open("delta", 0.0, 0.5 * a.min(b), cs))
}

/// Decay exponent `gamma + 2k - (n+1)/2 - eps` for the minimal-domain part.
pub fn pointwise_bound_exponent(n: usize, gamma: f64, k: usize, eps: f64) -> Result<f64> {
    if eps < 0.0 {
        return invalid(format!("eps must be non-negative, got {eps}"));
    }
    Ok(gamma + 2.0 * k as f64 - (n as f64 + 1.0) / 2.0 - eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{circle_spectrum, sphere_spectrum};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn roots_of_unit_sphere() {
        let s = sphere_spectrum(2, 1.0, 2).unwrap();
        let r = conormal_roots(&s, 2);
        let pairs: Vec<(f64, f64)> = r.iter().map(|r| (r.rho_plus, r.rho_minus)).collect();
        assert_eq!(pairs, vec![(1.0, 0.0), (2.0, -1.0), (3.0, -2.0)]);
    }

    #[test]
    fn circle_roots() {
        let r = conormal_roots(&circle_spectrum(1.0, 1).unwrap(), 1);
        assert!(r[0].double && r[0].rho_plus == 0.0 && r[0].rho_minus == 0.0);
        let r = conormal_roots(&circle_spectrum(0.5, 1).unwrap(), 1);
        assert_eq!((r[1].rho_plus, r[1].rho_minus), (2.0, -2.0));
        assert!(!r[1].double);
    }

    #[test]
    fn strip_examples() {
        let s = make_strip(StripKind::SK, 1, 0.3, 2).unwrap();
        assert!(close(s.re_min, -3.3) && close(s.re_max, -1.3) && !s.upper_closed);
        let i = make_strip(StripKind::IMuGamma, 1, 0.3, 2).unwrap();
        assert!(close(i.re_min, -1.3) && close(i.re_max, 0.7));
        let v = make_strip(StripKind::VK, 1, 0.3, 2).unwrap();
        assert!(close(v.re_min, -3.3) && close(v.re_max, -1.3) && v.upper_closed);
        assert!(v.contains(v.re_max) && !s.contains(s.re_max) && s.contains(s.re_min));
        assert!(make_strip(StripKind::SK, 1, 0.3, 0).is_err());
    }

    #[test]
    fn q_set_circle() {
        let s = circle_spectrum(1.0, 8).unwrap();
        let q = q_set(&s, 1, 0.3, 2).unwrap();
        let got: Vec<(f64, usize)> = q.iter().map(|r| (r.rho.re, r.eta)).collect();
        assert_eq!(got, vec![(-2.0, 2), (-3.0, 1)]);
        assert_eq!(predicted_x_exponents(&s, 1, 0.3, 2).unwrap(), vec![(0.0, 0), (2.0, 2), (3.0, 1)]);
        assert_eq!(q[0].eta_standard(), 1);
    }

    #[test]
    fn q_set_sphere_max_over_modes() {
        // Mode 0 contributes -1 and -2 once each (shift 1); modes 1 and 2
        // contribute -1 and -2 once each (shift 0). Max over modes is 1.
        let s = sphere_spectrum(2, 1.0, 8).unwrap();
        let q = q_set(&s, 2, 0.4, 2).unwrap();
        let got: Vec<(f64, usize)> = q.iter().map(|r| (r.rho.re, r.eta)).collect();
        assert_eq!(got, vec![(-1.0, 1), (-2.0, 1)]);
        assert_eq!(q[0].sources.len(), 2);
        assert_eq!(predicted_x_exponents(&s, 2, 0.4, 2).unwrap(), vec![(0.0, 0), (1.0, 1), (2.0, 1)]);
    }

    #[test]
    fn q_one_is_empty() {
        let s = circle_spectrum(1.0, 1).unwrap();
        assert!(q_set(&s, 1, 0.3, 1).unwrap().is_empty());
        assert_eq!(predicted_x_exponents(&s, 1, 0.3, 1).unwrap(), vec![(0.0, 0)]);
    }

    #[test]
    fn truncation_is_detected() {
        let s = circle_spectrum(1.0, 1).unwrap();
        assert!(matches!(q_set(&s, 1, 0.3, 2), Err(ConeError::IncompleteSpectrum { .. })));
        let l = required_l_max(&CrossSection::Circle { a: 1.0 }, 0.3, 2).unwrap();
        let big = circle_spectrum(1.0, l).unwrap();
        assert!(q_set(&big, 1, 0.3, 2).is_ok());
        assert!(q_set(&circle_spectrum(1.0, l - 1).unwrap(), 1, 0.3, 2).is_err());
    }

    #[test]
    fn weight_window_examples() {
        let w = weight_window(Problem::Laplacian, 2, -2.0, 0.0).unwrap();
        assert!(close(w.lo, -0.5) && close(w.hi, 0.5) && w.admissible);
        let w = weight_window(Problem::Pme, 2, -2.0, 40.0).unwrap();
        assert!(close(w.lo, -0.45) && close(w.hi, 0.5));
        let w = weight_window(Problem::Laplacian, 1, -1.0, 0.0).unwrap();
        assert!(close(w.lo, -1.0) && close(w.hi, 0.0));
        assert!(weight_window(Problem::Laplacian, 1, 0.0, 2.0).is_err());
        assert!(weight_window(Problem::Pme, 1, -1.0, 1.0).is_err());
    }

    #[test]
    fn validate_examples() {
        let v = validate_parameters(Problem::Pme, 1, -4.0, 12.0, 12.0, Some(0.3), Some(-0.1)).unwrap();
        assert!(v.admissible);
        let v = validate_parameters(Problem::Pme, 1, -4.0, 12.0, 12.0, Some(0.3), Some(-0.2)).unwrap();
        assert!(!v.admissible);
        let v = validate_parameters(Problem::Pme, 1, -4.0, 3.0, 3.0, None, None).unwrap();
        assert!(!v.admissible);
        let bad = v.constraints.iter().find(|c| !c.satisfied).unwrap();
        assert!(close(bad.lhs, 4.0 / 3.0) && bad.rhs == 1.0);
        let v = validate_parameters(Problem::Sh, 1, -4.0, 3.0, 3.0, None, None).unwrap();
        assert!(v.admissible);
        for c in &v.constraints {
            assert_eq!(c.recheck(), c.satisfied);
        }
    }

    #[test]
    fn delta_window_examples() {
        let d = delta_window(1, 12.0, 12.0, 0.3).unwrap();
        assert!(close(d.lo, 0.0) && close(d.hi, 17.0 / 30.0));
        let d = delta_window(1, 12.0, 12.0, 1.0 / 6.0).unwrap();
        assert!(close(d.hi, 0.5) && d.admissible);
        let d = delta_window(3, 20.0, 20.0, 1.5).unwrap();
        assert!(close(d.hi, 0.7));
        let d = delta_window(1, 12.0, 12.0, -5.0 / 6.0).unwrap();
        assert!(d.is_empty() && !d.admissible);
    }

    #[test]
    fn pointwise_exponent_examples() {
        assert!(close(pointwise_bound_exponent(1, 0.3, 2, 0.01).unwrap(), 3.29));
        assert!(close(pointwise_bound_exponent(2, 0.0, 1, 0.0).unwrap(), 0.5));
        assert!(close(pointwise_bound_exponent(3, 1.0, 2, 0.1).unwrap(), 2.9));
        assert!(pointwise_bound_exponent(1, 0.0, 1, -0.1).is_err());
    }

    mod props {
        use super::*;
        use crate::spectrum::custom_spectrum;
        use proptest::prelude::*;

        fn arb_spectrum() -> impl Strategy<Value = (ModeSpectrum, usize)> {
            (1usize..5, prop::collection::vec(0.01f64..50.0, 1..6)).prop_map(|(n, mags)| {
                let mut pairs = vec![(0.0, 1)];
                let mut acc = 0.0;
                for m in mags {
                    acc += m;
                    pairs.push((-acc, 1));
                }
                (custom_spectrum(&pairs, n).unwrap(), n)
            })
        }

        proptest! {
            #[test]
            fn vieta((s, n) in arb_spectrum()) {
                for r in conormal_roots(&s, n) {
                    let scale = 1.0 + r.lambda.abs();
                    prop_assert!((r.rho_plus + r.rho_minus - (n as f64 - 1.0)).abs() < 1e-12 * scale);
                    prop_assert!((r.rho_plus * r.rho_minus - r.lambda).abs() < 1e-10 * scale);
                }
            }

            #[test]
            fn q_set_points_lie_in_strip(a in prop::sample::select(vec![0.5, 1.0, 2.0]), t in 0.01f64..0.99, k in 2usize..5) {
                let cs = CrossSection::Circle { a };
                let w = weight_window(Problem::Laplacian, 1, -1.0 / (a * a), 0.0).unwrap();
                let gamma = w.lo + t * (w.hi - w.lo);
                let s = cs.spectrum(required_l_max(&cs, gamma, k).unwrap()).unwrap();
                let strip = make_strip(StripKind::SK, 1, gamma, k).unwrap();
                let prev: Vec<f64> = q_set(&s, 1, gamma, k - 1).unwrap().iter().map(|r| r.rho.re).collect();
                let vk = make_strip(StripKind::VK, 1, gamma, k).unwrap();
                for r in q_set(&s, 1, gamma, k).unwrap() {
                    prop_assert!(strip.contains(r.rho.re));
                    prop_assert!(r.eta >= 1);
                    let old = prev.iter().any(|p| (p - r.rho.re).abs() < MERGE_TOL);
                    prop_assert!(old || vk.contains(r.rho.re));
                }
            }

            #[test]
            fn q_set_stable_under_more_modes(t in 0.01f64..0.99, k in 2usize..5, extra in 1usize..10) {
                let cs = CrossSection::Sphere { n: 2, a: 1.0 };
                let w = weight_window(Problem::Laplacian, 2, -2.0, 0.0).unwrap();
                let gamma = w.lo + t * (w.hi - w.lo);
                let l = required_l_max(&cs, gamma, k).unwrap();
                let a = q_set(&cs.spectrum(l).unwrap(), 2, gamma, k).unwrap();
                let b = q_set(&cs.spectrum(l + extra).unwrap(), 2, gamma, k).unwrap();
                let strip = |v: &[IndicialRoot]| v.iter().map(|r| (r.rho.re, r.eta)).collect::<Vec<_>>();
                prop_assert_eq!(strip(&a), strip(&b));
            }

            #[test]
            fn weight_window_upper_formula(n in 1usize..6, l1 in 0.01f64..100.0) {
                let w = weight_window(Problem::Laplacian, n, -l1, 0.0).unwrap();
                let h = (n as f64 - 1.0) / 2.0;
                let want = (-1.0 + (h * h + l1).sqrt()).min((n as f64 + 1.0) / 2.0);
                prop_assert_eq!(w.hi, want);
                prop_assert_eq!(w.lo, (n as f64 - 3.0) / 2.0);
            }
        }
    }
}
