use serde::{Deserialize, Serialize};

use super::field::{cross_norms, sup_abs, ConeField};
use crate::error::{invalid, Result};
use crate::indicial::pointwise_bound_exponent;

/// Cut-off `omega`: 1 on `(0, inner]`, smoothly down to 0 at `outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { inner: 0.5, outer: 1.0 }
    }
}

impl Cutoff {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.inner {
            return 1.0;
        }
        if x >= self.outer {
            return 0.0;
        }
        // Standard C^inf step built from exp(-1/t).
        let t = (self.outer - x) / (self.outer - self.inner);
        let phi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        phi(t) / (phi(t) + phi(1.0 - t))
    }
}

/// Tip slope of the integrand below which a norm is reported as divergent.
pub const DIVERGENCE_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MellinNorm {
    pub value: f64,
    /// The integrand does not decay towards the tip (in `dx/x`), so the value
    /// grows without bound as `x_0 -> 0`.
    pub divergent: bool,
    /// Power of `x` fitted to the integrand over the innermost decade.
    pub tip_slope: f64,
    pub s: usize,
    pub gamma: f64,
    pub p: f64,
    pub cutoff: Cutoff,
}

/// `x d/dx` of nodal values by second-order differences in `log x`.
pub fn log_derivative(s: &[f64], f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for i in 1..n - 1 {
        let h1 = s[i] - s[i - 1];
        let h2 = s[i + 1] - s[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i] + h1 / (h2 * (h1 + h2)) * f[i + 1];
    }
    let (h1, h2) = (s[1] - s[0], s[2] - s[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] - h1 / (h2 * (h1 + h2)) * f[2];
    let (h1, h2) = (s[n - 2] - s[n - 3], s[n - 1] - s[n - 2]);
    d[n - 1] = h2 / (h1 * (h1 + h2)) * f[n - 3] - (h1 + h2) / (h1 * h2) * f[n - 2] + (h1 + 2.0 * h2) / (h2 * (h1 + h2)) * f[n - 1];
    d
}

/// Trapezoid rule for nodal values `v` over `[a, b]` with linear interpolation at partial cells.
pub fn trapezoid_on(s: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..s.len().saturating_sub(1) {
        let (s0, s1) = (s[i], s[i + 1]);
        let lo = s0.max(a);
        let hi = s1.min(b);
        if hi <= lo {
            continue;
        }
        let lerp = |t: f64| v[i] + (v[i + 1] - v[i]) * (t - s0) / (s1 - s0);
        total += 0.5 * (lerp(lo) + lerp(hi)) * (hi - lo);
    }
    total
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn integrand(f: &ConeField, s_order: usize, gamma: f64, p: f64, cutoff: &Cutoff) -> Result<Vec<f64>> {
    if s_order > 2 {
        return invalid(format!("Mellin norm order s must be <= 2, got {s_order}"));
    }
    if !(p > 1.0) {
        return invalid(format!("p must exceed 1, got {p}"));
    }
    let mesh = &f.mesh;
    let logs = mesh.log_nodes();
    let w_exp = p * ((f.dim() as f64 + 1.0) / 2.0 - gamma);

    let mut base = f.clone();
    for c in &mut base.components {
        for (v, &x) in c.values.iter_mut().zip(mesh.nodes()) {
            *v *= cutoff.eval(x);
        }
    }

    let mut total = vec![0.0; mesh.len()];
    let mut radial = base;
    for k in 0..=s_order {
        if k > 0 {
            for c in &mut radial.components {
                c.values = log_derivative(&logs, &c.values);
            }
        }
        for t in 0..=(s_order - k) {
            let mut term = radial.clone();
            for c in &mut term.components {
                let factor = (-c.lambda).max(0.0).sqrt().powi(t as i32);
                c.values.iter_mut().for_each(|v| *v *= factor);
            }
            for (acc, (nrm, &x)) in total.iter_mut().zip(cross_norms(&term, p).iter().zip(mesh.nodes())) {
                *acc += x.powf(w_exp) * nrm.powf(p);
            }
        }
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn finish(f: &ConeField, vals: Vec<f64>, lo: f64, hi: f64, s: usize, gamma: f64, p: f64, cutoff: Cutoff) -> MellinNorm {
    let logs = f.mesh.log_nodes();
    let integral = trapezoid_on(&logs, &vals, lo.ln(), hi.ln());

    let decade = f.mesh.window(f.mesh.x0(), 10.0 * f.mesh.x0());
    let end = decade.end.max(5).min(vals.len());
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        (0..end).filter(|&i| vals[i] > 0.0).map(|i| (logs[i], vals[i].ln())).unzip();
    let tip_slope = if xs.len() >= 2 { least_squares_slope(&xs, &ys) } else { f64::INFINITY };
    MellinNorm {
        value: integral.powf(1.0 / p),
        divergent: tip_slope < DIVERGENCE_SLOPE,
        tip_slope,
        s,
        gamma,
        p,
        cutoff,
    }
}

/// Discrete `H^{s,gamma}_p` norm of `omega * f` over the whole collar.
pub fn mellin_norm(f: &ConeField, s: usize, gamma: f64, p: f64) -> Result<MellinNorm> {
    let cutoff = Cutoff::default();
    let vals = integrand(f, s, gamma, p, &cutoff)?;
    Ok(finish(f, vals, f.mesh.x0(), 1.0, s, gamma, p, cutoff))
}

/// As [`mellin_norm`], integrating only over `[lo, hi]`.
pub fn mellin_norm_on(f: &ConeField, s: usize, gamma: f64, p: f64, lo: f64, hi: f64) -> Result<MellinNorm> {
    if !(lo < hi) {
        return invalid(format!("empty integration range [{lo}, {hi}]"));
    }
    let cutoff = Cutoff::default();
    let vals = integrand(f, s, gamma, p, &cutoff)?;
    Ok(finish(f, vals, lo.max(f.mesh.x0()), hi.min(1.0), s, gamma, p, cutoff))
}

/// Weighted `L^p` norm `(int x^{p((n+1)/2-gamma)} |u|^p dy dx/x)^(1/p)` over the
/// whole model, without cut-off.
pub fn weighted_lp(f: &ConeField, gamma: f64, p: f64) -> f64 {
    let w_exp = p * ((f.dim() as f64 + 1.0) / 2.0 - gamma);
    let vals: Vec<f64> =
        cross_norms(f, p).iter().zip(f.mesh.nodes()).map(|(nrm, &x)| x.powf(w_exp) * nrm.powf(p)).collect();
    let logs = f.mesh.log_nodes();
    trapezoid_on(&logs, &vals, logs[0], 0.0).powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub holds: bool,
    pub worst_ratio: f64,
    pub worst_x: f64,
    pub exponent: f64,
}

/// `|f(x, y)| <= L x^{gamma + 2k - (n+1)/2 - eps}` at every node.
pub fn decay_bound_check(f: &ConeField, n: usize, gamma: f64, k: usize, eps: f64, l_bound: f64) -> Result<DecayCheck> {
    let exponent = pointwise_bound_exponent(n, gamma, k, eps)?;
    let sup = sup_abs(f);
    let mut worst = (0.0, f.mesh.x0());
    for (s, &x) in sup.iter().zip(f.mesh.nodes()) {
        let r = s / x.powf(exponent);
        if r > worst.0 {
            worst = (r, x);
        }
    }
    Ok(DecayCheck { holds: worst.0 <= l_bound * (1.0 + 1e-12), worst_ratio: worst.0, worst_x: worst.1, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshnorm::{Harmonic, RadialMesh};
    use crate::spectrum::{circle_spectrum, CrossSection};
    use std::sync::Arc;

    fn field(n_int: usize, x0: f64, f: impl Fn(f64) -> f64) -> ConeField {
        let spec = circle_spectrum(1.0, 2).unwrap();
        let mesh = Arc::new(RadialMesh::geometric(n_int, x0).unwrap());
        let mut u = ConeField::zeros(mesh, Arc::new(CrossSection::Circle { a: 1.0 }), &spec);
        u.set_fn(Harmonic::Cos(0), f).unwrap();
        u
    }

    #[test]
    fn cutoff_shape() {
        let c = Cutoff::default();
        assert_eq!(c.eval(0.3), 1.0);
        assert_eq!(c.eval(0.5), 1.0);
        assert_eq!(c.eval(1.0), 0.0);
        assert!((c.eval(0.75) - 0.5).abs() < 1e-15);
        let xs: Vec<f64> = (0..=100).map(|i| 0.5 + i as f64 * 0.005).collect();
        assert!(xs.windows(2).all(|w| c.eval(w[0]) >= c.eval(w[1])));
    }

    #[test]
    fn log_derivative_is_second_order() {
        let err = |n: usize| {
            let m = RadialMesh::geometric(n, 1e-3).unwrap();
            let s = m.log_nodes();
            let f: Vec<f64> = m.nodes().iter().map(|x| x.powf(1.5)).collect();
            let d = log_derivative(&s, &f);
            m.nodes().iter().zip(&d).map(|(x, di)| (di - 1.5 * x.powf(1.5)).abs()).fold(0.0, f64::max)
        };
        let order = (err(200) / err(400)).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let u = field(100, 1e-4, |_| 0.0);
        let n = mellin_norm(&u, 2, 0.0, 2.0).unwrap();
        assert_eq!(n.value, 0.0);
        assert!(!n.divergent);
    }

    #[test]
    fn divergence_flag() {
        // x^{2(0.4 + 1 - 1.5)} = x^{-0.2} in dx/x: divergent.
        let u = field(400, 1e-6, |x| x.powf(0.4));
        assert!(mellin_norm(&u, 0, 1.5, 2.0).unwrap().divergent);
        // With gamma = 1 the integrand is x^{0.8}: finite.
        assert!(!mellin_norm(&u, 0, 1.0, 2.0).unwrap().divergent);
        let v = field(400, 1e-6, |x| x * x);
        assert!(!mellin_norm(&v, 0, 0.0, 2.0).unwrap().divergent);
    }

    #[test]
    fn bad_orders() {
        let u = field(10, 1e-2, |x| x);
        assert!(mellin_norm(&u, 3, 0.0, 2.0).is_err());
        assert!(mellin_norm(&u, 0, 0.0, 1.0).is_err());
    }

    #[test]
    fn decay_bound_examples() {
        let c = decay_bound_check(&field(200, 1e-6, |x| x.powi(4)), 1, 0.3, 2, 0.01, 1.0).unwrap();
        assert!(c.holds && (c.exponent - 3.29).abs() < 1e-12);
        let c = decay_bound_check(&field(200, 1e-6, |_| 1.0), 1, 0.3, 2, 0.01, 1.0).unwrap();
        assert!(!c.holds && c.worst_x < 2e-6);
        let c = decay_bound_check(&field(200, 1e-6, |x| x.powf(3.29)), 1, 0.3, 2, 0.01, 1.0).unwrap();
        assert!(c.holds && (c.worst_ratio - 1.0).abs() < 1e-12);
    }
}
