//! Independent reference computations used by the integration tests.
//!
//! Nothing here calls into the library's numerics: polynomial roots come from
//! companion matrices, Bessel zeros from a power series plus bisection, and
//! weighted integrals from their antiderivatives.
#![allow(dead_code)]

use nalgebra::DMatrix;

/// Coefficients (constant term first) of `prod_nu p(z + 2 nu)` with
/// `p(z) = z^2 - (n-1) z + lambda`, `nu = 0..k-1`.
pub fn shifted_symbol_product(n: usize, lambda: f64, k: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    for nu in 0..k {
        let c = 2.0 * nu as f64;
        // p(z + c) = z^2 + (2c - (n-1)) z + (c^2 - (n-1) c + lambda)
        let b = 2.0 * c - (n as f64 - 1.0);
        let a0 = c * c - (n as f64 - 1.0) * c + lambda;
        let mut next = vec![0.0; poly.len() + 2];
        for (i, &pc) in poly.iter().enumerate() {
            next[i] += pc * a0;
            next[i + 1] += pc * b;
            next[i + 2] += pc;
        }
        poly = next;
    }
    poly
}

fn eval(poly: &[f64], z: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * z + c)
}

fn abs_eval(poly: &[f64], z: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * z.abs() + c.abs())
}

fn derivative(poly: &[f64]) -> Vec<f64> {
    poly.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect()
}

/// Real roots of a monic polynomial with their multiplicities.
///
/// Companion-matrix eigenvalues are clustered (multiple roots split at about
/// `eps^(1/m)`), refined by Newton, and the multiplicity is then
/// confirmed by counting vanishing derivatives at the refined point.
pub fn real_roots_with_multiplicity(poly: &[f64]) -> Vec<(f64, usize)> {
    let deg = poly.len() - 1;
    let lead = poly[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -poly[i] / lead;
    }
    let eig = comp.complex_eigenvalues();
    let mut pts: Vec<f64> = eig.iter().map(|z| z.re).collect();
    assert!(eig.iter().all(|z| z.im.abs() < 1e-3), "unexpected complex root");
    pts.sort_by(|a, b| a.total_cmp(b));

    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for p in pts {
        match clusters.last_mut() {
            Some(c) if (p - c[c.len() - 1]).abs() < 1e-4 => c.push(p),
            _ => clusters.push(vec![p]),
        }
    }
    clusters
        .into_iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            // A root of multiplicity m is a simple root of the (m-1)-th derivative;
            // Newton there removes the eps^(1/m) cluster spread.
            let mut dm = poly.to_vec();
            for _ in 1..c.len() {
                dm = derivative(&dm);
            }
            let dm1 = derivative(&dm);
            let mut snapped = mean;
            for _ in 0..60 {
                let step = eval(&dm, snapped) / eval(&dm1, snapped);
                if !step.is_finite() {
                    break;
                }
                snapped -= step;
            }
            let mut d = poly.to_vec();
            let mut m = 0;
            // Horner's rounding bound is about deg * eps * sum |c_i| |z|^i.
            while m < deg && eval(&d, snapped).abs() <= 1e-11 * abs_eval(&d, snapped) {
                d = derivative(&d);
                m += 1;
            }
            assert_eq!(m, c.len(), "derivative test disagrees with cluster size at {snapped}");
            (snapped, m)
        })
        .collect()
}

/// `(rho, eta)` pairs in `[re_min, re_max)`: per-mode multiplicities from the
/// expanded product, maximized across modes.
pub fn q_set_oracle(n: usize, lambdas: &[f64], k: usize, re_min: f64, re_max: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &lam in lambdas {
        for (z, m) in real_roots_with_multiplicity(&shifted_symbol_product(n, lam, k)) {
            if z < re_min || z >= re_max {
                continue;
            }
            match out.iter_mut().find(|(r, _)| (r - z).abs() < 1e-6) {
                Some(e) => e.1 = e.1.max(m),
                None => out.push((z, m)),
            }
        }
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

/// `J_nu(x) / (x/2)^nu * Gamma(nu+1)` by its power series; same positive zeros as `J_nu`.
pub fn bessel_reduced(nu: f64, x: f64) -> f64 {
    let y = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..400 {
        term *= y / (m as f64 * (m as f64 + nu));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && m > 10 {
            break;
        }
    }
    sum
}

/// First `count` positive zeros of `J_nu` by scanning and bisection.
pub fn bessel_zeros(nu: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let step = 0.05;
    let mut a = 1e-3;
    let mut fa = bessel_reduced(nu, a);
    while out.len() < count {
        let b = a + step;
        let fb = bessel_reduced(nu, b);
        if fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = bessel_reduced(nu, mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
        assert!(a < 60.0, "power series no longer trustworthy");
    }
    out
}

/// `int_{x0}^{x1} x^e dx/x`, infinite when `e <= 0` and `x0 -> 0` is requested via `x0 = 0`.
pub fn power_integral(e: f64, x0: f64, x1: f64) -> f64 {
    if e == 0.0 {
        (x1 / x0).ln()
    } else {
        (x1.powf(e) - x0.powf(e)) / e
    }
}

/// Rate of decay of `ln y` against `ln x`: least-squares slope.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Largest `(1+|z|)/|a+z|` over the scalar eigenvalues `a` and sample points `z`.
pub fn scalar_sector_bound(eigs: &[f64], samples: &[(f64, f64)]) -> f64 {
    let mut best: f64 = 0.0;
    for &(zr, zi) in samples {
        let mag = (zr * zr + zi * zi).sqrt();
        for &a in eigs {
            let d = ((a + zr).powi(2) + zi * zi).sqrt();
            best = best.max((1.0 + mag) / d);
        }
    }
    best
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn half_integer_zeros_are_multiples_of_pi() {
        let z = bessel_zeros(0.5, 4);
        for (m, zm) in z.iter().enumerate() {
            assert!((zm - (m as f64 + 1.0) * std::f64::consts::PI).abs() < 1e-10);
        }
    }

    #[test]
    fn tabulated_integer_order_zeros() {
        assert!((bessel_zeros(0.0, 1)[0] - 2.404_825_557_695_77).abs() < 1e-11);
        assert!((bessel_zeros(1.0, 1)[0] - 3.831_705_970_207_51).abs() < 1e-11);
    }

    #[test]
    fn product_roots() {
        // z^2 (z+2)^2 for the zero mode on a circle.
        let r = real_roots_with_multiplicity(&shifted_symbol_product(1, 0.0, 2));
        assert_eq!(r, vec![(-2.0, 2), (0.0, 2)]);
    }
}
