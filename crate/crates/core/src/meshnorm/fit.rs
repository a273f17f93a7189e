use serde::{Deserialize, Serialize};

use super::field::{ConeField, Harmonic};
use crate::error::{ConeError, Result};

/// Relative size below which a fit window is considered pure round-off.
pub const NOISE_FLOOR: f64 = 1e-13;
/// Minimum number of mesh nodes inside a fit window.
pub const MIN_WINDOW_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mode: usize,
    pub harmonic: Harmonic,
    pub alpha: f64,
    pub log_power: usize,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    pub window: [f64; 2],
    /// Extrapolated tip value removed before fitting, if any.
    pub tip_constant: Option<f64>,
}

/// Limit at the tip from the three innermost values on a geometric mesh
/// (Aitken's delta-squared, exact for `c + b x^alpha`).
pub fn tip_limit(f: &[f64]) -> f64 {
    let (a, b, c) = (f[0], f[1], f[2]);
    let (d1, d2) = (b - a, c - b);
    let den = d2 - d1;
    if den.abs() <= 1e-300 || den.abs() < 1e-15 * (a.abs() + b.abs() + c.abs()) {
        return a;
    }
    // Correction form; `(ac - b^2) / den` cancels when the differences are tiny.
    a - d1 * d1 / den
}

/// Least squares `y = alpha * lx + c` for fixed `eta`, with `y = ln|f| - eta ln|ln x|`.
fn fit_fixed_eta(lx: &[f64], ly: &[f64], eta: usize) -> (f64, f64) {
    let m = lx.len() as f64;
    let y: Vec<f64> = lx.iter().zip(ly).map(|(s, v)| v - eta as f64 * s.abs().ln()).collect();
    let mx = lx.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let alpha = sxy / sxx;
    let c = my - alpha * mx;
    let rss = lx.iter().zip(&y).map(|(s, v)| (v - alpha * s - c).powi(2)).sum();
    (alpha, rss)
}

/// Fits `|f| ~ C x^alpha |log x|^eta` on `[x_lo, x_hi]`, `eta in {0, 1, 2}`.
///
/// `eta` is chosen by `m ln(RSS/m) + 2 ln(m) eta`. With `subtract_constant`, the
/// constant component is first reduced by its extrapolated tip value.
pub fn fit_exponent(f: &ConeField, h: Harmonic, window: (f64, f64), subtract_constant: bool) -> Result<FitReport> {
    let comp = f.component(h).ok_or_else(|| ConeError::InvalidInput(format!("no component {}", h.label())))?;
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi) {
        return Err(ConeError::DegenerateWindow(format!("[{lo}, {hi}] is not a positive interval")));
    }
    let idx = f.mesh.window(lo, hi);
    if idx.len() < MIN_WINDOW_NODES {
        return Err(ConeError::DegenerateWindow(format!(
            "[{lo:e}, {hi:e}] holds {} nodes, need {MIN_WINDOW_NODES}",
            idx.len()
        )));
    }
    let scale = comp.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tip_constant = (subtract_constant && h.is_constant()).then(|| tip_limit(&comp.values));
    let shift = tip_constant.unwrap_or(0.0);

    let xs = &f.mesh.nodes()[idx.clone()];
    let vals: Vec<f64> = comp.values[idx].iter().map(|v| v - shift).collect();
    let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || peak < NOISE_FLOOR * scale {
        return Err(ConeError::BelowNoiseFloor(peak));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(&vals).filter(|(_, v)| **v != 0.0).map(|(x, v)| (x.ln(), v.abs().ln())).unzip();
    if lx.len() < MIN_WINDOW_NODES {
        return Err(ConeError::DegenerateWindow("too many exact zeros in window".into()));
    }

    let m = lx.len() as f64;
    let mut best: Option<(f64, usize, f64, f64)> = None;
    for eta in 0..=2 {
        let (alpha, rss) = fit_fixed_eta(&lx, &ly, eta);
        let score = m * (rss / m + 1e-28).ln() + 2.0 * m.ln() * eta as f64;
        if best.is_none_or(|b| score < b.0) {
            best = Some((score, eta, alpha, rss));
        }
    }
    let (_, eta, alpha, rss) = best.expect("three candidates");
    Ok(FitReport {
        mode: comp.mode,
        harmonic: h,
        alpha,
        log_power: eta,
        residual: (rss / m).sqrt(),
        window: [lo, hi],
        tip_constant,
    })
}
