use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default innermost node for geometric meshes.
pub const DEFAULT_X0: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    /// `x_i = r^(N-i)`, uniform in `log x`.
    Geometric { ratio: f64 },
    /// `x_i = ((i+1)/(N+1))^beta`.
    PowerLaw { beta: f64 },
}

/// Nodes `0 < x_0 < ... < x_N = 1` of the collar. The tip is never a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialMesh {
    pub grading: Grading,
    nodes: Vec<f64>,
}

impl RadialMesh {
    /// Geometric mesh with `intervals` cells and innermost node `x0`.
    pub fn geometric(intervals: usize, x0: f64) -> Result<Self> {
        if !(x0 > 0.0 && x0 < 1.0) {
            return invalid(format!("x0 must lie in (0, 1), got {x0}"));
        }
        if intervals < 2 {
            return invalid("mesh needs at least 2 intervals");
        }
        Self::geometric_ratio(x0.powf(1.0 / intervals as f64), intervals)
    }

    /// Geometric mesh `x_i = r^(N-i)`, so `x_0 = r^N`.
    pub fn geometric_ratio(ratio: f64, intervals: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return invalid(format!("grading ratio must lie in (0, 1), got {ratio}"));
        }
        if intervals < 2 {
            return invalid("mesh needs at least 2 intervals");
        }
        let h = ratio.ln();
        let nodes = (0..=intervals).map(|i| ((intervals - i) as f64 * h).exp()).collect();
        Ok(Self { grading: Grading::Geometric { ratio }, nodes })
    }

    pub fn power_law(intervals: usize, beta: f64) -> Result<Self> {
        if !(beta >= 1.0) || !beta.is_finite() {
            return invalid(format!("power-law exponent must be >= 1, got {beta}"));
        }
        if intervals < 2 {
            return invalid("mesh needs at least 2 intervals");
        }
        let m = intervals as f64 + 1.0;
        let nodes = (0..=intervals).map(|i| ((i as f64 + 1.0) / m).powf(beta)).collect();
        Ok(Self { grading: Grading::PowerLaw { beta }, nodes })
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn x(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn x0(&self) -> f64 {
        self.nodes[0]
    }

    /// `s_i = ln x_i`.
    pub fn log_nodes(&self) -> Vec<f64> {
        self.nodes.iter().map(|x| x.ln()).collect()
    }

    /// Largest spacing in `log x`.
    pub fn max_log_step(&self) -> f64 {
        self.nodes.windows(2).map(|w| (w[1] / w[0]).ln()).fold(0.0, f64::max)
    }

    /// Indices of the nodes inside `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.nodes.partition_point(|&x| x < lo * (1.0 - 1e-12));
        let b = self.nodes.partition_point(|&x| x <= hi * (1.0 + 1e-12));
        a..b.max(a)
    }
}
