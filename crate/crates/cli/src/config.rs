//! Experiment configuration files.

use std::path::{Path, PathBuf};

use cone_core::conesolve::{mode_eigenpairs, ConeModel, ModelSpec, SolverConfig};
use cone_core::freezeflow::DecomposeOptions;
use cone_core::indicial::Problem;
use cone_core::meshnorm::{ConeField, Harmonic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Context, Result};

/// Evolution problem as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemArg {
    Heat,
    Pme,
    Sh,
}

impl ProblemArg {
    pub fn core(self) -> Problem {
        match self {
            ProblemArg::Heat => Problem::Laplacian,
            ProblemArg::Pme => Problem::Pme,
            ProblemArg::Sh => Problem::Sh,
        }
    }

    pub fn from_core(p: Problem) -> Self {
        match p {
            Problem::Laplacian => ProblemArg::Heat,
            Problem::Pme => ProblemArg::Pme,
            Problem::Sh => ProblemArg::Sh,
        }
    }
}

/// A model given inline or as a path to a model JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Inline(ModelSpec),
    Path(PathBuf),
}

impl ModelRef {
    /// Resolves relative paths against `base`.
    pub fn load(&self, base: &Path) -> Result<ModelSpec> {
        match self {
            ModelRef::Inline(m) => Ok(m.clone()),
            ModelRef::Path(p) => read_json(&base.join(p)),
        }
    }
}

/// Radial profile of one initial-data component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant { value: f64 },
    /// `sum_i coeffs[i] x^i`.
    Polynomial { coeffs: Vec<f64> },
    /// `offset + amplitude cos(freq x)`.
    Cosine { offset: f64, amplitude: f64, freq: f64 },
    /// Discrete eigenvector `index` of the component's radial operator
    /// (homogeneous outer condition, unit weighted norm).
    Eigenvector {
        index: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Independent uniform values in `[-amplitude, amplitude]`, drawn from the run seed.
    Random { amplitude: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialComponent {
    pub harmonic: Harmonic,
    pub profile: Profile,
}

/// Initial data as a sum of profiles; repeated harmonics add up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub components: Vec<InitialComponent>,
}

impl InitialData {
    pub fn build(&self, model: &ConeModel, seed: u64) -> Result<ConeField> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = model.zeros();
        let x = model.mesh.nodes().to_vec();
        for c in &self.components {
            let idx = u
                .index_of(c.harmonic)
                .ok_or_else(|| CliError::Config(format!("harmonic {} is not in the model basis", c.harmonic.label())))?;
            let mode = u.components[idx].mode;
            let add: Vec<f64> = match &c.profile {
                Profile::Constant { value } => vec![*value; x.len()],
                Profile::Polynomial { coeffs } => x.iter().map(|&x| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)).collect(),
                Profile::Cosine { offset, amplitude, freq } => x.iter().map(|&x| offset + amplitude * (freq * x).cos()).collect(),
                Profile::Eigenvector { index, scale } => {
                    let pairs = mode_eigenpairs(model, mode, index + 1).context("initial eigenvector")?;
                    pairs[*index].vector.iter().map(|v| scale * v).collect()
                }
                Profile::Random { amplitude } => x.iter().map(|_| amplitude * rng.random_range(-1.0..=1.0)).collect(),
            };
            for (v, a) in u.components[idx].values.iter_mut().zip(add) {
                *v += a;
            }
        }
        Ok(u)
    }

    /// Components initialized with an eigenvector, with the eigenvector index.
    pub fn eigen_components(&self) -> Vec<(Harmonic, usize)> {
        self.components
            .iter()
            .filter_map(|c| match c.profile {
                Profile::Eigenvector { index, .. } => Some((c.harmonic, index)),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootsTask {
    pub gamma: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsTask {
    pub problem: ProblemArg,
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub s0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitTask {
    /// Slice time; the last slice when absent.
    #[serde(default)]
    pub time: Option<f64>,
    /// Harmonics to fit; every component when empty.
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
    #[serde(default = "default_fit_window")]
    pub window: [f64; 2],
    #[serde(default)]
    pub subtract_constant: bool,
}

pub fn default_fit_window() -> [f64; 2] {
    [1e-4, 1e-2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeTask {
    pub tau: f64,
    pub nu: f64,
    #[serde(default)]
    pub options: DecomposeOptions,
    /// Nested window ends for the bound scan (at least three).
    #[serde(default)]
    pub nus: Vec<f64>,
    /// `(t, eps)` for the shrinking-window search.
    #[serde(default)]
    pub window_search: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeTask {
    /// Slice time; the first slice when absent.
    #[serde(default)]
    pub time: Option<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Also run the shift scan over every slice.
    #[serde(default)]
    pub scan: bool,
}

pub fn default_theta() -> f64 {
    0.75 * std::f64::consts::PI
}

pub fn default_samples() -> usize {
    41
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tasks {
    #[serde(default)]
    pub roots: Option<RootsTask>,
    #[serde(default)]
    pub windows: Option<WindowsTask>,
    #[serde(default)]
    pub fit: Option<FitTask>,
    #[serde(default)]
    pub decompose: Option<DecomposeTask>,
    #[serde(default)]
    pub probe: Option<ProbeTask>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: Option<ModelRef>,
    #[serde(default)]
    pub problem: Option<ProblemArg>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: Option<InitialData>,
    #[serde(default)]
    pub tasks: Tasks,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
