use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cone_core::conesolve::TimeStepper;
use cone_core::meshnorm::Harmonic;

use crate::config::ProblemArg;
use crate::output::parse_list;

#[derive(Debug, Parser)]
#[command(name = "conetool", version, about = "Near-tip asymptotics experiments on model cones")]
pub struct Cli {
    /// Experiment configuration (JSON); flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file (`*.json`) or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed for randomized initial data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for mode-parallel solves.
    #[arg(long, global = true, env = "CONETOOL_THREADS")]
    pub threads: Option<usize>,

    #[arg(long, short, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArg {
    /// Model JSON (cross section, spectrum cutoff, mesh, outer condition).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-section spectrum and conormal roots.
    Spectrum {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Indicial root set of Delta^k in the weight strip.
    Roots {
        #[command(flatten)]
        model: ModelArg,
        /// Weight gamma of the Mellin-Sobolev space.
        #[arg(long, allow_negative_numbers = true)]
        gamma: Option<f64>,
        /// Power of the Laplacian; the strip has width 2k - 2.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Admissible weight and exponent windows.
    Windows {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_enum)]
        problem: Option<ProblemArg>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        gamma: Option<f64>,
        #[arg(long)]
        s0: Option<f64>,
    },
    /// Evolve initial data and write a trajectory directory.
    Solve(SolveArgs),
    /// Near-tip exponent fits on one trajectory slice.
    Fit {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        time: Option<f64>,
        /// Harmonic labels such as `cos1`; every component when omitted.
        #[arg(long = "harmonic", value_parser = parse_harmonic)]
        harmonics: Vec<Harmonic>,
        #[arg(long, value_parser = parse_pair)]
        window: Option<[f64; 2]>,
        #[arg(long)]
        subtract_constant: bool,
    },
    /// Frozen-coefficient split of a trajectory on a window.
    Decompose(DecomposeArgs),
    /// Scalar sectoriality probe of a frozen operator or a diagonal matrix.
    Probe(ProbeArgs),
    /// Compare a report against a golden file.
    Compare {
        report: PathBuf,
        golden: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        abs_tol: f64,
        #[arg(long, default_value_t = 1e-9)]
        rel_tol: f64,
        /// Per-field absolute tolerance, `name=tol` (full path or final field name).
        #[arg(long = "field-tol", value_parser = parse_field_tol)]
        field_tol: Vec<(String, f64)>,
        #[arg(long)]
        include_manifest: bool,
    },
    /// Run every task of `--config` and write a summary.
    #[command(visible_alias = "run")]
    Report,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(value_enum)]
    pub problem: ProblemArg,
    #[command(flatten)]
    pub model: ModelArg,
    /// Initial data JSON; defaults to the config's `initial` entry.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Output times, comma separated.
    #[arg(long, value_parser = parse_float_list)]
    pub times: Option<FloatList>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// `backward_euler` (`be`) or `trbdf2`.
    #[arg(long, value_parser = parse_stepper)]
    pub stepper: Option<TimeStepper>,
    /// Porous medium exponent.
    #[arg(long)]
    pub m: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// `lo,hi` window for the smooth-part exponent fits.
    #[arg(long, value_parser = parse_pair)]
    pub fit_window: Option<[f64; 2]>,
    /// Nested window ends for the bound scan.
    #[arg(long, value_parser = parse_float_list)]
    pub nus: Option<FloatList>,
    /// Shrinking-window search around this time.
    #[arg(long)]
    pub search_at: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// `TRAJ_DIR@TIME`.
    #[arg(long)]
    pub matrix_from: Option<String>,
    /// Probe `diag(d)` instead of a frozen operator.
    #[arg(long, value_parser = parse_float_list, allow_negative_numbers = true)]
    pub diagonal: Option<FloatList>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Smallest finite shift at every slice of the trajectory.
    #[arg(long)]
    pub scan: bool,
}

/// Comma-separated numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

fn parse_float_list(s: &str) -> Result<FloatList, String> {
    parse_list(s).map(FloatList)
}

pub fn parse_harmonic(s: &str) -> Result<Harmonic, String> {
    let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(|| format!("no degree in harmonic '{s}'"))?;
    let l: usize = s[split..].parse().map_err(|e| format!("bad degree in '{s}': {e}"))?;
    match &s[..split] {
        "cos" => Ok(Harmonic::Cos(l)),
        "sin" => Ok(Harmonic::Sin(l)),
        "zonal" => Ok(Harmonic::Zonal(l)),
        "mode" => Ok(Harmonic::Mode(l)),
        k => Err(format!("unknown harmonic kind '{k}'")),
    }
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(format!("expected LO,HI, got '{s}'")),
    }
}

fn parse_stepper(s: &str) -> Result<TimeStepper, String> {
    match s {
        "backward_euler" | "be" => Ok(TimeStepper::BackwardEuler),
        "tr_bdf2" | "trbdf2" => Ok(TimeStepper::TrBdf2),
        _ => Err(format!("unknown stepper '{s}' (backward_euler | trbdf2)")),
    }
}

fn parse_field_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=TOL, got '{s}'"))?;
    Ok((k.to_string(), v.parse().map_err(|e| format!("bad tolerance '{v}': {e}"))?))
}
