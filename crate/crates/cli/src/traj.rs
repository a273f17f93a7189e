//! Trajectory directories: `manifest.json` plus one CSV per time slice.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cone_core::conesolve::{ConeModel, ModelSpec, SolverConfig, TimeStepper, Trajectory};
use cone_core::indicial::Problem;
use cone_core::meshnorm::ConeField;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{io_err, CliError, Context, Result};
use crate::output::{render, report, schema, to_value, write_file};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceEntry {
    pub index: usize,
    pub t: f64,
    pub file: String,
    /// Sup norm of every component, by harmonic label.
    pub sup: BTreeMap<String, f64>,
}

/// Result section of a trajectory manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryInfo {
    pub problem: Problem,
    pub scheme: TimeStepper,
    pub dt: f64,
    pub model: ModelSpec,
    pub solver: SolverConfig,
    pub slices: Vec<SliceEntry>,
    pub spectrum_truncated: bool,
    pub all_finite: bool,
    /// `-ln(sup(t_end) / sup(0)) / t_end` per component with nonzero data.
    pub decay_rates: BTreeMap<String, f64>,
    /// Discrete eigenvalue of each eigenvector-initialized component.
    pub eigenvalues: BTreeMap<String, f64>,
}

pub fn slice_file(i: usize) -> String {
    format!("slice_{i:04}.csv")
}

fn sup(f: &ConeField) -> BTreeMap<String, f64> {
    f.components.iter().map(|c| (c.harmonic.label(), c.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))).collect()
}

pub fn info(traj: &Trajectory, model: &ConeModel, spec: &ModelSpec, cfg: &SolverConfig, eigen: BTreeMap<String, f64>) -> TrajectoryInfo {
    let slices: Vec<SliceEntry> =
        traj.slices.iter().enumerate().map(|(i, s)| SliceEntry { index: i, t: s.t, file: slice_file(i), sup: sup(s) }).collect();
    let first = &slices[0];
    let last = &slices[slices.len() - 1];
    let mut decay_rates = BTreeMap::new();
    if last.t > first.t {
        for (k, &a) in &first.sup {
            let b = last.sup[k];
            if a > 0.0 && b > 0.0 {
                decay_rates.insert(k.clone(), -(b / a).ln() / (last.t - first.t));
            }
        }
    }
    TrajectoryInfo {
        problem: traj.problem,
        scheme: traj.scheme,
        dt: traj.dt,
        model: spec.clone(),
        solver: cfg.clone(),
        slices,
        spectrum_truncated: model.spectrum.truncated,
        all_finite: traj.slices.iter().all(ConeField::is_finite),
        decay_rates,
        eigenvalues: eigen,
    }
}

pub fn write(dir: &Path, traj: &Trajectory, info: &TrajectoryInfo, manifest: Value) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (s, e) in traj.slices.iter().zip(&info.slices) {
        write_file(&dir.join(&e.file), &s.to_csv())?;
    }
    write_file(&dir.join(MANIFEST), &render(&report("trajectory", manifest, to_value(info))))
}

/// A trajectory read back from disk.
pub struct Loaded {
    pub dir: PathBuf,
    pub info: TrajectoryInfo,
    pub model: ConeModel,
    pub traj: Trajectory,
}

pub fn read(dir: &Path) -> Result<Loaded> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if v.get("schema").and_then(Value::as_str) != Some(schema("trajectory").as_str()) {
        return Err(CliError::Schema(format!("{} is not a trajectory manifest", path.display())));
    }
    let info: TrajectoryInfo = serde_json::from_value(v["result"].clone())
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    let model = info.model.build().context("trajectory model")?;
    let slices = info
        .slices
        .iter()
        .map(|e| {
            let mut f = read_csv(&dir.join(&e.file), &model)?;
            f.t = e.t;
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory { problem: info.problem, scheme: info.scheme, dt: info.dt, slices };
    Ok(Loaded { dir: dir.to_path_buf(), info, model, traj })
}

fn read_csv(path: &Path, model: &ConeModel) -> Result<ConeField> {
    let bad = |msg: String| CliError::Schema(format!("{}: {msg}", path.display()));
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').collect();
    let mut f = model.zeros();
    let want: Vec<String> = std::iter::once("x".to_string()).chain(f.components.iter().map(|c| c.harmonic.label())).collect();
    if header != want {
        return Err(bad(format!("columns {header:?}, expected {want:?}")));
    }
    let nodes = model.mesh.nodes();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.parse::<f64>().map_err(|e| bad(format!("row {i}: {e}"))))
            .collect::<Result<_>>()?;
        if i >= nodes.len() || vals.len() != want.len() || vals[0] != nodes[i] {
            return Err(bad(format!("row {i} does not match the model mesh")));
        }
        for (c, v) in f.components.iter_mut().zip(&vals[1..]) {
            c.values[i] = *v;
        }
        rows += 1;
    }
    if rows != nodes.len() {
        return Err(bad(format!("{rows} rows for {} mesh nodes", nodes.len())));
    }
    Ok(f)
}

/// Parses `dir@t`.
pub fn split_at_time(spec: &str) -> Result<(PathBuf, f64)> {
    let (d, t) = spec.rsplit_once('@').ok_or_else(|| CliError::Usage(format!("expected DIR@TIME, got '{spec}'")))?;
    let t = t.parse::<f64>().map_err(|e| CliError::Usage(format!("bad time in '{spec}': {e}")))?;
    Ok((PathBuf::from(d), t))
}
