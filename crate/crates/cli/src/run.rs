//! Subcommand execution.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cone_core::conesolve::{
    mode_eigenpairs, solve_heat, solve_pme, solve_sh, ConeModel, ModelSpec, SolverConfig, Trajectory,
};
use cone_core::freezeflow::{
    decompose, epsilon_window, frozen_operator, remainder_bound, sectorial_probe, uniform_bound_scan, DecomposeOptions,
    ProbeOperator,
};
use cone_core::indicial::{
    conormal_roots, delta_window, predicted_x_exponents, q_set_report, validate_parameters, weight_window,
};
use cone_core::meshnorm::{fit_exponent, Harmonic};
use cone_core::spectrum::lambda1;
use serde_json::{json, Value};

use crate::cli::{Cli, Command, FloatList, DecomposeArgs, ModelArg, ProbeArgs, SolveArgs};
use crate::compare::{compare, Tolerances};
use crate::config::{
    default_fit_window, default_samples, default_theta, read_json, DecomposeTask, ExperimentConfig, FitTask,
    InitialData, ProbeTask, ProblemArg, RootsTask, WindowsTask,
};
use crate::error::{CliError, Context, Result};
use crate::output::{emit, manifest, render, report, require, sha256_hex, target, to_value, write_file};
use crate::traj::{self, Loaded};

/// Runs the parsed command line and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("conetool: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    /// Directory that relative paths in the config resolve against.
    base: PathBuf,
    out: Option<PathBuf>,
    seed: u64,
    verbose: bool,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[conetool] {}", msg.as_ref());
        }
    }

    fn model_spec(&self, arg: &ModelArg) -> Result<ModelSpec> {
        match (&arg.model, &self.cfg.model) {
            (Some(p), _) => read_json(p),
            (None, Some(m)) => m.load(&self.base),
            (None, None) => Err(CliError::Usage("no model given (--model or config 'model')".into())),
        }
    }

    fn manifest(&self, config: &Value, model: Option<&ModelSpec>) -> Value {
        manifest(config, model, self.seed)
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (cfg, base) = match &cli.config {
        Some(p) => (ExperimentConfig::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (ExperimentConfig::default(), PathBuf::new()),
    };
    let ctx = Ctx { seed: cli.seed.unwrap_or(cfg.seed), out: cli.out.clone(), base, cfg, verbose: cli.verbose };

    match &cli.command {
        Command::Spectrum { model } => {
            let spec = ctx.model_spec(model)?;
            let v = spectrum_report(&ctx, &spec)?;
            emit(target(ctx.out.as_deref(), "spectrum.json").as_deref(), &render(&v))
        }
        Command::Roots { model, gamma, k } => {
            let spec = ctx.model_spec(model)?;
            let task = match (gamma, k, &ctx.cfg.tasks.roots) {
                (Some(g), Some(k), _) => RootsTask { gamma: *g, k: *k },
                (None, None, Some(t)) => t.clone(),
                _ => return Err(CliError::Usage("roots needs --gamma and --k (or a config roots task)".into())),
            };
            let v = roots_report(&ctx, &spec, &task)?;
            emit(target(ctx.out.as_deref(), "q_set.json").as_deref(), &render(&v))
        }
        Command::Windows { model, problem, p, q, gamma, s0 } => {
            let spec = ctx.model_spec(model)?;
            let base = ctx.cfg.tasks.windows.clone();
            let task = WindowsTask {
                problem: require(problem.or(base.as_ref().map(|t| t.problem)), "--problem")?,
                p: require(p.or(base.as_ref().map(|t| t.p)), "--p")?,
                q: require(q.or(base.as_ref().map(|t| t.q)), "--q")?,
                gamma: gamma.or(base.as_ref().and_then(|t| t.gamma)),
                s0: s0.or(base.as_ref().and_then(|t| t.s0)),
            };
            let v = windows_report(&ctx, &spec, &task)?;
            emit(target(ctx.out.as_deref(), "windows.json").as_deref(), &render(&v))
        }
        Command::Solve(args) => solve_command(&ctx, args),
        Command::Fit { traj, time, harmonics, window, subtract_constant } => {
            let loaded = traj::read(traj)?;
            let base = ctx.cfg.tasks.fit.clone();
            let task = FitTask {
                time: time.or(base.as_ref().and_then(|t| t.time)),
                harmonics: if harmonics.is_empty() { base.as_ref().map(|t| t.harmonics.clone()).unwrap_or_default() } else { harmonics.clone() },
                window: window.or(base.as_ref().map(|t| t.window)).unwrap_or_else(default_fit_window),
                subtract_constant: *subtract_constant || base.as_ref().is_some_and(|t| t.subtract_constant),
            };
            let v = fit_report(&ctx, &loaded, &task)?;
            emit(target(ctx.out.as_deref(), "fit.json").as_deref(), &render(&v))
        }
        Command::Decompose(args) => decompose_command(&ctx, args),
        Command::Probe(args) => probe_command(&ctx, args),
        Command::Compare { report, golden, abs_tol, rel_tol, field_tol, include_manifest } => {
            let read = |p: &Path| -> Result<Value> { read_json(p) };
            let tol = Tolerances {
                abs: *abs_tol,
                rel: *rel_tol,
                fields: field_tol.iter().cloned().collect(),
                include_manifest: *include_manifest,
            };
            let summary = compare(&read(report)?, &read(golden)?, &tol)?;
            emit(ctx.out.as_deref(), &render(&to_value(&summary)))?;
            if summary.failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Mismatch { failed: summary.failures.len(), compared: summary.compared })
            }
        }
        Command::Report => report_command(&ctx, cli.config.is_some()),
    }
}

fn spectrum_report(ctx: &Ctx, spec: &ModelSpec) -> Result<Value> {
    let s = spec.cross_section.spectrum(spec.l_max).context("spectrum")?;
    let n = s.n;
    let result = json!({
        "n": n,
        "l_max": s.l_max,
        "truncated": s.truncated,
        "entries": s.entries,
        "lambda1": lambda1(&s).ok(),
        "conormal_roots": conormal_roots(&s, n),
    });
    let config = json!({"command": "spectrum", "model": spec});
    Ok(report("spectrum", ctx.manifest(&config, Some(spec)), result))
}

fn roots_report(ctx: &Ctx, spec: &ModelSpec, task: &RootsTask) -> Result<Value> {
    ctx.log(format!("roots: gamma={} k={}", task.gamma, task.k));
    let s = spec.cross_section.spectrum(spec.l_max).context("spectrum")?;
    let q = q_set_report(&s, s.n, task.gamma, task.k).context("q_set")?;
    let exps = predicted_x_exponents(&s, s.n, task.gamma, task.k).context("predicted exponents")?;
    let result = json!({
        "q_set": q,
        "predicted_x_exponents": exps.iter().map(|(e, eta)| json!({"exponent": e, "log_power": eta})).collect::<Vec<_>>(),
    });
    let config = json!({"command": "roots", "model": spec, "task": task});
    Ok(report("q_set", ctx.manifest(&config, Some(spec)), result))
}

fn windows_report(ctx: &Ctx, spec: &ModelSpec, task: &WindowsTask) -> Result<Value> {
    let s = spec.cross_section.spectrum(spec.l_max).context("spectrum")?;
    let l1 = lambda1(&s).context("lambda1")?;
    let problem = task.problem.core();
    let result = json!({
        "lambda1": l1,
        "weight_window": weight_window(problem, s.n, l1, task.q).context("weight window")?,
        "parameters": validate_parameters(problem, s.n, l1, task.p, task.q, task.gamma, task.s0).context("parameters")?,
        "delta_window": task.gamma.map(|g| delta_window(s.n, task.p, task.q, g)).transpose().context("delta window")?,
    });
    let config = json!({"command": "windows", "model": spec, "task": task});
    Ok(report("windows", ctx.manifest(&config, Some(spec)), result))
}

/// Solves and writes the trajectory directory; returns the trajectory manifest.
fn solve_into(
    ctx: &Ctx,
    dir: &Path,
    problem: ProblemArg,
    spec: &ModelSpec,
    solver: &SolverConfig,
    initial: &InitialData,
) -> Result<(Value, Trajectory, ConeModel)> {
    let model = spec.build().context("model")?;
    let u0 = initial.build(&model, ctx.seed)?;
    ctx.log(format!("solve {problem:?}: {} nodes, {} components", model.mesh.len(), u0.components.len()));
    let traj = match problem {
        ProblemArg::Heat => solve_heat(&model, &u0, solver),
        ProblemArg::Pme => solve_pme(&model, &u0, solver),
        ProblemArg::Sh => solve_sh(&model, &u0, solver),
    }
    .context("solve")?;
    let mut eigen = BTreeMap::new();
    for (h, index) in initial.eigen_components() {
        let mode = u0.component(h).map(|c| c.mode).unwrap_or(0);
        let pairs = mode_eigenpairs(&model, mode, index + 1).context("eigenvalue")?;
        eigen.insert(h.label(), pairs[index].mu);
    }
    let info = traj::info(&traj, &model, spec, solver, eigen);
    let config = json!({"command": "solve", "problem": problem, "model": spec, "solver": solver, "initial": initial});
    let m = ctx.manifest(&config, Some(spec));
    traj::write(dir, &traj, &info, m.clone())?;
    Ok((report("trajectory", m, to_value(&info)), traj, model))
}

fn solve_command(ctx: &Ctx, args: &SolveArgs) -> Result<()> {
    let spec = ctx.model_spec(&args.model)?;
    let mut solver = ctx.cfg.solver.clone();
    if let Some(times) = &args.times {
        solver.times = times.0.iter().copied().filter(|&t| t != 0.0).collect();
    }
    if let Some(dt) = args.dt {
        solver.dt = dt;
    }
    if let Some(t) = args.t_end {
        solver.t_end = t;
    }
    if args.stepper.is_some() {
        solver.time_stepper = args.stepper;
    }
    if let Some(m) = args.m {
        solver.m = m;
    }
    solver.validate().context("solver config")?;
    let initial = match (&args.initial, &ctx.cfg.initial) {
        (Some(p), _) => read_json(p)?,
        (None, Some(i)) => i.clone(),
        (None, None) => return Err(CliError::Usage("no initial data (--initial or config 'initial')".into())),
    };
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("traj"));
    solve_into(ctx, &dir, args.problem, &spec, &solver, &initial).map(|_| ())
}

/// `-(n-1)/2 + sqrt(((n-1)/2)^2 - lambda)`.
fn leading_exponent(n: usize, lambda: f64) -> f64 {
    let h = (n as f64 - 1.0) / 2.0;
    -h + (h * h - lambda).sqrt()
}

fn fit_report(ctx: &Ctx, loaded: &Loaded, task: &FitTask) -> Result<Value> {
    let traj = &loaded.traj;
    let slice = match task.time {
        Some(t) => &traj.slices[traj.index_of(t).context("fit")?],
        None => traj.last(),
    };
    let explicit = !task.harmonics.is_empty();
    let hs: Vec<Harmonic> =
        if explicit { task.harmonics.clone() } else { slice.components.iter().map(|c| c.harmonic).collect() };
    let n = loaded.model.n();
    let mut rows = Vec::new();
    for h in hs {
        let c = slice
            .component(h)
            .ok_or_else(|| CliError::Config(format!("trajectory has no component {}", h.label())))?;
        // Removing the tip value of a constant harmonic exposes the next term, two orders up.
        let stripped = task.subtract_constant && h.is_constant();
        let expected = leading_exponent(n, c.lambda) + if stripped { 2.0 } else { 0.0 };
        match fit_exponent(slice, h, (task.window[0], task.window[1]), task.subtract_constant) {
            Ok(f) => rows.push(json!({
                "harmonic": h.label(),
                "lambda": c.lambda,
                "indicial_exponent": expected,
                "deviation": f.alpha - expected,
                "fit": f,
            })),
            Err(e) if !explicit => rows.push(json!({"harmonic": h.label(), "error": e.to_string()})),
            Err(e) => return Err(e).context(&format!("fit {}", h.label())),
        }
    }
    let result = json!({"t": slice.t, "fits": rows});
    let config = json!({"command": "fit", "task": task, "trajectory": traj_id(loaded)});
    Ok(report("fit", ctx.manifest(&config, Some(&loaded.info.model)), result))
}

/// Content identity of a trajectory directory, independent of its path.
fn traj_id(loaded: &Loaded) -> Value {
    json!({"problem": loaded.info.problem, "times": loaded.traj.times(), "solver": loaded.info.solver,
           "sha256": sha256_hex(render(&to_value(&loaded.info)).as_bytes())})
}

fn decompose_report(ctx: &Ctx, loaded: &Loaded, task: &DecomposeTask) -> Result<Value> {
    let cfg = &loaded.info.solver;
    let (traj, model) = (&loaded.traj, &loaded.model);
    ctx.log(format!("decompose on [{}, {}]", task.tau, task.nu));
    let d = decompose(traj, model, cfg, task.tau, task.nu, &task.options).context("decompose")?;
    let scan = if task.nus.is_empty() {
        None
    } else {
        Some(remainder_bound(traj, model, cfg, task.tau, &task.nus, &task.options).context("remainder bound")?)
    };
    let search = task
        .window_search
        .map(|(t, eps)| epsilon_window(traj, model, cfg, t, eps, &task.options))
        .transpose()
        .context("window search")?;
    let result = json!({"decomposition": d, "bound_scan": scan, "window_search": search});
    let config = json!({"command": "decompose", "task": task, "trajectory": traj_id(loaded)});
    Ok(report("decompose", ctx.manifest(&config, Some(&loaded.info.model)), result))
}

fn decompose_command(ctx: &Ctx, a: &DecomposeArgs) -> Result<()> {
    let loaded = traj::read(&a.traj)?;
    let base = ctx.cfg.tasks.decompose.clone();
    let o = base.as_ref().map(|t| t.options).unwrap_or_default();
    let task = DecomposeTask {
        tau: require(a.tau.or(base.as_ref().map(|t| t.tau)), "--tau")?,
        nu: require(a.nu.or(base.as_ref().map(|t| t.nu)), "--nu")?,
        options: DecomposeOptions {
            p: a.p.unwrap_or(o.p),
            q: a.q.unwrap_or(o.q),
            gamma: a.gamma.unwrap_or(o.gamma),
            k_max: a.k_max.unwrap_or(o.k_max),
            fit_window: a.fit_window.unwrap_or(o.fit_window),
        },
        nus: a.nus.clone().map(|l| l.0).or(base.as_ref().map(|t| t.nus.clone())).unwrap_or_default(),
        window_search: a.search_at.map(|t| (t, a.eps)).or(base.and_then(|t| t.window_search)),
    };
    let v = decompose_report(ctx, &loaded, &task)?;
    emit(target(ctx.out.as_deref(), "decompose.json").as_deref(), &render(&v))
}

fn probe_frozen(ctx: &Ctx, loaded: &Loaded, task: &ProbeTask) -> Result<Value> {
    let (traj, model, cfg) = (&loaded.traj, &loaded.model, &loaded.info.solver);
    let t = task.time.unwrap_or(traj.slices[0].t);
    ctx.log(format!("probe at t={t}, theta={}, shift={}", task.theta, task.shift));
    let fr = frozen_operator(traj, t, model, cfg).context("frozen operator")?;
    let op = ProbeOperator::from_frozen(&fr, task.gamma);
    let probe = sectorial_probe(&op, task.theta, task.shift, task.samples).context("probe")?;
    let scan = if task.scan {
        Some(uniform_bound_scan(traj, model, cfg, &traj.times(), task.theta, task.gamma, task.samples).context("scan")?)
    } else {
        None
    };
    let result = json!({"t": t, "probe": probe, "scan": scan});
    let config = json!({"command": "probe", "task": task, "trajectory": traj_id(loaded)});
    Ok(report("probe", ctx.manifest(&config, Some(&loaded.info.model)), result))
}

fn probe_command(ctx: &Ctx, a: &ProbeArgs) -> Result<()> {
    let base = ctx.cfg.tasks.probe.clone().unwrap_or(ProbeTask {
        time: None,
        theta: default_theta(),
        shift: 0.0,
        gamma: 0.0,
        samples: default_samples(),
        scan: false,
    });
    let mut task = ProbeTask {
        time: base.time,
        theta: a.theta.unwrap_or(base.theta),
        shift: a.shift.unwrap_or(base.shift),
        gamma: a.gamma.unwrap_or(base.gamma),
        samples: a.samples.unwrap_or(base.samples),
        scan: a.scan || base.scan,
    };
    let v = match (&a.diagonal, &a.matrix_from) {
        (Some(FloatList(d)), None) => {
            let probe = sectorial_probe(&ProbeOperator::from_diagonal(d), task.theta, task.shift, task.samples).context("probe")?;
            let config = json!({"command": "probe", "diagonal": d, "task": task});
            report("probe", ctx.manifest(&config, None), json!({"probe": probe}))
        }
        (None, Some(spec)) => {
            let (dir, t) = traj::split_at_time(spec)?;
            task.time = Some(t);
            probe_frozen(ctx, &traj::read(&dir)?, &task)?
        }
        _ => return Err(CliError::Usage("probe needs exactly one of --matrix-from DIR@T or --diagonal".into())),
    };
    emit(target(ctx.out.as_deref(), "probe.json").as_deref(), &render(&v))
}

/// Runs the config's task DAG into one directory with a readable summary.
fn report_command(ctx: &Ctx, have_config: bool) -> Result<()> {
    if !have_config {
        return Err(CliError::Usage("report needs --config".into()));
    }
    let out = ctx.out.clone().or(ctx.cfg.out.clone()).unwrap_or_else(|| PathBuf::from("report"));
    let model_ref = ctx.cfg.model.as_ref().ok_or_else(|| CliError::Config("config has no model".into()))?;
    let spec = model_ref.load(&ctx.base)?;
    let tasks = &ctx.cfg.tasks;
    let mut files: BTreeMap<String, Value> = BTreeMap::new();
    let mut summary = String::from("conetool verification report\n");
    let _ = writeln!(summary, "model: {}", serde_json::to_string(&spec).unwrap_or_default());
    for d in crate::output::deviations(Some(&spec)) {
        let _ = writeln!(summary, "deviation: {d}");
    }

    let spectrum = spectrum_report(ctx, &spec)?;
    let r = &spectrum["result"];
    let _ = writeln!(summary, "\n[spectrum] n = {}, {} distinct eigenvalues, lambda1 = {}", r["n"], r["entries"].as_array().map_or(0, Vec::len), r["lambda1"]);
    files.insert("spectrum.json".into(), spectrum);

    if let Some(t) = &tasks.roots {
        let v = roots_report(ctx, &spec, t)?;
        let q = &v["result"]["q_set"];
        let _ = writeln!(summary, "\n[roots] gamma = {}, k = {}: {} roots in the strip, complete = {}", t.gamma, t.k, q["roots"].as_array().map_or(0, Vec::len), q["complete"]);
        for root in q["roots"].as_array().into_iter().flatten() {
            let _ = writeln!(summary, "  rho = {} (log power {})", root["rho"][0], root["eta"]);
        }
        files.insert("q_set.json".into(), v);
    }
    if let Some(t) = &tasks.windows {
        let v = windows_report(ctx, &spec, t)?;
        let w = &v["result"]["weight_window"];
        let _ = writeln!(summary, "\n[windows] gamma in ({}, {}); parameters admissible = {}", w["lo"], w["hi"], v["result"]["parameters"]["admissible"]);
        files.insert("windows.json".into(), v);
    }

    let needs_traj = tasks.fit.is_some() || tasks.decompose.is_some() || tasks.probe.is_some();
    match (ctx.cfg.problem, &ctx.cfg.initial) {
        (Some(problem), Some(initial)) => {
            let dir = out.join("traj");
            let (v, _, _) = solve_into(ctx, &dir, problem, &spec, &ctx.cfg.solver, initial)?;
            let r = &v["result"];
            let _ = writeln!(summary, "\n[solve] {:?} with {}, dt = {}, {} slices, all finite = {}", problem, r["scheme"], r["dt"], r["slices"].as_array().map_or(0, Vec::len), r["all_finite"]);
            for (k, rate) in r["decay_rates"].as_object().into_iter().flatten() {
                let _ = writeln!(summary, "  decay rate {k}: {rate} (discrete eigenvalue {})", r["eigenvalues"].get(k).unwrap_or(&Value::Null));
            }
            let loaded = traj::read(&dir)?;
            if let Some(t) = &tasks.fit {
                let v = fit_report(ctx, &loaded, t)?;
                let _ = writeln!(summary, "\n[fit] t = {}, window {:?}", v["result"]["t"], t.window);
                for row in v["result"]["fits"].as_array().into_iter().flatten() {
                    match row.get("error") {
                        Some(e) => {
                            let _ = writeln!(summary, "  {}: {}", row["harmonic"], e);
                        }
                        None => {
                            let _ = writeln!(summary, "  {}: alpha = {}, expected {}, deviation {}", row["harmonic"], row["fit"]["alpha"], row["indicial_exponent"], row["deviation"]);
                        }
                    }
                }
                files.insert("fit.json".into(), v);
            }
            if let Some(t) = &tasks.decompose {
                let v = decompose_report(ctx, &loaded, t)?;
                let d = &v["result"]["decomposition"];
                let _ = writeln!(summary, "\n[decompose] [{}, {}]: |G| = {}, |w| = {}, C = {}, endpoint residual = {}, route gap = {}", d["tau"], d["nu"], d["g_norm"], d["w_norm"], d["fitted_c"], d["endpoint_residual"], d["route_gap"]);
                if let Some(s) = v["result"]["bound_scan"].as_object() {
                    let _ = writeln!(summary, "  bound scan: C in [{}, {}]", s["min"], s["max"]);
                }
                if let Some(s) = v["result"]["window_search"].as_object() {
                    let _ = writeln!(summary, "  eps-window: ({}, {}) with norm {} after {} halvings", s["t1"], s["t2"], s["norm"], s["halvings"]);
                }
                files.insert("decompose.json".into(), v);
            }
            if let Some(t) = &tasks.probe {
                let v = probe_frozen(ctx, &loaded, t)?;
                let p = &v["result"]["probe"];
                let _ = writeln!(summary, "\n[probe] t = {}, theta = {}, shift = {}: K_est = {}", v["result"]["t"], p["theta"], p["shift"], p["k_est"]);
                files.insert("probe.json".into(), v);
            }
        }
        _ if needs_traj => return Err(CliError::Config("fit/decompose/probe tasks need 'problem' and 'initial'".into())),
        _ => {}
    }

    let mut digests = BTreeMap::new();
    for (name, v) in &files {
        let text = render(v);
        digests.insert(name.clone(), sha256_hex(text.as_bytes()));
        write_file(&out.join(name), &text)?;
    }
    let config = to_value(&ctx.cfg);
    let index = report("report", ctx.manifest(&config, Some(&spec)), json!({"files": digests}));
    write_file(&out.join("report.json"), &render(&index))?;
    summary.push_str("\nlimitations: R-sectoriality is not probed; remainder norms are discrete surrogates\n");
    write_file(&out.join("summary.txt"), &summary)?;
    ctx.log(format!("wrote {}", out.display()));
    Ok(())
}
