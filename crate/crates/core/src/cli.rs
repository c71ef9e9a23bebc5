//! The `bifurctrack` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (unreadable or inconsistent input), 3 solver failure (every shot
//! overflowed).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Error;
use crate::io::{
    generate_synthetic_event, load_json, load_qubo, load_trackml_event, save_json, save_qubo, write_atomic,
    write_trace_csv, write_trackml_event, BarrelLayout, SynthConfig,
};
use crate::ising::qubo_to_ising;
use crate::metrics::{benchmark_csv, compute_ttt_against, evaluate_event, truth_doublets, BenchmarkRow, TttReport};
use crate::solvers::{
    solve_sa, solve_sb, BetaSchedule, C0Mode, SaConfig, SbConfig, SolveRun, SolverKind,
};
use crate::tracking::{
    assemble_qubo, build_triplets, extract_tracks, generate_doublets, triplets_from_map, TrackingConfig, VariableMap,
};

pub const THREADS_ENV: &str = "BIFURCTRACK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bifurctrack", version, about = "Ising-machine track reconstruction pipeline")]
struct Cli {
    /// Worker threads for parallel shots (default: all cores; falls back to
    /// $BIFURCTRACK_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the triplet QUBO of an event.
    BuildQubo(BuildQuboArgs),
    /// Minimize a QUBO with one solver.
    Solve(SolveArgs),
    /// Score a solver's selection against truth.
    Evaluate(EvaluateArgs),
    /// Time-to-target of several solvers against a shared reference.
    Benchmark(BenchmarkArgs),
    /// Write a synthetic barrel event in TrackML format.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// File of `key = value` lines overriding defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single `key=value` override, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct BuildQuboArgs {
    #[arg(long)]
    hits: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Index map output (default: next to --out with extension .map.json).
    #[arg(long)]
    map: Option<PathBuf>,
    /// Drop hits outside the barrel layers.
    #[arg(long)]
    barrel_only: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct SolverFlags {
    #[arg(long)]
    shots: Option<usize>,
    /// Integration steps (SB) or sweeps (SA).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed SB coupling strength (default: automatic).
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    qubo: PathBuf,
    /// bsb, dsb, asb or sa.
    #[arg(long)]
    solver: String,
    /// Per-step trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver_flags: SolverFlags,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    qubo_map: PathBuf,
    #[arg(long)]
    hits: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    barrel_only: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long)]
    qubo: PathBuf,
    /// Comma-separated solver names.
    #[arg(long, value_delimiter = ',', default_value = "bsb,dsb,asb,sa")]
    solvers: Vec<String>,
    #[arg(long, default_value_t = 0.999)]
    target_frac: f64,
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
    /// Table CSV.
    #[arg(long)]
    out: PathBuf,
    /// Full per-solver TTT reports as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver_flags: SolverFlags,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 25)]
    tracks: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    hits: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Generated helix parameters as JSON.
    #[arg(long)]
    particles: Option<PathBuf>,
}

/// Failure of one command, carrying its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Err(f) = configure_threads(cli.threads) {
        eprintln!("error: {}", f.message());
        return f.code();
    }
    let outcome = match cli.command {
        Command::BuildQubo(a) => build_qubo(a),
        Command::Solve(a) => solve(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Synth(a) => synth(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Outcome {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse()
                    .map_err(|_| Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
            ),
            _ => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Usage("thread count must be positive".into()));
        }
        // Only the first configuration in a process takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// `key = value` lines; `#` starts a comment.
fn parse_config_file(path: &Path) -> std::result::Result<Vec<(String, String)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Failure::Usage(format!("{}: line {}: expected key = value", path.display(), k + 1))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn overrides(args: &ConfigArgs) -> std::result::Result<Vec<(String, String)>, Failure> {
    let mut kv = match &args.config {
        Some(p) => parse_config_file(p)?,
        None => Vec::new(),
    };
    for s in &args.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got '{s}'")))?;
        kv.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(kv)
}

/// Applies `key = value` overrides to the serialized form of `base`.
fn apply_overrides<T: Serialize + DeserializeOwned>(base: &T, kv: &[(String, String)]) -> std::result::Result<T, Failure> {
    let mut value = serde_json::to_value(base).expect("configs serialize");
    let obj = value.as_object_mut().expect("configs are JSON objects");
    let known: Vec<String> = obj.keys().cloned().collect();
    for (k, v) in kv {
        if !obj.contains_key(k) {
            return Err(Failure::Usage(format!("unknown config key '{k}' (known: {})", known.join(", "))));
        }
        let parsed = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone()));
        obj.insert(k.clone(), parsed);
    }
    serde_json::from_value(value).map_err(|e| Failure::Usage(format!("invalid config: {e}")))
}

fn log_config<T: Serialize>(command: &str, cfg: &T) {
    eprintln!("{command}: effective configuration {}", serde_json::to_string(cfg).expect("configs serialize"));
}

fn tracking_config(args: &ConfigArgs) -> std::result::Result<TrackingConfig, Failure> {
    let cfg = apply_overrides(&TrackingConfig::default(), &overrides(args)?)?;
    cfg.validate()?;
    Ok(cfg)
}

fn default_map_path(out: &Path) -> PathBuf {
    out.with_extension("map.json")
}

fn build_qubo(a: BuildQuboArgs) -> Outcome {
    let cfg = tracking_config(&a.config)?;
    log_config("build-qubo", &json!({ "tracking": &cfg, "barrel_only": a.barrel_only }));
    let event = load_trackml_event(&a.hits, a.truth.as_deref(), &BarrelLayout::default(), a.barrel_only)?;
    if event.is_empty() {
        eprintln!("warning: event has no hits; writing an empty QUBO");
    }
    let doublets = generate_doublets(&event.hits, &cfg)?;
    let triplets = build_triplets(&doublets, &event.hits, &cfg)?;
    let q = assemble_qubo(&triplets, &cfg)?;
    if q.problem.is_empty() && !event.is_empty() {
        eprintln!("warning: no triplet survived pruning; writing an empty QUBO");
    }
    let meta = json!({
        "event_id": event.event_id,
        "hits": event.hits.len(),
        "particles": event.meta.particles,
        "doublets": doublets.len(),
        "triplet_candidates": q.candidates,
    });
    let map_path = a.map.unwrap_or_else(|| default_map_path(&a.out));
    save_qubo(&a.out, &q.problem, meta)?;
    save_json(&map_path, &q.variable_map())?;
    println!("variables: {}", q.problem.n());
    println!("pairs: {}", q.problem.pairs().len());
    Ok(())
}

/// Solver settings shared by `solve` and `benchmark`, overridable by config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverParams {
    shots: usize,
    /// SB steps or SA sweeps.
    steps: usize,
    seed: u64,
    c0: Option<f64>,
    dt: Option<f64>,
    a0: f64,
    trace_stride: usize,
    beta_min: Option<f64>,
    beta_max: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            shots: 50,
            steps: 1000,
            seed: 0,
            c0: None,
            dt: None,
            a0: 1.0,
            trace_stride: 10,
            beta_min: None,
            beta_max: None,
        }
    }
}

fn solver_params(f: &SolverFlags) -> std::result::Result<SolverParams, Failure> {
    let mut p = apply_overrides(&SolverParams::default(), &overrides(&f.config)?)?;
    if let Some(v) = f.shots {
        p.shots = v;
    }
    if let Some(v) = f.steps {
        p.steps = v;
    }
    if let Some(v) = f.seed {
        p.seed = v;
    }
    if f.c0.is_some() {
        p.c0 = f.c0;
    }
    if f.dt.is_some() {
        p.dt = f.dt;
    }
    Ok(p)
}

fn run_solver(kind: SolverKind, p: &SolverParams, qubo: &crate::QuboProblem) -> std::result::Result<SolveRun, Failure> {
    if qubo.is_empty() {
        return Err(Failure::Data("QUBO has no variables".into()));
    }
    let ising = qubo_to_ising(qubo);
    let run = match kind.sb_variant() {
        Some(variant) => {
            let mut cfg = SbConfig::new(variant);
            cfg.steps = p.steps;
            cfg.shots = p.shots;
            cfg.seed = p.seed;
            cfg.a0 = p.a0;
            cfg.trace_stride = p.trace_stride;
            if let Some(dt) = p.dt {
                cfg.dt = dt;
            }
            if let Some(c0) = p.c0 {
                cfg.c0 = C0Mode::Fixed(Some(c0));
            }
            log_config(&format!("solve[{kind}]"), &cfg);
            solve_sb(&ising, &cfg)?
        }
        None => {
            let schedule = match (p.beta_min, p.beta_max) {
                (None, None) => BetaSchedule::Auto,
                (Some(beta_min), Some(beta_max)) => BetaSchedule::Geometric { beta_min, beta_max },
                _ => return Err(Failure::Usage("beta_min and beta_max must be given together".into())),
            };
            let cfg = SaConfig {
                sweeps: p.steps,
                schedule,
                shots: p.shots,
                seed: p.seed,
                trace_stride: p.trace_stride,
            };
            log_config(&format!("solve[{kind}]"), &cfg);
            solve_sa(&ising, &cfg)?
        }
    };
    if run.best_shot.is_none() {
        return Err(Failure::Solver(format!("{kind}: every shot overflowed; try a smaller dt or c0")));
    }
    Ok(run)
}

fn parse_solver(name: &str) -> std::result::Result<SolverKind, Failure> {
    name.trim().parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

fn solve(a: SolveArgs) -> Outcome {
    let kind = parse_solver(&a.solver)?;
    let params = solver_params(&a.solver_flags)?;
    let (qubo, _) = load_qubo(&a.qubo)?;
    let run = run_solver(kind, &params, &qubo)?;
    save_json(&a.out, &run)?;
    if let Some(trace) = &a.trace {
        write_trace_csv(trace, &run)?;
    }
    let best = run.best_energy().expect("checked by run_solver");
    // QUBO and Ising energies coincide by construction of the conversion.
    println!("best energy: {best}");
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Outcome {
    let cfg = tracking_config(&a.config)?;
    log_config("evaluate", &json!({ "tracking": &cfg, "barrel_only": a.barrel_only }));
    let run: SolveRun = load_json(&a.result)?;
    let map: VariableMap = load_json(&a.qubo_map)?;
    let event = load_trackml_event(&a.hits, Some(&a.truth), &BarrelLayout::default(), a.barrel_only)?;
    let best = run
        .best()
        .ok_or_else(|| Failure::Data(format!("{}: no completed shot to evaluate", a.result.display())))?;
    let bits = best.bits();
    if bits.len() != map.variables.len() {
        return Err(Failure::Data(format!(
            "result has {} variables but the index map has {}",
            bits.len(),
            map.variables.len()
        )));
    }
    let triplets = triplets_from_map(&map.variables, &event.hits, &cfg)?;
    let candidates = extract_tracks(&bits, &triplets, &cfg)?;
    let truth = truth_doublets(&event.hits, cfg.min_track_hits);
    let report = evaluate_event(&event.event_id, &candidates, &truth);
    if let Some(out) = &a.out {
        save_json(out, &json!({ "report": &report, "candidates": &candidates }))?;
    }
    let show = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"));
    println!("tracks: {}", candidates.len());
    println!("efficiency: {}", show(report.efficiency));
    println!("purity: {}", show(report.purity));
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Outcome {
    let kinds = a
        .solvers
        .iter()
        .map(|s| parse_solver(s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if kinds.is_empty() {
        return Err(Failure::Usage("no solvers given".into()));
    }
    if !(a.confidence > 0.0 && a.confidence < 1.0) {
        return Err(Failure::Usage(format!("confidence must lie in (0, 1), got {}", a.confidence)));
    }
    let params = solver_params(&a.solver_flags)?;
    let (qubo, meta) = load_qubo(&a.qubo)?;
    log_config(
        "benchmark",
        &json!({ "solvers": &a.solvers, "target_frac": a.target_frac, "confidence": a.confidence, "params": &params }),
    );
    let runs = kinds
        .iter()
        .map(|&k| run_solver(k, &params, &qubo).map(|r| (k, r)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    // One reference for every solver: the lowest energy any of them reached.
    let reference = runs
        .iter()
        .filter_map(|(_, r)| r.best_energy())
        .min_by(f64::total_cmp)
        .expect("every run has a best shot");
    let particles = meta.get("particles").and_then(|v| v.as_u64()).map(|p| p as usize);
    let mut rows = Vec::new();
    let mut reports: BTreeMap<String, TttReport> = BTreeMap::new();
    for (kind, run) in &runs {
        let ttt = compute_ttt_against(run, reference, a.target_frac, a.confidence)?;
        rows.push(BenchmarkRow {
            particles,
            qubo_size: qubo.n(),
            solver: kind.to_string(),
            ttt_seconds: ttt.ttt_seconds,
            best_energy: run.best_energy(),
            target_energy: ttt.target_energy,
        });
        reports.insert(kind.to_string(), ttt);
    }
    let csv = benchmark_csv(&rows);
    write_atomic(&a.out, csv.as_bytes())?;
    if let Some(report) = &a.report {
        save_json(report, &json!({ "reference_energy": reference, "rows": &rows, "ttt": &reports }))?;
    }
    print!("{csv}");
    Ok(())
}

fn synth(a: SynthArgs) -> Outcome {
    let cfg = SynthConfig {
        n_tracks: a.tracks,
        noise_fraction: a.noise,
        seed: a.seed,
        ..SynthConfig::default()
    };
    log_config("synth", &cfg);
    let ev = generate_synthetic_event(&cfg)?;
    write_trackml_event(&ev.event, &BarrelLayout::default(), &a.hits, &a.truth)?;
    if let Some(p) = &a.particles {
        save_json(p, &ev.particles)?;
    }
    println!("hits: {}", ev.event.hits.len());
    println!("particles: {}", ev.particles.len());
    Ok(())
}
