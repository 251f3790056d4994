//! `gfl`: command-line runner for the gfl-core experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use gfl_core::calculus::DerivationSpec;
use gfl_core::continuity::{apriori_check, solve_viscous_ce, write_fields, write_trace_csv, CeConfig};
use gfl_core::flow::{integrate_flow, FlowConfig, Initial};
use gfl_core::scenarios::{
    builtin, emit_report, is_ou, load_config, load_results, run_scenario, write_atomic, Artifact, Experiment, ExperimentResult, Metric,
    ReportFormat, RunManifest, ScenarioConfig, ScenarioResult,
};
use gfl_core::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_FATAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "gfl", version, about = "Γ-calculus, continuity equation and flow experiments on weighted grids")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario config (JSON or TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in scenario: euclidean-torus, weighted-interval, ou, log-concave-1d.
    #[arg(long, global = true, conflicts_with = "config")]
    scenario: Option<String>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "GFL_OUT_DIR", default_value = "gfl-out")]
    out: PathBuf,
    /// Report format; report.json is always written as well.
    #[arg(long, global = true, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the viscous continuity equation and check mass and a-priori bounds.
    SolveCe {
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        /// Implicit Euler with the positivity guard.
        #[arg(long)]
        monotone: bool,
    },
    /// Commutator decay study along the default α ladder.
    CommutatorDecay {
        /// Field: zero, cosine, sine, rough-sine, rotation, or an inline JSON field spec.
        #[arg(long)]
        b: Option<String>,
    },
    /// BE₂, BE₁ and reverse-Poincaré defects (plus Mehler on the OU space).
    CurvatureCheck,
    /// Integrate the Lagrangian flow and write particle paths.
    Flow {
        #[arg(long, default_value_t = 1000)]
        particles: usize,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Number of stored time samples after t = 0.
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Compare flow marginals against the continuity solution.
    SuperpositionCheck {
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Run every experiment of one or more scenarios.
    Scenario {
        /// Extra config files, run alongside --config/--scenario.
        configs: Vec<PathBuf>,
    },
    /// Re-emit a saved report.json in another format.
    Report {
        /// report.json, or a directory containing one.
        #[arg(long)]
        input: PathBuf,
    },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Fatal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical { .. } | Error::Io(_) => Failure::Fatal(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn io_fatal(e: impl std::fmt::Display) -> Failure {
    Failure::Fatal(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.common.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FATAL);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Fatal(m)) => {
            eprintln!("fatal: {m}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::SolveCe { .. } => "solve-ce",
        Command::CommutatorDecay { .. } => "commutator-decay",
        Command::CurvatureCheck => "curvature-check",
        Command::Flow { .. } => "flow",
        Command::SuperpositionCheck { .. } => "superposition-check",
        Command::Scenario { .. } => "scenario",
        Command::Report { .. } => "report",
    }
}

fn read_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    load_config(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// The config named on the command line, or `fallback` when none was given.
fn base_config(common: &Common, fallback: Option<&str>) -> Result<Option<ScenarioConfig>, Failure> {
    let cfg = match (&common.config, &common.scenario, fallback) {
        (Some(p), _, _) => read_config(p)?,
        (None, Some(name), _) => builtin(name)?,
        (None, None, Some(name)) => builtin(name)?,
        (None, None, None) => return Ok(None),
    };
    Ok(Some(with_seed(cfg, common.seed)))
}

fn with_seed(mut cfg: ScenarioConfig, seed: Option<u64>) -> ScenarioConfig {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}

fn parse_field(text: &str, dimension: usize) -> Result<DerivationSpec, Failure> {
    Ok(match text {
        "zero" => DerivationSpec::Constant { velocity: vec![0.0; dimension] },
        "cosine" => DerivationSpec::Cosine { amplitude: 1.0, frequency: 1.0, offset: 0.0 },
        "sine" => DerivationSpec::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.0 },
        "rough-sine" => DerivationSpec::RoughSine { exponent: 0.6, amplitude: 1.0 },
        "rotation" => DerivationSpec::Rotation { amplitude: 1.0 },
        json if json.trim_start().starts_with('{') => {
            serde_json::from_str(json).map_err(|e| Failure::Usage(format!("--b: {e}")))?
        }
        other => return Err(Failure::Usage(format!("--b: unknown field `{other}` (zero, cosine, sine, rough-sine, rotation or JSON)"))),
    })
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let common = &cli.common;
    let name = command_name(&cli.command);
    match &cli.command {
        Command::Report { input } => {
            let path = if input.is_dir() { input.join("report.json") } else { input.clone() };
            let results = load_results(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let mut manifest = RunManifest::new(name);
            manifest.seeds = results.iter().map(|r| r.seed).collect();
            emit_bundle(&results, common, &common.out, manifest)
        }
        Command::Scenario { configs } => {
            let mut list = Vec::new();
            if let Some(c) = base_config(common, None)? {
                list.push(c);
            }
            for p in configs {
                list.push(with_seed(read_config(p)?, common.seed));
            }
            if list.is_empty() {
                return Err(Failure::Usage("scenario needs --config, --scenario or a config path".into()));
            }
            let single = list.len() == 1;
            let outcomes: Vec<Result<bool, Failure>> = list
                .par_iter()
                .map(|cfg| {
                    let dir = if single { common.out.clone() } else { common.out.join(&cfg.name) };
                    run_configured(name, cfg, common, &dir)
                })
                .collect();
            let mut all = true;
            for o in outcomes {
                all &= o?;
            }
            Ok(all)
        }
        Command::SolveCe { sigma, theta, monotone } => {
            let cfg = base_config(common, Some("euclidean-torus"))?.expect("fallback given");
            solve_ce(name, &cfg, common, *sigma, *theta, *monotone)
        }
        Command::CommutatorDecay { b } => {
            let mut cfg = base_config(common, Some("euclidean-torus"))?.expect("fallback given");
            if let Some(text) = b {
                cfg.field = parse_field(text, cfg.space.dimension)?;
            }
            let exp = cfg.experiments.iter().find(|e| matches!(e, Experiment::CommutatorDecay { .. })).cloned();
            cfg.experiments = vec![exp.map_or_else(|| Experiment::from_name("commutator_decay"), Ok)?];
            run_configured(name, &cfg, common, &common.out)
        }
        Command::CurvatureCheck => {
            let mut cfg = base_config(common, Some("ou"))?.expect("fallback given");
            let mut exps = vec![Experiment::from_name("be2")?, Experiment::from_name("be1")?, Experiment::from_name("reverse_poincare")?];
            if is_ou(&cfg.space) {
                exps.push(Experiment::from_name("mehler")?);
            }
            // Keep tolerances and times from the config where it lists the same kind.
            for e in exps.iter_mut() {
                if let Some(c) = cfg.experiments.iter().find(|c| c.name() == e.name()) {
                    *e = c.clone();
                }
            }
            cfg.experiments = exps;
            run_configured(name, &cfg, common, &common.out)
        }
        Command::SuperpositionCheck { particles, step } => {
            let mut cfg = base_config(common, Some("euclidean-torus"))?.expect("fallback given");
            let mut exp = cfg
                .experiments
                .iter()
                .find(|e| matches!(e, Experiment::Superposition { .. }))
                .cloned()
                .map_or_else(|| Experiment::from_name("superposition"), Ok)?;
            if let Experiment::Superposition { particles: p, step: s, .. } = &mut exp {
                *p = particles.unwrap_or(*p);
                *s = step.unwrap_or(*s);
            }
            cfg.experiments = vec![exp];
            run_configured(name, &cfg, common, &common.out)
        }
        Command::Flow { particles, step, samples } => {
            let cfg = base_config(common, Some("euclidean-torus"))?.expect("fallback given");
            flow(name, &cfg, common, *particles, *step, *samples)
        }
    }
}

fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_fatal(format!("cannot create {}: {e}", dir.display())))
}

/// Writes the manifest in its initial state; finalised by [`emit_bundle`].
fn start_manifest(command: &str, cfg: &ScenarioConfig, dir: &Path) -> Result<RunManifest, Failure> {
    prepare_dir(dir)?;
    let mut m = RunManifest::new(command);
    m.config_hash = Some(cfg.hash());
    m.seeds = vec![cfg.seed];
    m.status = "running".into();
    m.write(dir).map_err(io_fatal)?;
    let resolved = serde_json::to_string_pretty(cfg).map_err(io_fatal)?;
    write_atomic(&dir.join("config.resolved.json"), resolved.as_bytes()).map_err(io_fatal)?;
    Ok(m)
}

fn finish_abort(mut manifest: RunManifest, dir: &Path, failure: Failure) -> Failure {
    manifest.status = "error".into();
    let _ = manifest.write(dir);
    failure
}

fn emit_bundle(results: &[ScenarioResult], common: &Common, dir: &Path, mut manifest: RunManifest) -> Result<bool, Failure> {
    prepare_dir(dir)?;
    let mut outputs = emit_report(results, ReportFormat::Json, dir).map_err(io_fatal)?;
    if common.format != ReportFormat::Json {
        outputs.extend(emit_report(results, common.format, dir).map_err(io_fatal)?);
    }
    let passed = results.iter().all(|r| r.passed);
    manifest.outputs.extend(outputs);
    manifest.status = if passed { "pass" } else { "fail" }.into();
    manifest.write(dir).map_err(io_fatal)?;
    for r in results {
        print_summary(r);
    }
    Ok(passed)
}

fn print_summary(r: &ScenarioResult) {
    println!("{} (K = {}, N = {}): {}", r.name, r.k, r.nodes, if r.passed { "PASS" } else { "FAIL" });
    for e in &r.experiments {
        let status = if e.passed { "PASS" } else { "FAIL" };
        println!("  [{status}] {} #{} ({:.2}s)", e.kind, e.index, e.wall_clock_s);
        if let Some(err) = &e.error {
            println!("         error: {err}");
        }
        for m in e.metrics.iter().filter(|m| m.passed == Some(false)) {
            println!("         {} = {:.3e} (tolerance {:?})", m.name, m.value, m.tolerance);
        }
    }
}

fn run_configured(command: &str, cfg: &ScenarioConfig, common: &Common, dir: &Path) -> Result<bool, Failure> {
    let manifest = start_manifest(command, cfg, dir)?;
    match run_scenario(cfg) {
        Ok(result) => emit_bundle(&[result], common, dir, manifest),
        Err(e) => Err(finish_abort(manifest, dir, e.into())),
    }
}

fn single_result(cfg: &ScenarioConfig, kind: &str, started: Instant, metrics: Vec<Metric>, artifacts: Vec<Artifact>) -> ScenarioResult {
    let passed = metrics.iter().all(|m| m.passed != Some(false));
    let secs = started.elapsed().as_secs_f64();
    ScenarioResult {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        k: cfg.k(),
        dimension: cfg.space.dimension,
        nodes: cfg.space.nodes,
        passed,
        experiments: vec![ExperimentResult {
            index: 0,
            kind: kind.into(),
            passed,
            metrics,
            artifacts,
            notes: vec![],
            error: None,
            wall_clock_s: secs,
        }],
        wall_clock_s: secs,
        version: env!("CARGO_PKG_VERSION").into(),
    }
}

fn solve_ce(command: &str, cfg: &ScenarioConfig, common: &Common, sigma: Option<f64>, theta: Option<f64>, monotone: bool) -> Result<bool, Failure> {
    let dir = &common.out;
    let manifest = start_manifest(command, cfg, dir)?;
    let started = Instant::now();
    let body = || -> Result<ScenarioResult, Error> {
        let (sigma0, theta0, guard0, rs) = cfg
            .experiments
            .iter()
            .find_map(|e| match e {
                Experiment::Continuity { sigma, theta, positivity_guard, r } => Some((*sigma, *theta, *positivity_guard, r.clone())),
                _ => None,
            })
            .unwrap_or((0.01, 0.5, false, vec![2.0, 4.0, f64::INFINITY]));
        let mut ce = CeConfig::new(sigma.unwrap_or(sigma0), cfg.time.t_end, cfg.dt()).theta(theta.unwrap_or(theta0));
        ce.positivity_guard = guard0;
        if monotone {
            ce = ce.monotone();
        }
        let space = cfg.space.build()?;
        let b = cfg.field.build(&space)?;
        let u0 = cfg.initial.build(&cfg.space, &space)?;
        let sol = solve_viscous_ce(&space, &b, &u0, &ce)?;
        let mut metrics = vec![Metric::at_most("mass_drift_per_time", sol.mass_drift() / cfg.time.t_end, 1e-10)];
        for r in rs {
            metrics.push(Metric::at_most(&format!("apriori_ratio_r{r}"), apriori_check(&space, &sol, r)?.worst_ratio, 1.0));
        }
        let mut trace = Vec::new();
        write_trace_csv(&sol, &mut trace)?;
        write_fields(&sol, &dir.join("fields.bin"))?;
        let artifacts = vec![Artifact { name: "trace".into(), csv: String::from_utf8_lossy(&trace).into_owned() }];
        Ok(single_result(cfg, "continuity", started, metrics, artifacts))
    };
    match body() {
        Ok(result) => {
            let mut manifest = manifest;
            manifest.outputs.push(dir.join("fields.bin"));
            emit_bundle(&[result], common, dir, manifest)
        }
        Err(e) => Err(finish_abort(manifest, dir, e.into())),
    }
}

fn flow(command: &str, cfg: &ScenarioConfig, common: &Common, particles: usize, step: f64, samples: usize) -> Result<bool, Failure> {
    let dir = &common.out;
    let manifest = start_manifest(command, cfg, dir)?;
    let started = Instant::now();
    let body = || -> Result<ScenarioResult, Error> {
        let space = cfg.space.build()?;
        let b = cfg.field.build(&space)?;
        let u0 = cfg.initial.build(&cfg.space, &space)?;
        let steps = ((cfg.time.t_end / step) - 1e-9).ceil().max(1.0) as usize;
        let every = (steps / samples.max(1)).max(1);
        let fc = FlowConfig::new(cfg.time.t_end, step).sample_every(every).seed(cfg.seed);
        let e = integrate_flow(&space, &b, Initial::Density(&u0, particles), &fc)?;
        let mut paths = Vec::new();
        e.write_csv(&mut paths)?;
        let metrics = vec![
            Metric::at_most("flagged_fraction", e.flagged_fraction(), 0.01),
            Metric::info("richardson_tolerance", e.tolerance),
            Metric::info("particles", e.particles as f64),
        ];
        let artifacts = vec![Artifact { name: "paths".into(), csv: String::from_utf8_lossy(&paths).into_owned() }];
        Ok(single_result(cfg, "flow", started, metrics, artifacts))
    };
    match body() {
        Ok(result) => emit_bundle(&[result], common, dir, manifest),
        Err(e) => Err(finish_abort(manifest, dir, e.into())),
    }
}
