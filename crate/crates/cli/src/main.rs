mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use leafcp_core::experiments::{
    write_experiment, write_locate_series, Design, ScenarioParams, Simulator, StepDesign,
};
use leafcp_core::stats::chi2_1_sf;
use leafcp_core::{
    locate, pair_test, refine_window, scan, simulate_chain, simulate_graph, solve_a,
    two_step_detect, CountMethod, EstimateResult, ExperimentConfig, RefineConfig, Scenario,
    ScanConfig, SolverConfig, Trace,
};

use config::FileConfig;

/// Leaf counts of preferential attachment graphs with a drifting offset:
/// simulate traces, estimate the offset and find its change points.
#[derive(Parser)]
#[command(name = "leafcp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trace and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the offset on (from, to].
    Estimate(EstimateArgs),
    /// Test equal offsets on (0, from] and (to, T].
    Test(TestArgs),
    /// Count and bracket change points.
    Detect(DetectArgs),
    /// Locate a single change point in (from, to).
    Locate(LocateArgs),
    /// Run a replicated scenario and write its tables.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverFlags {
    /// Residual tolerance |f(a) - x| of the solver.
    #[arg(long)]
    er: Option<f64>,
    /// Confidence level of reported intervals.
    #[arg(long)]
    level: Option<f64>,
}

impl SolverFlags {
    fn resolve(&self, file: &FileConfig) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            e_r: file.pick_or(self.er, "er", d.e_r)?,
            level: file.pick_or(self.level, "level", d.level)?,
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TraceFlags {
    /// Trace CSV with columns t,y,v,x[,a_true].
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl TraceFlags {
    fn load(&self, file: &FileConfig) -> Result<Trace> {
        let path: PathBuf = file.require(self.trace.clone(), "trace")?;
        Trace::load(&path).with_context(|| format!("loading trace {}", path.display()))
    }
}

macro_rules! value_enum_from_str {
    ($($t:ty),*) => {$(
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                <$t as ValueEnum>::from_str(s, true)
            }
        }
    )*};
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Section4,
    AllVertex,
    Bernoulli,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    Graph,
    Chain,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Scan,
    Refine,
    TwoStep,
}

#[derive(Clone, Copy, ValueEnum)]
enum Count {
    Threshold,
    ChiSquare,
    Ratio,
}

value_enum_from_str!(Preset, SimKind, Mode, Count);

impl From<Count> for CountMethod {
    fn from(c: Count) -> Self {
        match c {
            Count::Threshold => CountMethod::Threshold,
            Count::ChiSquare => CountMethod::ChiSquare,
            Count::Ratio => CountMethod::Ratio,
        }
    }
}

impl From<SimKind> for Simulator {
    fn from(s: SimKind) -> Self {
        match s {
            SimKind::Graph => Simulator::Graph,
            SimKind::Chain => Simulator::Chain,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Step design: section4, all-vertex or bernoulli.
    #[arg(long)]
    preset: Option<Preset>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Offsets on [1, T/3+], (.., 2T/3] and the rest.
    #[arg(long, allow_negative_numbers = true)]
    a1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a3: Option<f64>,
    /// Vertex-step probability for the bernoulli preset.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// graph (full simulation) or chain (leaf count only).
    #[arg(long)]
    simulator: Option<SimKind>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    trace: TraceFlags,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    from: Option<usize>,
    #[arg(long)]
    to: Option<usize>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    trace: TraceFlags,
    #[command(flatten)]
    solver: SolverFlags,
    /// End of the left interval (0, from].
    #[arg(long)]
    from: Option<usize>,
    /// Start of the right interval (to, T].
    #[arg(long)]
    to: Option<usize>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    trace: TraceFlags,
    #[command(flatten)]
    solver: SolverFlags,
    /// scan, refine or two-step.
    #[arg(long)]
    mode: Option<Mode>,
    /// Number of scan intervals (pieces per stage for refine).
    #[arg(long)]
    k: Option<usize>,
    /// Threshold c_T of the threshold count; defaults to sqrt(T).
    #[arg(long)]
    ct: Option<f64>,
    /// Count used by two-step: threshold, chi-square or ratio.
    #[arg(long)]
    count: Option<Count>,
    /// Refinement stages after the first interval.
    #[arg(long)]
    q_max: Option<usize>,
    /// Stop refining once the interval is this short.
    #[arg(long)]
    min_len: Option<usize>,
    /// Window of a single refinement.
    #[arg(long)]
    from: Option<usize>,
    #[arg(long)]
    to: Option<usize>,
}

#[derive(Args)]
struct LocateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    trace: TraceFlags,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    from: Option<usize>,
    #[arg(long)]
    to: Option<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverFlags,
    /// Scenario id, S1 to S9 (or S2b).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    a3: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    count: Option<Count>,
    #[arg(long)]
    q_max: Option<usize>,
    #[arg(long)]
    simulator: Option<SimKind>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Test(a) => test(a),
        Command::Detect(a) => detect(a),
        Command::Locate(a) => locate_cmd(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("no --seed given; drew seed {s}");
        s
    })
}

/// Writes JSON to `out`, or to stdout.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            serde_json::to_writer_pretty(&mut w, value)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        None => {
            let mut w = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn window(file: &FileConfig, from: Option<usize>, to: Option<usize>, trace: &Trace) -> Result<(usize, usize)> {
    let t0 = file.pick_or(from, "from", 0)?;
    let t1 = file.pick_or(to, "to", trace.horizon())?;
    if t0 >= t1 || t1 > trace.horizon() {
        bail!("window ({t0}, {t1}] does not fit a trace of horizon {}", trace.horizon());
    }
    Ok((t0, t1))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let out: PathBuf = file.require(a.common.out, "out")?;
    let horizon = file.require(a.horizon, "T")?;
    let alphas = [
        file.pick_or(a.a1, "a1", 1.0)?,
        file.pick_or(a.a2, "a2", 1.0)?,
        file.pick_or(a.a3, "a3", 1.0)?,
    ];
    let steps = match file.pick_or(a.preset, "preset", Preset::Section4)? {
        Preset::Section4 => StepDesign::Section4,
        Preset::AllVertex => StepDesign::AllVertex,
        Preset::Bernoulli => StepDesign::Bernoulli { p: file.pick_or(a.p, "p", 0.5)? },
    };
    let (params, steps) = Design { horizon, alphas, steps }
        .build()
        .context("invalid simulation design")?;
    let seed = seed_or_entropy(file.pick(a.seed, "seed")?);
    let trace = match file.pick_or(a.simulator, "simulator", SimKind::Graph)? {
        SimKind::Graph => simulate_graph(&params, &steps, horizon, seed)?.0,
        SimKind::Chain => simulate_chain(&params, &steps, horizon, seed)?,
    };
    trace
        .save(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "T={} v_T={} x_T={} seed={seed}",
        horizon,
        trace.v()[horizon],
        trace.x()[horizon]
    );
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let trace = a.trace.load(&file)?;
    let solver = a.solver.resolve(&file)?;
    let (t0, t1) = window(&file, a.from, a.to, &trace)?;
    let est = solve_a(&trace, t0, t1, &solver)
        .with_context(|| format!("estimating on ({t0}, {t1}]"))?;
    emit_json(&est, file.pick(a.common.out, "out")?.as_deref())
}

#[derive(Serialize)]
struct TestReport {
    left: EstimateResult,
    right: EstimateResult,
    l: f64,
    p_value: f64,
}

fn test(a: TestArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let trace = a.trace.load(&file)?;
    let solver = a.solver.resolve(&file)?;
    let horizon = trace.horizon();
    let r1 = file.require(a.from, "from")?;
    let r2 = file.require(a.to, "to")?;
    if r1 == 0 || r1 > r2 || r2 >= horizon {
        bail!("need 0 < from <= to < T = {horizon}, got from={r1} to={r2}");
    }
    let left = solve_a(&trace, 0, r1, &solver).with_context(|| format!("estimating on (0, {r1}]"))?;
    let right = solve_a(&trace, r2, horizon, &solver)
        .with_context(|| format!("estimating on ({r2}, {horizon}]"))?;
    let l = pair_test(&left, &right)?;
    let report = TestReport { left, right, l, p_value: chi2_1_sf(l) };
    eprintln!("L = {:.4}, p = {:.4}", report.l, report.p_value);
    emit_json(&report, file.pick(a.common.out, "out")?.as_deref())
}

fn detect(a: DetectArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let trace = a.trace.load(&file)?;
    let solver = a.solver.resolve(&file)?;
    let out = file.pick::<PathBuf>(a.common.out, "out")?;
    let mode = file.pick_or(a.mode, "mode", Mode::Scan)?;
    let default_k = if matches!(mode, Mode::Refine) { 5 } else { 10 };
    let k = file.pick_or(a.k, "k", default_k)?;
    let scan_cfg = ScanConfig {
        solver,
        c_t: file.pick(a.ct, "ct")?,
        ..ScanConfig::new(k)
    };
    let d = RefineConfig::default();
    let refine = RefineConfig {
        solver,
        q_max: file.pick_or(a.q_max, "q_max", d.q_max)?,
        min_len: file.pick_or(a.min_len, "min_len", d.min_len)?,
        ..d
    };
    match mode {
        Mode::Scan => emit_json(&scan(&trace, &scan_cfg)?, out.as_deref()),
        Mode::Refine => {
            let w = window(&file, a.from, a.to, &trace)?;
            let r = refine_window(&trace, w, &RefineConfig { k, ..refine })?;
            emit_json(&r, out.as_deref())
        }
        Mode::TwoStep => {
            let method = file.pick_or(a.count, "count", Count::ChiSquare)?.into();
            let r = two_step_detect(&trace, &scan_cfg, method, &refine)?;
            for rf in &r.refinements {
                eprintln!("change interval ({}, {}]", rf.final_interval.0, rf.final_interval.1);
            }
            emit_json(&r, out.as_deref())
        }
    }
}

#[derive(Serialize)]
struct LocateReport {
    t0: usize,
    t1: usize,
    a_hat: f64,
    tau_hat: usize,
    peak_value: f64,
    diagnostic: Option<PathBuf>,
}

fn locate_cmd(a: LocateArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let trace = a.trace.load(&file)?;
    let solver = a.solver.resolve(&file)?;
    let (t0, t1) = window(&file, a.from, a.to, &trace)?;
    let loc = locate(&trace, t0, t1, &solver).with_context(|| format!("locating in ({t0}, {t1})"))?;
    let out = file.pick::<PathBuf>(a.common.out, "out")?;
    if let Some(path) = &out {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_locate_series(&loc, BufWriter::new(f))?;
    }
    emit_json(
        &LocateReport {
            t0: loc.t0,
            t1: loc.t1,
            a_hat: loc.a_hat,
            tau_hat: loc.tau_hat,
            peak_value: loc.peak_value,
            diagnostic: out,
        },
        None,
    )
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let id = Scenario::parse(&file.require::<String>(a.scenario, "scenario")?)?;
    let d = ScenarioParams::default();
    let params = ScenarioParams {
        horizon: file.pick(a.horizon, "T")?,
        a3: file.pick_or(a.a3, "a3", d.a3)?,
        p: file.pick_or(a.p, "p", d.p)?,
    };
    let mut cfg = ExperimentConfig::scenario(id, params)?;
    cfg.solver = a.solver.resolve(&file)?;
    cfg.master_seed = seed_or_entropy(file.pick(a.seed, "seed")?);
    cfg.replications = file.pick_or(a.replications, "replications", cfg.replications)?;
    cfg.k = file.pick_or(a.k, "k", cfg.k)?;
    cfg.workers = file.pick_or(a.workers, "workers", cfg.workers)?;
    cfg.refine.q_max = file.pick_or(a.q_max, "q_max", cfg.refine.q_max)?;
    if let Some(c) = file.pick(a.count, "count")? {
        cfg.count_method = c.into();
    }
    if let Some(s) = file.pick(a.simulator, "simulator")? {
        cfg.simulator = s.into();
    }
    cfg.validate()?;
    let summary = leafcp_core::run_replications(&cfg)?;
    let dir = file.pick_or(a.common.out, "out", PathBuf::from("."))?;
    let stem = id.id().to_lowercase();
    for path in write_experiment(&dir, &stem, &cfg, &summary)? {
        println!("{}", path.display());
    }
    if summary.failures > 0 {
        eprintln!("{} of {} replications failed", summary.failures, cfg.replications);
    }
    Ok(())
}
