use serde::{Deserialize, Serialize};

use super::design::{Design, StepDesign};
use super::summary::{Cell, SummaryStats};
use crate::changepoint::{
    cuts, interval_contains, locate, pair_test, refine_interval, scan, two_step_detect,
    CountMethod, LocateResult, RefineConfig, RefineResult, ScanConfig, ScanResult, TwoStepResult,
};
use crate::error::{Error, Result};
use crate::estimation::{pivot, solve_a, EstimateResult, SolverConfig};
use crate::process::{simulate_chain, simulate_graph, ParamSchedule, StepSchedule, Trace};
use crate::rng::substream_seed;
use crate::stats::{chi2_1_quantile, quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Estimate,
    PairTest,
    Scan,
    Refine,
    TwoStep,
    Locate,
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Estimate => "estimate",
            Analysis::PairTest => "pair_test",
            Analysis::Scan => "scan",
            Analysis::Refine => "refine",
            Analysis::TwoStep => "two_step",
            Analysis::Locate => "locate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Simulator {
    /// Full multigraph.
    #[default]
    Graph,
    /// Leaf-count chain only.
    Chain,
}

/// Catalog of preset scenarios mirroring the reference simulation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Constant offset, T = 7500, interval estimates.
    S1,
    /// Constant offset, T = 15000, interval estimates.
    S2,
    /// Change to 0.5 at 2T/3, interval estimates.
    S2b,
    /// Pair statistics with a change to `a3` at 2T/3.
    S3,
    /// Nested refinement with a change to 5 at 2T/3.
    S4,
    /// Scan with two change points (1 -> 5 -> 1), k = 30.
    S5,
    /// Two-step detection on the S5 design.
    S6,
    /// Random vertex steps, interval estimates.
    S7,
    /// Location with vertex steps only.
    S8,
    /// Location with random vertex steps.
    S9,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::S1,
        Scenario::S2,
        Scenario::S2b,
        Scenario::S3,
        Scenario::S4,
        Scenario::S5,
        Scenario::S6,
        Scenario::S7,
        Scenario::S8,
        Scenario::S9,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.id().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Config(format!("unknown scenario {name}")))
    }

    pub fn id(&self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S2b => "S2b",
            Scenario::S3 => "S3",
            Scenario::S4 => "S4",
            Scenario::S5 => "S5",
            Scenario::S6 => "S6",
            Scenario::S7 => "S7",
            Scenario::S8 => "S8",
            Scenario::S9 => "S9",
        }
    }
}

/// Knobs that vary within a scenario family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Overrides the default horizon.
    pub horizon: Option<usize>,
    /// Offset after 2T/3 for S3 and S8.
    pub a3: f64,
    /// Vertex-step probability for S7 and S9.
    pub p: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            horizon: None,
            a3: 5.0,
            p: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub label: String,
    pub params: ParamSchedule,
    pub steps: StepSchedule,
    pub horizon: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub k: usize,
    pub solver: SolverConfig,
    pub analysis: Analysis,
    pub refine: RefineConfig,
    pub count_method: CountMethod,
    /// Nominal change point used to score location and refinement; defaults
    /// to the first change of `params`.
    pub change_point: Option<usize>,
    pub simulator: Simulator,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(
        label: impl Into<String>,
        params: ParamSchedule,
        steps: StepSchedule,
        analysis: Analysis,
    ) -> Self {
        let horizon = params.horizon().min(steps.horizon);
        Self {
            label: label.into(),
            params,
            steps,
            horizon,
            replications: 100,
            master_seed: 0,
            k: 5,
            solver: SolverConfig::default(),
            analysis,
            refine: RefineConfig::default(),
            count_method: CountMethod::ChiSquare,
            change_point: None,
            simulator: Simulator::Graph,
            workers: 0,
        }
    }

    /// Preset configuration for a catalog scenario.
    pub fn scenario(id: Scenario, params: ScenarioParams) -> Result<Self> {
        let design = |t: usize, alphas: [f64; 3], steps: StepDesign| Design {
            horizon: params.horizon.unwrap_or(t),
            alphas,
            steps,
        };
        let (d, analysis, k, n) = match id {
            Scenario::S1 => (design(7500, [1.0; 3], StepDesign::Section4), Analysis::Estimate, 5, 1000),
            Scenario::S2 => (design(15000, [1.0; 3], StepDesign::Section4), Analysis::Estimate, 5, 1000),
            Scenario::S2b => (
                design(7500, [1.0, 1.0, 0.5], StepDesign::Section4),
                Analysis::Estimate,
                5,
                1000,
            ),
            Scenario::S3 => (
                design(7500, [1.0, 1.0, params.a3], StepDesign::Section4),
                Analysis::PairTest,
                5,
                500,
            ),
            Scenario::S4 => (
                design(7500, [1.0, 1.0, 5.0], StepDesign::Section4),
                Analysis::Refine,
                5,
                500,
            ),
            Scenario::S5 => (
                design(60000, [1.0, 5.0, 1.0], StepDesign::Section4),
                Analysis::Scan,
                30,
                100,
            ),
            Scenario::S6 => (
                design(60000, [1.0, 5.0, 1.0], StepDesign::Section4),
                Analysis::TwoStep,
                30,
                100,
            ),
            Scenario::S7 => (
                design(7500, [1.0; 3], StepDesign::Bernoulli { p: params.p }),
                Analysis::Estimate,
                5,
                1000,
            ),
            Scenario::S8 => (
                design(7500, [1.0, 1.0, params.a3], StepDesign::AllVertex),
                Analysis::Locate,
                5,
                1000,
            ),
            Scenario::S9 => (
                design(7500, [1.0, 1.0, 2.0], StepDesign::Bernoulli { p: params.p }),
                Analysis::Locate,
                5,
                1000,
            ),
        };
        let (ps, ss) = d.build()?;
        let mut cfg = Self::new(id.id(), ps, ss, analysis);
        cfg.k = k;
        cfg.replications = n;
        if matches!(id, Scenario::S4) {
            cfg.refine.q_max = 5;
        }
        if matches!(id, Scenario::S8 | Scenario::S9 | Scenario::S4) {
            cfg.change_point = Some(2 * d.horizon / 3 + 1);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.horizon == 0
            || self.horizon > self.params.horizon()
            || self.horizon > self.steps.horizon
        {
            return Err(Error::Config("horizon not covered by the schedules".into()));
        }
        self.solver.validate()
    }

    fn nominal_change(&self) -> Option<usize> {
        self.change_point
            .or_else(|| self.params.change_points().first().copied())
    }

    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            solver: self.solver,
            ..ScanConfig::new(self.k)
        }
    }

    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            solver: self.solver,
            ..self.refine
        }
    }
}

/// Per-replication analysis output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RepOutcome {
    Estimate(Vec<EstimateResult>),
    PairTest(Vec<f64>),
    Scan(ScanResult),
    Refine(RefineResult),
    TwoStep(TwoStepResult),
    Locate(LocateResult),
}

/// Simulates replication `index` of `cfg`.
pub fn simulate_replication(cfg: &ExperimentConfig, index: u64) -> Result<Trace> {
    let seed = substream_seed(cfg.master_seed, index);
    match cfg.simulator {
        Simulator::Graph => Ok(simulate_graph(&cfg.params, &cfg.steps, cfg.horizon, seed)?.0),
        Simulator::Chain => simulate_chain(&cfg.params, &cfg.steps, cfg.horizon, seed),
    }
}

/// Applies the configured analysis to one trace.
pub fn analyze(cfg: &ExperimentConfig, trace: &Trace) -> Result<RepOutcome> {
    let horizon = trace.horizon();
    Ok(match cfg.analysis {
        Analysis::Estimate => {
            let c = cuts(0, horizon, cfg.k);
            let ests = (1..=cfg.k)
                .map(|i| solve_a(trace, c[i - 1], c[i], &cfg.solver).map_err(|e| e.in_interval(i)))
                .collect::<Result<Vec<_>>>()?;
            if let Some(bad) = ests.iter().position(|e| !e.is_converged()) {
                return Err(Error::Degenerate(format!("status {:?}", ests[bad].status)).in_interval(bad + 1));
            }
            RepOutcome::Estimate(ests)
        }
        Analysis::PairTest => {
            let c = cuts(0, horizon, cfg.k);
            let ests = (1..=cfg.k)
                .map(|i| solve_a(trace, c[i - 1], c[i], &cfg.solver).map_err(|e| e.in_interval(i)))
                .collect::<Result<Vec<_>>>()?;
            let l = (2..cfg.k)
                .map(|i| pair_test(&ests[i - 2], &ests[i]).map_err(|e| e.in_interval(i)))
                .collect::<Result<Vec<_>>>()?;
            RepOutcome::PairTest(l)
        }
        Analysis::Scan => RepOutcome::Scan(scan(trace, &cfg.scan_config())?),
        Analysis::Refine => RepOutcome::Refine(refine_interval(trace, &cfg.refine_config())?),
        Analysis::TwoStep => RepOutcome::TwoStep(two_step_detect(
            trace,
            &cfg.scan_config(),
            cfg.count_method,
            &cfg.refine_config(),
        )?),
        Analysis::Locate => RepOutcome::Locate(locate(trace, 0, horizon, &cfg.solver)?),
    })
}

/// Runs every replication and returns the outcomes in replication order.
pub fn run_outcomes(cfg: &ExperimentConfig) -> Result<Vec<Result<RepOutcome>>> {
    use rayon::prelude::*;
    cfg.validate()?;
    let job = || {
        (0..cfg.replications as u64)
            .into_par_iter()
            .map(|i| simulate_replication(cfg, i).and_then(|trace| analyze(cfg, &trace)))
            .collect::<Vec<_>>()
    };
    if cfg.workers == 0 {
        Ok(job())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(pool.install(job))
    }
}

/// Runs the experiment and aggregates it.
pub fn run_replications(cfg: &ExperimentConfig) -> Result<SummaryStats> {
    let outcomes = run_outcomes(cfg)?;
    Ok(summarize(cfg, &outcomes))
}

/// Aggregates outcomes. The result depends only on the multiset of outcomes,
/// not on their order.
pub fn summarize(cfg: &ExperimentConfig, outcomes: &[Result<RepOutcome>]) -> SummaryStats {
    let mut s = SummaryStats {
        label: cfg.label.clone(),
        analysis: cfg.analysis.name().to_string(),
        horizon: cfg.horizon,
        replications: outcomes.len(),
        ..SummaryStats::default()
    };
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => errors.push(e.to_string()),
        }
    }
    s.failures = errors.len();
    errors.sort();
    errors.dedup();
    errors.truncate(5);
    s.failure_examples = errors;
    match cfg.analysis {
        Analysis::Estimate => summarize_estimates(cfg, &ok, &mut s),
        Analysis::PairTest => summarize_pairs(cfg, &ok, &mut s),
        Analysis::Scan => summarize_scans(cfg, &ok, &mut s),
        Analysis::Refine => summarize_refines(cfg, &ok, &mut s),
        Analysis::TwoStep => summarize_two_step(cfg, &ok, &mut s),
        Analysis::Locate => summarize_locates(cfg, &ok, &mut s),
    }
    s
}

fn summarize_estimates(cfg: &ExperimentConfig, ok: &[&RepOutcome], s: &mut SummaryStats) {
    let runs: Vec<&Vec<EstimateResult>> = ok
        .iter()
        .filter_map(|o| match o {
            RepOutcome::Estimate(v) => Some(v),
            _ => None,
        })
        .collect();
    let c = cuts(0, cfg.horizon, cfg.k);
    for i in 1..=cfg.k {
        let (t0, t1) = (c[i - 1], c[i]);
        let truth = cfg
            .params
            .is_constant_on(t0 + 1, t1)
            .then(|| cfg.params.value(t1).ok())
            .flatten();
        let a_hats: Vec<f64> = runs.iter().map(|r| r[i - 1].a_hat).collect();
        let mut cell = Cell::from_samples(format!("interval {i} ({t0},{t1}]"), &a_hats, truth);
        if let Some(a) = truth {
            let hits = runs
                .iter()
                .filter(|r| r[i - 1].ci.is_some_and(|(lo, hi)| lo <= a && a <= hi))
                .count();
            cell = cell.with_coverage(hits, runs.len());
            let mut piv: Vec<f64> = runs.iter().map(|r| pivot(&r[i - 1], a)).collect();
            piv.sort_by(f64::total_cmp);
            s.pivots.push(piv);
        } else {
            s.pivots.push(Vec::new());
        }
        s.cells.push(cell);
    }
}

fn summarize_pairs(cfg: &ExperimentConfig, ok: &[&RepOutcome], s: &mut SummaryStats) {
    let runs: Vec<&Vec<f64>> = ok
        .iter()
        .filter_map(|o| match o {
            RepOutcome::PairTest(v) => Some(v),
            _ => None,
        })
        .collect();
    let critical = chi2_1_quantile(0.95).expect("valid level");
    for i in 2..cfg.k {
        let ls: Vec<f64> = runs.iter().map(|r| r[i - 2]).collect();
        s.cells.push(Cell::from_samples(format!("L_{i}"), &ls, None));
        let rejections = ls.iter().filter(|&&l| l > critical).count();
        s.rates
            .insert(format!("L_{i} > chi2(0.95)"), rejections as f64 / ls.len().max(1) as f64);
    }
}

fn summarize_scans(cfg: &ExperimentConfig, ok: &[&RepOutcome], s: &mut SummaryStats) {
    let runs: Vec<&ScanResult> = ok
        .iter()
        .filter_map(|o| match o {
            RepOutcome::Scan(v) => Some(v),
            _ => None,
        })
        .collect();
    let changes = cfg.params.change_points();
    for rank in 0..4 {
        let vals: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.sorted_local_maxima().get(rank).map(|p| p.1))
            .collect();
        s.cells
            .push(Cell::from_samples(format!("local max #{}", rank + 1), &vals, None));
    }
    for r in &runs {
        for j in r.top_local_maxima(changes.len().max(1)) {
            s.tally("top local maxima", format!("L_{j}"));
        }
        s.tally("count threshold", r.counts.threshold.to_string());
        s.tally("count chi_square", r.counts.chi_square.to_string());
        s.tally("count ratio", r.counts.ratio.to_string());
    }
    let n = runs.len().max(1) as f64;
    for (name, method) in [
        ("threshold", CountMethod::Threshold),
        ("chi_square", CountMethod::ChiSquare),
        ("ratio", CountMethod::Ratio),
    ] {
        let hits = runs
            .iter()
            .filter(|r| r.counts.get(method) == changes.len())
            .count();
        s.rates.insert(format!("count correct ({name})"), hits as f64 / n);
    }
    // each true change has a selected maximum within one interval of the one holding it
    let bracketed = runs
        .iter()
        .filter(|r| {
            let top = r.top_local_maxima(changes.len());
            changes.iter().all(|&ch| {
                let holder = r.boundaries.partition_point(|&b| b < ch);
                top.iter().any(|&j| j.abs_diff(holder) <= 1)
            })
        })
        .count();
    s.rates.insert("changes bracketed".into(), bracketed as f64 / n);
}

fn summarize_refines(cfg: &ExperimentConfig, ok: &[&RepOutcome], s: &mut SummaryStats) {
    let runs: Vec<&RefineResult> = ok
        .iter()
        .filter_map(|o| match o {
            RepOutcome::Refine(v) => Some(v),
            _ => None,
        })
        .collect();
    let change = cfg.nominal_change();
    stage_tables(runs.iter().copied(), change, cfg.horizon, "", s);
}

fn stage_tables<'a>(
    runs: impl Iterator<Item = &'a RefineResult> + Clone,
    change: Option<usize>,
    horizon: usize,
    prefix: &str,
    s: &mut SummaryStats,
) {
    let depth = runs.clone().map(|r| r.stages.len()).max().unwrap_or(0);
    for q in 0..depth {
        let stage_name = if q == 0 { "V".to_string() } else { format!("V^({q})") };
        let mut contained = 0;
        let mut total = 0;
        let mut lengths = Vec::new();
        for r in runs.clone() {
            if let Some(st) = r.stages.get(q) {
                let (lo, hi) = st.interval;
                s.tally(&format!("{prefix}{stage_name}"), format!("[{lo},{hi}]"));
                total += 1;
                lengths.push((hi - lo) as f64 / horizon as f64);
                if change.is_some_and(|c| interval_contains(st.interval, c)) {
                    contained += 1;
                }
            }
        }
        if change.is_some() && total > 0 {
            s.rates.insert(
                format!("{prefix}{stage_name} contains change"),
                contained as f64 / total as f64,
            );
        }
        s.cells
            .push(Cell::from_samples(format!("{prefix}{stage_name} length/T"), &lengths, None));
    }
}

fn summarize_two_step(cfg: &ExperimentConfig, ok: &[&RepOutcome], s: &mut SummaryStats) {
    let runs: Vec<&TwoStepResult> = ok
        .iter()
        .filter_map(|o| match o {
            RepOutcome::TwoStep(v) => Some(v),
            _ => None,
        })
        .collect();
    let n = runs.len().max(1) as f64;
    for r in &runs {
        s.tally("estimated count", r.count.to_string());
    }
    let changes = cfg.params.change_points();
    let correct = runs.iter().filter(|r| r.count == changes.len()).count();
    s.rates.insert("count correct".into(), correct as f64 / n);
    for &c in &changes {
        let matched: Vec<&RefineResult> = runs
            .iter()
            .filter_map(|r| {
                r.refinements
                    .iter()
                    .find(|rf| interval_contains(rf.window, c))
            })
            .collect();
        let prefix = format!("change {c}: ");
        s.rates
            .insert(format!("{prefix}window contains change"), matched.len() as f64 / n);
        stage_tables(matched.iter().copied(), Some(c), cfg.horizon, &prefix, s);
    }
}

fn summarize_locates(cfg: &ExperimentConfig, ok: &[&RepOutcome], s: &mut SummaryStats) {
    let runs: Vec<&LocateResult> = ok
        .iter()
        .filter_map(|o| match o {
            RepOutcome::Locate(v) => Some(v),
            _ => None,
        })
        .collect();
    let t = cfg.horizon as f64;
    let a_hats: Vec<f64> = runs.iter().map(|r| r.a_hat).collect();
    let taus: Vec<f64> = runs.iter().map(|r| r.tau_hat as f64).collect();
    s.cells.push(Cell::from_samples("a_hat", &a_hats, None));
    s.cells.push(Cell::from_samples("tau_hat", &taus, None));
    if let Some(r) = cfg.nominal_change() {
        let r = r as f64;
        let abs: Vec<f64> = taus.iter().map(|x| (x - r).abs() / t).collect();
        let sq: Vec<f64> = taus.iter().map(|x| ((x - r) / t).powi(2)).collect();
        s.cells.push(Cell::from_samples("|tau_hat - R|/T", &abs, None));
        s.cells.push(Cell::from_samples("(tau_hat - R)^2/T^2", &sq, None));
    }
    if !taus.is_empty() {
        let scaled: Vec<f64> = taus.iter().map(|x| x / t).collect();
        s.rates.insert("tau_hat/T q0.025".into(), quantile(&scaled, 0.025));
        s.rates.insert("tau_hat/T q0.975".into(), quantile(&scaled, 0.975));
    }
}
