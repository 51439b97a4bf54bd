//! Monte-Carlo experiments: parameter sweeps, per-run records, aggregated
//! metrics, convergence traces and oracle comparisons.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decentral::{self, overhead, OverheadAlgorithm, OverheadCounters};
use crate::error::{Error, Result};
use crate::icrbi::{self, IcrbiOptions, StepRule};
use crate::matching::{self, Criterion};
use crate::model::{validate_constraints, Assignment, Scenario};
use crate::oracle;
use crate::scenario::{generate, GenConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Icrbi,
    MaxTask,
    MinPw,
    Decentral,
    NonCope,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Icrbi,
        Algorithm::MaxTask,
        Algorithm::MinPw,
        Algorithm::Decentral,
        Algorithm::NonCope,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Icrbi => "icrbi",
            Algorithm::MaxTask => "maxtask",
            Algorithm::MinPw => "minpw",
            Algorithm::Decentral => "decentral",
            Algorithm::NonCope => "noncope",
        }
    }

    pub fn is_cooperative(&self) -> bool {
        *self != Algorithm::NonCope
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    /// Edge-server CPU capacity (cycles/s).
    #[serde(rename = "f0_max")]
    F0Max,
    /// Number of tasks.
    #[serde(rename = "N")]
    Tasks,
    /// Unit power price.
    #[serde(rename = "w")]
    PowerPrice,
    /// Base penalty.
    #[serde(rename = "phi0")]
    Penalty,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::F0Max => "f0_max",
            SweepVar::Tasks => "N",
            SweepVar::PowerPrice => "w",
            SweepVar::Penalty => "phi0",
        }
    }

    pub fn apply(&self, cfg: &mut GenConfig, value: f64) {
        match self {
            SweepVar::F0Max => cfg.f0_max = value,
            SweepVar::Tasks => cfg.n_tasks = value.round() as usize,
            SweepVar::PowerPrice => cfg.power_price = value,
            SweepVar::Penalty => cfg.phi0 = value,
        }
    }

    pub fn current(&self, cfg: &GenConfig) -> f64 {
        match self {
            SweepVar::F0Max => cfg.f0_max,
            SweepVar::Tasks => cfg.n_tasks as f64,
            SweepVar::PowerPrice => cfg.power_price,
            SweepVar::Penalty => cfg.phi0,
        }
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "f0_max" | "f0" => Ok(SweepVar::F0Max),
            "N" | "n" | "n_tasks" => Ok(SweepVar::Tasks),
            "w" | "power_price" => Ok(SweepVar::PowerPrice),
            "phi0" | "phi" => Ok(SweepVar::Penalty),
            _ => Err(Error::Config(format!(
                "unknown sweep variable `{s}` (expected f0_max, N, w or phi0)"
            ))),
        }
    }
}

/// A swept variable with its values, parsed from `var=v1,v2,...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl Sweep {
    /// A single-point sweep at the base configuration's current value.
    pub fn fixed(var: SweepVar, cfg: &GenConfig) -> Self {
        Self {
            var,
            values: vec![var.current(cfg)],
        }
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (var, values) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("bad sweep `{s}`, expected var=v1,v2,...")))?;
        let var: SweepVar = var.parse()?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad sweep value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { var, values })
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub algorithms: Vec<Algorithm>,
    pub base: GenConfig,
    pub sweep: Sweep,
    pub realizations: usize,
    /// Realization `r` uses seed `seed_base + r` at every sweep value.
    pub seed_base: u64,
    pub icrbi: IcrbiOptions,
}

impl ExperimentSpec {
    pub fn new(base: GenConfig, sweep: Sweep, realizations: usize) -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            seed_base: base.seed,
            base,
            sweep,
            realizations,
            icrbi: IcrbiOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithm selected".into()));
        }
        if self.sweep.values.is_empty() || self.sweep.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep values must be strictly increasing".into()));
        }
        for &v in &self.sweep.values {
            let mut cfg = self.base.clone();
            self.sweep.var.apply(&mut cfg, v);
            cfg.validate()?;
        }
        Ok(())
    }

    /// Generator configuration of one sweep point and realization.
    pub fn config(&self, value: f64, realization: usize) -> GenConfig {
        let mut cfg = self.base.clone();
        self.sweep.var.apply(&mut cfg, value);
        cfg.seed = self.seed_base.wrapping_add(realization as u64);
        cfg
    }
}

/// Result of one algorithm on one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub assignment: Assignment,
    /// Signaling overhead, `None` for the baseline.
    pub overhead: Option<u64>,
    /// Solver iterations (matching steps or deferred-acceptance rounds for
    /// the combinatorial solvers).
    pub iterations: usize,
    pub converged: bool,
}

/// Runs one algorithm and checks the result against every constraint.
pub fn run_algorithm(scn: &Scenario, algo: Algorithm, opts: &IcrbiOptions) -> Result<Outcome> {
    let n = scn.n_tasks() as u64;
    let out = match algo {
        Algorithm::Icrbi => {
            let (assignment, iterations, converged) = match icrbi::solve(scn, opts) {
                Ok((a, t)) => (a, t.len(), true),
                Err(Error::NonConvergence(nc)) => (nc.best, nc.trace.len(), false),
                Err(e) => return Err(e),
            };
            let c = OverheadCounters {
                n,
                ..Default::default()
            };
            Outcome {
                assignment,
                overhead: Some(overhead(OverheadAlgorithm::Icrbi, &c)),
                iterations,
                converged,
            }
        }
        Algorithm::MaxTask | Algorithm::MinPw => {
            let crit = if algo == Algorithm::MaxTask {
                Criterion::MaxTask
            } else {
                Criterion::MinPw
            };
            let m = matching::run(scn, crit);
            let c = OverheadCounters {
                n,
                n_m: m.at_mec() as u64,
                n_h: m.helped() as u64,
                ..Default::default()
            };
            Outcome {
                overhead: Some(overhead(OverheadAlgorithm::Heuristic, &c)),
                iterations: m.trace.len() - 1,
                assignment: m.assignment,
                converged: true,
            }
        }
        Algorithm::Decentral => {
            let (assignment, log) = decentral::run(scn);
            Outcome {
                assignment,
                overhead: Some(overhead(OverheadAlgorithm::Decentral, &log.counters)),
                iterations: log.rounds,
                converged: true,
            }
        }
        Algorithm::NonCope => Outcome {
            assignment: oracle::non_cope(scn),
            overhead: None,
            iterations: 0,
            converged: true,
        },
    };
    let violations = validate_constraints(scn, &out.assignment);
    if !violations.is_empty() {
        return Err(Error::Harness(format!(
            "{algo} produced an infeasible assignment on seed {}: {}",
            scn.seed,
            Error::InfeasibleAssignment(violations)
        )));
    }
    Ok(out)
}

/// One algorithm on one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub sweep_value: f64,
    pub realization: usize,
    pub seed: u64,
    pub n_tasks: usize,
    pub total_cost: f64,
    pub reduced_cost: f64,
    pub accomplished: usize,
    /// Total consumption of all UEs, circuit power included (watts).
    pub ue_power: f64,
    pub overhead: Option<u64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Averages over all realizations of one algorithm at one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub algorithm: Algorithm,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub mean_cost: f64,
    pub mean_accomplished: f64,
    /// Mean accomplished count divided by the number of tasks.
    pub accomplished_ratio: f64,
    pub mean_ue_power: f64,
    pub mean_overhead: Option<f64>,
    pub realizations: usize,
    /// Runs whose dual iteration hit the iteration limit.
    pub nonconverged: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<MetricRow>,
    pub runs: Vec<RunRecord>,
}

/// Runs every algorithm on every realization of every sweep point.
/// Realizations run in parallel; results are gathered and summed in a fixed
/// order so the output does not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let jobs: Vec<(f64, usize)> = spec
        .sweep
        .values
        .iter()
        .flat_map(|&v| (0..spec.realizations).map(move |r| (v, r)))
        .collect();
    let per_job: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(value, r)| {
            let cfg = spec.config(value, r);
            let scn = generate(&cfg)?;
            let ue_count = scn.n_devices() - 1;
            spec.algorithms
                .iter()
                .map(|&algo| {
                    let out = run_algorithm(&scn, algo, &spec.icrbi)?;
                    let power = out.assignment.ue_power(&scn);
                    Ok(RunRecord {
                        algorithm: algo,
                        sweep_value: value,
                        realization: r,
                        seed: cfg.seed,
                        n_tasks: scn.n_tasks(),
                        total_cost: out.assignment.cost.total,
                        reduced_cost: out.assignment.cost.reduced,
                        accomplished: out.assignment.accomplished(),
                        ue_power: power[1..=ue_count].iter().sum(),
                        overhead: out.overhead,
                        iterations: out.iterations,
                        converged: out.converged,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let runs: Vec<RunRecord> = per_job.into_iter().flatten().collect();
    let rows = aggregate(spec, &runs);
    Ok(ExperimentResult { rows, runs })
}

/// Means per (sweep value, algorithm), summed in realization order.
pub fn aggregate(spec: &ExperimentSpec, runs: &[RunRecord]) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for &value in &spec.sweep.values {
        for &algo in &spec.algorithms {
            let sel: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.algorithm == algo && r.sweep_value == value)
                .collect();
            let count = sel.len();
            if count == 0 {
                continue;
            }
            let mean = |f: &dyn Fn(&RunRecord) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / count as f64;
            let mean_accomplished = mean(&|r| r.accomplished as f64);
            let ratio = mean(&|r| r.accomplished as f64 / r.n_tasks.max(1) as f64);
            let mean_overhead = sel
                .iter()
                .all(|r| r.overhead.is_some())
                .then(|| mean(&|r| r.overhead.unwrap_or(0) as f64));
            rows.push(MetricRow {
                algorithm: algo,
                sweep_var: spec.sweep.var.name().to_string(),
                sweep_value: value,
                mean_cost: mean(&|r| r.total_cost),
                mean_accomplished,
                accomplished_ratio: ratio,
                mean_ue_power: mean(&|r| r.ue_power),
                mean_overhead,
                realizations: count,
                nonconverged: sel.iter().filter(|r| !r.converged).count(),
            });
        }
    }
    rows
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_path(path)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'a ExperimentSpec,
}

/// Writes `metrics.csv`, `runs.csv` and the `metadata.toml` sidecar into
/// `dir`.
pub fn write_experiment(dir: &Path, spec: &ExperimentSpec, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("metrics.csv"), &result.rows)?;
    write_csv(&dir.join("runs.csv"), &result.runs)?;
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: spec,
    };
    fs::write(dir.join("metadata.toml"), toml::to_string(&meta)?)?;
    Ok(())
}

/// One point of a convergence series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub algorithm: Algorithm,
    /// Step rule for the dual iteration, empty otherwise.
    pub series: String,
    pub iteration: usize,
    /// Total cost of the current iterate (relaxed decisions for the dual
    /// iteration, partial matching otherwise).
    pub cost: f64,
    /// Total cost of the best feasible assignment so far.
    pub best_cost: f64,
}

/// Per-iteration cost series on a single scenario. The dual iteration is run
/// once per step rule; the combinatorial solvers once each. The baseline has
/// no iterations and is skipped.
pub fn convergence_trace(
    scn: &Scenario,
    algorithms: &[Algorithm],
    step_rules: &[StepRule],
    opts: &IcrbiOptions,
) -> Result<Vec<TracePoint>> {
    let constant: f64 = scn
        .tasks
        .iter()
        .enumerate()
        .map(|(k, t)| t.power_price * scn.devices[scn.home(k)].p_cir + t.penalty)
        .sum();
    let mut out = Vec::new();
    for &algo in algorithms {
        match algo {
            Algorithm::Icrbi => {
                for &rule in step_rules {
                    let o = IcrbiOptions {
                        step_rule: rule,
                        ..*opts
                    };
                    let trace = match icrbi::solve(scn, &o) {
                        Ok((_, t)) => t,
                        Err(Error::NonConvergence(nc)) => nc.trace,
                        Err(e) => return Err(e),
                    };
                    out.extend(trace.records.iter().map(|r| TracePoint {
                        algorithm: algo,
                        series: rule.to_string(),
                        iteration: r.iteration,
                        cost: r.reduced_cost + constant,
                        best_cost: r.best_cost + constant,
                    }));
                }
            }
            Algorithm::MaxTask | Algorithm::MinPw => {
                let crit = if algo == Algorithm::MaxTask {
                    Criterion::MaxTask
                } else {
                    Criterion::MinPw
                };
                let m = matching::run(scn, crit);
                let mut best = f64::INFINITY;
                out.extend(m.trace.iter().map(|s| {
                    best = best.min(s.system_cost);
                    TracePoint {
                        algorithm: algo,
                        series: String::new(),
                        iteration: s.iteration,
                        cost: s.system_cost,
                        best_cost: best,
                    }
                }));
            }
            Algorithm::Decentral => {
                let (_, log) = decentral::run(scn);
                let mut best = f64::INFINITY;
                out.extend(log.costs.iter().enumerate().map(|(i, &c)| {
                    best = best.min(c);
                    TracePoint {
                        algorithm: algo,
                        series: String::new(),
                        iteration: i,
                        cost: c,
                        best_cost: best,
                    }
                }));
            }
            Algorithm::NonCope => {}
        }
    }
    Ok(out)
}

/// Writes trace points as CSV with header
/// `algorithm,series,iteration,cost,best_cost`.
pub fn write_trace(path: &Path, points: &[TracePoint]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_csv(path, points)
}

/// Cost of every algorithm next to the exhaustive optimum on one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub cost: f64,
    pub optimum: f64,
    /// `(cost - optimum) / optimum`.
    pub gap: f64,
}

/// Compares every algorithm with [`oracle::brute_force`] on `realizations`
/// small scenarios generated from `base` with seeds `seed_base + r`.
pub fn oracle_check(
    base: &GenConfig,
    algorithms: &[Algorithm],
    realizations: usize,
    seed_base: u64,
    grid_points: usize,
    opts: &IcrbiOptions,
) -> Result<Vec<OracleRow>> {
    let rows: Vec<Vec<OracleRow>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let mut cfg = base.clone();
            cfg.seed = seed_base.wrapping_add(r as u64);
            let scn = generate(&cfg)?;
            let opt = oracle::brute_force(&scn, grid_points)?.assignment.cost.total;
            algorithms
                .iter()
                .map(|&algo| {
                    let cost = run_algorithm(&scn, algo, opts)?.assignment.cost.total;
                    Ok(OracleRow {
                        seed: cfg.seed,
                        algorithm: algo,
                        cost,
                        optimum: opt,
                        gap: (cost - opt) / opt,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_oracle(path: &Path, rows: &[OracleRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_csv(path, rows)
}
