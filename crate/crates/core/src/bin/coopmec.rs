use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coopmec::harness::{
    convergence_trace, oracle_check, run_experiment, write_experiment, write_oracle, write_trace,
    Algorithm, ExperimentSpec, Sweep, SweepVar,
};
use coopmec::icrbi::{IcrbiOptions, StepRule};
use coopmec::oracle::DEFAULT_GRID_POINTS;
use coopmec::scenario::{generate, save_scenario, GenConfig};

#[derive(Parser)]
#[command(version, about = "Cooperative MEC task offloading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario generator configuration (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; realization r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DualArgs {
    /// Dual step rule: diminish:<x> or square:<x>.
    #[arg(long = "step-rule", default_value = "diminish:0.1")]
    step_rule: Vec<StepRule>,
    /// Absolute stopping tolerance of the dual iteration.
    #[arg(long)]
    eps: Option<f64>,
}

impl DualArgs {
    fn options(&self) -> IcrbiOptions {
        IcrbiOptions {
            step_rule: self.step_rule[0],
            eps: self.eps,
            ..IcrbiOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate one scenario and write it as JSON.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo sweep: writes metrics.csv, runs.csv and metadata.toml.
    Run {
        #[command(flatten)]
        common: Common,
        /// Algorithms to run (comma separated); all by default.
        #[arg(long, value_delimiter = ',')]
        algo: Vec<Algorithm>,
        /// Swept variable and values, e.g. f0_max=5e9,6e9,7e9.
        #[arg(long)]
        sweep: Option<Sweep>,
        #[arg(long, default_value_t = 100)]
        realizations: usize,
        #[command(flatten)]
        dual: DualArgs,
    },
    /// Per-iteration cost series on one scenario; writes trace.csv.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        algo: Vec<Algorithm>,
        #[command(flatten)]
        dual: DualArgs,
    },
    /// Compare algorithms against exhaustive search on small scenarios.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        algo: Vec<Algorithm>,
        #[arg(long, default_value_t = 20)]
        realizations: usize,
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid_points: usize,
        #[command(flatten)]
        dual: DualArgs,
    },
}

fn load_config(common: &Common) -> coopmec::Result<GenConfig> {
    let mut cfg = match &common.config {
        Some(p) => GenConfig::load(p)?,
        None => GenConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn or_all(algo: Vec<Algorithm>) -> Vec<Algorithm> {
    if algo.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        algo
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> coopmec::Result<()> {
    match cli.command {
        Command::Gen { common } => {
            let cfg = load_config(&common)?;
            let scn = generate(&cfg)?;
            let path = if common.out.extension().is_some() {
                common.out
            } else {
                std::fs::create_dir_all(&common.out)?;
                common.out.join(format!("scenario-{}.json", cfg.seed))
            };
            save_scenario(&scn, &path)?;
            println!("wrote {}", path.display());
        }
        Command::Run {
            common,
            algo,
            sweep,
            realizations,
            dual,
        } => {
            let cfg = load_config(&common)?;
            let sweep = sweep.unwrap_or_else(|| Sweep::fixed(SweepVar::F0Max, &cfg));
            let mut spec = ExperimentSpec::new(cfg, sweep, realizations);
            spec.algorithms = or_all(algo);
            spec.icrbi = dual.options();
            let result = run_experiment(&spec)?;
            write_experiment(&common.out, &spec, &result)?;
            println!(
                "{:<10} {:>12} {:>12} {:>8} {:>10}",
                "algorithm", spec.sweep.var.name(), "mean_cost", "ratio", "ue_power"
            );
            for r in &result.rows {
                println!(
                    "{:<10} {:>12.4e} {:>12.4} {:>8.4} {:>10.4}",
                    r.algorithm.name(),
                    r.sweep_value,
                    r.mean_cost,
                    r.accomplished_ratio,
                    r.mean_ue_power
                );
            }
            let nc: usize = result.rows.iter().map(|r| r.nonconverged).sum();
            if nc > 0 {
                eprintln!("warning: {nc} dual runs hit the iteration limit");
            }
            println!("wrote {}", common.out.display());
        }
        Command::Trace { common, algo, dual } => {
            let cfg = load_config(&common)?;
            let scn = generate(&cfg)?;
            let points = convergence_trace(&scn, &or_all(algo), &dual.step_rule, &dual.options())?;
            let path = common.out.join("trace.csv");
            write_trace(&path, &points)?;
            println!("wrote {} ({} points)", path.display(), points.len());
        }
        Command::OracleCheck {
            common,
            algo,
            realizations,
            grid_points,
            dual,
        } => {
            let mut cfg = load_config(&common)?;
            if common.config.is_none() {
                cfg.n_tasks = 3;
            }
            let algos = or_all(algo);
            let rows = oracle_check(&cfg, &algos, realizations, cfg.seed, grid_points, &dual.options())?;
            for a in &algos {
                let gaps: Vec<f64> = rows.iter().filter(|r| r.algorithm == *a).map(|r| r.gap).collect();
                let mean = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
                let worst = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let below = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
                println!(
                    "{:<10} mean gap {:>8.4}%  worst {:>8.4}%  min {:>8.4}%",
                    a.name(),
                    100.0 * mean,
                    100.0 * worst,
                    100.0 * below
                );
            }
            let path = common.out.join("oracle.csv");
            write_oracle(&path, &rows)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
