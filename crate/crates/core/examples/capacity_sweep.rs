//! Mean cost and accomplished ratio of every algorithm as the edge server
//! grows, written as CSV files into a temporary directory.

use coopmec::harness::{run_experiment, write_experiment, ExperimentSpec, Sweep, SweepVar};
use coopmec::scenario::GenConfig;

fn main() -> coopmec::Result<()> {
    let spec = ExperimentSpec::new(
        GenConfig::default(),
        Sweep {
            var: SweepVar::F0Max,
            values: vec![5e9, 6e9, 7e9, 8e9],
        },
        50,
    );
    let res = run_experiment(&spec)?;
    println!("{:>10} {:>8} {:>10} {:>8} {:>10}", "algorithm", "f0", "cost", "ratio", "overhead");
    for r in &res.rows {
        println!(
            "{:>10} {:>8.1e} {:>10.3} {:>8.3} {:>10}",
            r.algorithm.name(),
            r.sweep_value,
            r.mean_cost,
            r.accomplished_ratio,
            r.mean_overhead.map_or("-".to_string(), |o| format!("{o:.1}"))
        );
    }
    let dir = std::env::temp_dir().join("coopmec-capacity-sweep");
    write_experiment(&dir, &spec, &res)?;
    println!("wrote {}", dir.display());
    Ok(())
}
