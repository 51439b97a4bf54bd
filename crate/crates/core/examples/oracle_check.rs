//! Every solver next to the exhaustive optimum on small instances.

use coopmec::harness::{oracle_check, Algorithm};
use coopmec::icrbi::IcrbiOptions;
use coopmec::oracle::DEFAULT_GRID_POINTS;
use coopmec::scenario::GenConfig;

fn main() -> coopmec::Result<()> {
    let base = GenConfig {
        n_tasks: 3,
        ..GenConfig::default()
    };
    let rows = oracle_check(
        &base,
        &Algorithm::ALL,
        20,
        0,
        DEFAULT_GRID_POINTS,
        &IcrbiOptions::default(),
    )?;
    for algo in Algorithm::ALL {
        let gaps: Vec<f64> = rows.iter().filter(|r| r.algorithm == algo).map(|r| r.gap).collect();
        let worst = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let optimal = gaps.iter().filter(|g| g.abs() < 1e-6).count();
        println!(
            "{:>10}: mean gap {:>7.3}%, worst {:>7.3}%, optimal on {optimal}/{}",
            algo.name(),
            100.0 * gaps.iter().sum::<f64>() / gaps.len() as f64,
            100.0 * worst,
            gaps.len()
        );
    }
    Ok(())
}
