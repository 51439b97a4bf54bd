//! Dual-subgradient solver on one scenario under both step-size rules.

use coopmec::icrbi::{solve, IcrbiOptions, StepRule};
use coopmec::scenario::{generate, GenConfig};

fn main() -> coopmec::Result<()> {
    let scn = generate(&GenConfig {
        n_tasks: 30,
        seed: 3,
        ..GenConfig::default()
    })?;
    for rule in [StepRule::Diminish(0.1), StepRule::SquareSummable(0.1)] {
        let opts = IcrbiOptions {
            step_rule: rule,
            ..IcrbiOptions::default()
        };
        let (a, trace) = solve(&scn, &opts)?;
        println!(
            "{rule}: {} iterations, {:?}, total cost {:.3}, {} of {} tasks accomplished",
            trace.len(),
            trace.termination,
            a.cost.total,
            a.accomplished(),
            scn.n_tasks()
        );
        for r in trace.records.iter().step_by((trace.len() / 8).max(1)) {
            println!(
                "  iter {:>4} relaxed {:>10.3} best {:>10.3} assigned {:>2}",
                r.iteration, r.reduced_cost, r.best_cost, r.num_assigned
            );
        }
    }
    Ok(())
}
