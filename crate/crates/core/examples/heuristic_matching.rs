//! Heuristic matching under both ordering criteria, step by step.

use coopmec::matching::{run, Criterion};
use coopmec::scenario::{generate, GenConfig};

fn main() -> coopmec::Result<()> {
    // Heterogeneous UEs in a small cell with a modest edge server, so that
    // some tasks can only be served by a neighbour.
    let scn = generate(&GenConfig {
        n_tasks: 15,
        cell_side: 200.0,
        cycles_max: 6e7,
        f_ue_min: 0.2e9,
        f_ue_max: 3e9,
        f0_max: 2e9,
        seed: 86,
        ..GenConfig::default()
    })?;
    for criterion in [Criterion::MaxTask, Criterion::MinPw] {
        let out = run(&scn, criterion);
        println!(
            "{criterion:?}: {} seeded locally, {} on the edge server, total cost {:.3}",
            out.local,
            out.at_mec(),
            out.assignment.cost.total
        );
        for s in &out.trace[1..] {
            println!(
                "  step {:>2}: task {:>2} -> device {:>2}, pair cost {:>8.3}, system {:>9.3}",
                s.iteration,
                s.task + 1,
                s.device,
                s.cost,
                s.system_cost
            );
        }
    }
    Ok(())
}
