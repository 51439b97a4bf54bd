//! Decentralized three-step algorithm: local seeding, edge admission and
//! deferred acceptance among the UEs, with its signaling overhead.

use coopmec::decentral::{overhead, run, OverheadAlgorithm};
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
    let (a, log) = run(&scn);
    println!(
        "{} rounds, {} of {} tasks accomplished, total cost {:.3}",
        log.rounds,
        a.accomplished(),
        scn.n_tasks(),
        a.cost.total
    );
    for e in &log.entries {
        println!(
            "  round {}: task {:>2} asks device {:>2} at {:.3e} Hz -> {:?}",
            e.round,
            e.task + 1,
            e.device,
            e.freq,
            e.verdict
        );
    }
    println!("cost after each stage: {:.3?}", log.costs);
    println!(
        "signaling messages: {}",
        overhead(OverheadAlgorithm::Decentral, &log.counters)
    );
    Ok(())
}
