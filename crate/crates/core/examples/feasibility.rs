//! Static feasibility of every task/device pair in a generated scenario and
//! the constraint check of a deliberately overloaded assignment.

use coopmec::model::{feasibility_bounds, validate_constraints, Assignment, MEC};
use coopmec::scenario::{generate, GenConfig};

fn main() -> coopmec::Result<()> {
    let scn = generate(&GenConfig {
        n_tasks: 6,
        seed: 11,
        ..GenConfig::default()
    })?;
    let b = feasibility_bounds(&scn);
    for k in 0..scn.n_tasks() {
        let devices: Vec<String> = b
            .feasible_devices(k)
            .map(|d| format!("{d}[{:.2e},{:.2e}]", b.f_down[k][d], b.f_up[k][d]))
            .collect();
        println!(
            "task {} (home {}): {}",
            k + 1,
            scn.home(k),
            if devices.is_empty() { "nowhere".to_string() } else { devices.join(" ") }
        );
    }

    // Every task on the edge server at its largest frequency overloads it.
    let decisions: Vec<_> = (0..scn.n_tasks())
        .map(|k| b.is_feasible(k, MEC).then(|| (MEC, b.f_up[k][MEC])))
        .collect();
    let overloaded = Assignment::from_decisions(&scn, &decisions);
    for v in validate_constraints(&scn, &overloaded) {
        println!("violation: {v}");
    }
    Ok(())
}
