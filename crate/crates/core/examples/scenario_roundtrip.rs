//! Generator configuration and scenario files: write, read back, replay.

use coopmec::harness::{run_algorithm, Algorithm};
use coopmec::icrbi::IcrbiOptions;
use coopmec::scenario::{generate, load_scenario, save_scenario, GenConfig};

fn main() -> coopmec::Result<()> {
    let dir = std::env::temp_dir().join("coopmec-roundtrip");
    std::fs::create_dir_all(&dir)?;
    let cfg = GenConfig {
        n_tasks: 8,
        f0_max: 6e9,
        seed: 21,
        ..GenConfig::default()
    };
    cfg.save(dir.join("config.toml"))?;
    let cfg = GenConfig::load(dir.join("config.toml"))?;
    let scn = generate(&cfg)?;
    save_scenario(&scn, dir.join("scenario.json"))?;
    let replay = load_scenario(dir.join("scenario.json"))?;
    assert_eq!(scn, replay);

    let opts = IcrbiOptions::default();
    for algo in Algorithm::ALL {
        let a = run_algorithm(&scn, algo, &opts)?.assignment;
        let b = run_algorithm(&replay, algo, &opts)?.assignment;
        assert_eq!(a, b);
        println!("{:>10}: cost {:.3} on both copies", algo.name(), a.cost.total);
    }
    println!("files in {}", dir.display());
    Ok(())
}
