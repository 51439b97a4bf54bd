#![allow(dead_code)]

use coopmec::model::{DeviceProfile, Scenario, TaskSpec};
use coopmec::scenario::{generate, GenConfig};

/// Hand-built instance: `n` identical tasks, an edge server with `f0` cycles/s
/// and UEs with `f_ue` cycles/s, all links at the same gain.
pub fn uniform_scenario(n: usize, cycles: f64, f_ue: f64, f0: f64) -> Scenario {
    let tasks = (0..n)
        .map(|k| TaskSpec {
            id: k + 1,
            cycles,
            bits: 2e5,
            deadline: 0.03,
            penalty: 40.0,
            power_price: 1.0,
        })
        .collect();
    let mut devices = vec![DeviceProfile {
        id: 0,
        f_max: f0,
        kappa: 0.0,
        nu: 3.0,
        eta: 0.5,
        p_max: 0.0,
        p_cir: 0.0,
        position: [0.0; 2],
    }];
    for d in 1..=n {
        devices.push(DeviceProfile {
            id: d,
            f_max: f_ue,
            kappa: 1e-27,
            nu: 3.0,
            eta: 0.5,
            p_max: 1.0,
            p_cir: 0.1,
            position: [0.0; 2],
        });
    }
    Scenario {
        tasks,
        devices,
        gains: vec![vec![1e-10; n + 1]; n],
        bandwidth: 2e6,
        noise_power: 7.96e-15,
        seed: 0,
    }
}

pub fn config(n: usize, seed: u64) -> GenConfig {
    GenConfig {
        n_tasks: n,
        seed,
        ..GenConfig::default()
    }
}

/// Default-parameter scenario with `n` tasks.
pub fn seeded(n: usize, seed: u64) -> Scenario {
    generate(&config(n, seed)).expect("default config generates")
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, c) = xs.into_iter().fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    s / c as f64
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
