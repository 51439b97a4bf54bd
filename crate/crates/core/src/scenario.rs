//! Reproducible random instances: a square cell with the access point (and
//! its edge server) in the center and UEs dropped uniformly at random.
//!
//! Defaults follow the usual desk-scale setup: 2 MHz links, -174 dBm/Hz
//! noise density, `kappa = 1e-27`, `nu = 3`, 100 mW circuit power, budgets
//! uniform in 20-50 dBm, tasks of 0.1-0.5 Mbit, 1e4-1.5e8 cycles and 20-50 ms
//! deadlines, UE CPUs at 0.5-1.5 GHz.
//!
//! The channel follows the log-distance law `h = ref_gain * d^-alpha`
//! (`d` in meters, `ref_gain` the gain at 1 m) with optional unit-mean
//! exponential (Rayleigh power) fading. Distances are floored at the 1 m
//! reference distance.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeviceProfile, Scenario, TaskSpec, MEC};

/// Scenario file format tag and version written by [`save_scenario`].
pub const SCENARIO_FORMAT: &str = "coopmec-scenario";
pub const SCENARIO_VERSION: u32 = 1;

/// Generator configuration. Stored on disk as a flat `key = value` file
/// (TOML); missing keys take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_tasks: usize,
    /// Edge-server CPU capacity (cycles/s).
    pub f0_max: f64,
    pub p_max_dbm_min: f64,
    pub p_max_dbm_max: f64,
    pub bits_min: f64,
    pub bits_max: f64,
    pub cycles_min: f64,
    pub cycles_max: f64,
    pub deadline_min: f64,
    pub deadline_max: f64,
    pub f_ue_min: f64,
    pub f_ue_max: f64,
    /// Minimum penalty; penalties are uniform in `[phi0, phi0 + phi_spread]`.
    pub phi0: f64,
    pub phi_spread: f64,
    /// Price per watt, shared by all UEs.
    pub power_price: f64,
    pub eta: f64,
    pub kappa: f64,
    pub nu: f64,
    pub p_cir: f64,
    pub bandwidth: f64,
    pub noise_dbm_per_hz: f64,
    /// Side of the square cell in meters.
    pub cell_side: f64,
    pub pathloss_exponent: f64,
    /// Channel power gain at the 1 m reference distance.
    pub ref_gain: f64,
    pub fading: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_tasks: 10,
            f0_max: 5e9,
            p_max_dbm_min: 20.0,
            p_max_dbm_max: 50.0,
            bits_min: 0.1e6,
            bits_max: 0.5e6,
            cycles_min: 1e4,
            cycles_max: 15e7,
            deadline_min: 0.020,
            deadline_max: 0.050,
            f_ue_min: 0.5e9,
            f_ue_max: 1.5e9,
            phi0: 40.0,
            phi_spread: 10.0,
            power_price: 1.0,
            eta: 0.5,
            kappa: 1e-27,
            nu: 3.0,
            p_cir: 0.1,
            bandwidth: 2e6,
            noise_dbm_per_hz: -174.0,
            cell_side: 1000.0,
            pathloss_exponent: 3.5,
            ref_gain: 1e-3,
            fading: true,
            seed: 0,
        }
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl GenConfig {
    /// Noise power over one link: density times bandwidth, in watts.
    pub fn noise_power(&self) -> f64 {
        10f64.powf(self.noise_dbm_per_hz / 10.0) * 1e-3 * self.bandwidth
    }

    pub fn validate(&self) -> Result<()> {
        let positive_ranges = [
            ("bits", self.bits_min, self.bits_max),
            ("cycles", self.cycles_min, self.cycles_max),
            ("deadline", self.deadline_min, self.deadline_max),
            ("f_ue", self.f_ue_min, self.f_ue_max),
        ];
        for (name, lo, hi) in positive_ranges {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} range [{lo}, {hi}] must be nonempty and positive"
                )));
            }
        }
        if !(self.p_max_dbm_min <= self.p_max_dbm_max && self.p_max_dbm_max.is_finite()) {
            return Err(Error::Config("p_max_dbm range is empty".into()));
        }
        if dbm_to_watts(self.p_max_dbm_min) < self.p_cir {
            return Err(Error::Config(
                "p_max_dbm_min must leave a positive budget above p_cir".into(),
            ));
        }
        let checks = [
            (self.n_tasks >= 1, "n_tasks must be at least 1"),
            (self.f0_max > 0.0, "f0_max must be positive"),
            (self.phi0 >= 0.0 && self.phi_spread >= 0.0, "penalties must be nonnegative"),
            (self.power_price >= 0.0, "power_price must be nonnegative"),
            (self.eta > 0.0 && self.eta < 1.0, "eta must lie in (0, 1)"),
            (self.kappa >= 0.0, "kappa must be nonnegative"),
            (self.nu >= 1.0, "nu must be at least 1"),
            (self.p_cir >= 0.0, "p_cir must be nonnegative"),
            (self.bandwidth > 0.0, "bandwidth must be positive"),
            (self.noise_dbm_per_hz.is_finite(), "noise density must be finite"),
            (self.cell_side > 0.0, "cell_side must be positive"),
            (self.pathloss_exponent > 0.0, "pathloss_exponent must be positive"),
            (self.ref_gain > 0.0 && self.ref_gain.is_finite(), "ref_gain must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.into()));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: GenConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

/// Uniform draw on `(lo, hi]`; returns `lo` for a degenerate interval.
fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * (1.0 - u)
}

/// Draws a scenario. The same configuration (including `seed`) always yields
/// a bit-identical result.
pub fn generate(cfg: &GenConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_tasks;
    let center = [cfg.cell_side / 2.0, cfg.cell_side / 2.0];

    let mut devices = Vec::with_capacity(n + 1);
    devices.push(DeviceProfile {
        id: MEC,
        f_max: cfg.f0_max,
        kappa: 0.0,
        nu: cfg.nu,
        eta: cfg.eta,
        p_max: 0.0,
        p_cir: 0.0,
        position: center,
    });
    let mut tasks = Vec::with_capacity(n);
    for k in 0..n {
        let position = [
            uniform(&mut rng, 0.0, cfg.cell_side),
            uniform(&mut rng, 0.0, cfg.cell_side),
        ];
        let p_max = dbm_to_watts(uniform(&mut rng, cfg.p_max_dbm_min, cfg.p_max_dbm_max));
        let f_max = uniform(&mut rng, cfg.f_ue_min, cfg.f_ue_max);
        devices.push(DeviceProfile {
            id: k + 1,
            f_max,
            kappa: cfg.kappa,
            nu: cfg.nu,
            eta: cfg.eta,
            p_max,
            p_cir: cfg.p_cir,
            position,
        });
        tasks.push(TaskSpec {
            id: k + 1,
            cycles: uniform(&mut rng, cfg.cycles_min, cfg.cycles_max),
            bits: uniform(&mut rng, cfg.bits_min, cfg.bits_max),
            deadline: uniform(&mut rng, cfg.deadline_min, cfg.deadline_max),
            penalty: uniform(&mut rng, cfg.phi0, cfg.phi0 + cfg.phi_spread),
            power_price: cfg.power_price,
        });
    }

    let mut gains = vec![vec![0.0; n + 1]; n];
    for k in 0..n {
        let from = devices[k + 1].position;
        for d in 0..=n {
            if d == k + 1 {
                continue;
            }
            let to = devices[d].position;
            let dist = ((from[0] - to[0]).powi(2) + (from[1] - to[1]).powi(2))
                .sqrt()
                .max(1.0);
            let mut g = cfg.ref_gain * dist.powf(-cfg.pathloss_exponent);
            if cfg.fading {
                let fade: f64 = Exp1.sample(&mut rng);
                g *= fade.max(f64::MIN_POSITIVE);
            }
            gains[k][d] = g;
        }
    }

    let scn = Scenario {
        tasks,
        devices,
        gains,
        bandwidth: cfg.bandwidth,
        noise_power: cfg.noise_power(),
        seed: cfg.seed,
    };
    scn.validate()?;
    Ok(scn)
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    scenario: Scenario,
}

/// Serializes a scenario as JSON. Field order: `format`, `version`, `tasks`,
/// `devices`, `gains`, `bandwidth`, `noise_power`, `seed`.
pub fn scenario_to_json(scn: &Scenario) -> Result<String> {
    let file = ScenarioFile {
        format: SCENARIO_FORMAT.into(),
        version: SCENARIO_VERSION,
        scenario: scn.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn scenario_from_json(s: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(s)?;
    if file.format != SCENARIO_FORMAT || file.version != SCENARIO_VERSION {
        return Err(Error::Scenario(format!(
            "unsupported scenario file {} v{}",
            file.format, file.version
        )));
    }
    file.scenario.validate()?;
    Ok(file.scenario)
}

pub fn save_scenario(scn: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, scenario_to_json(scn)?)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    scenario_from_json(&fs::read_to_string(path)?)
}
