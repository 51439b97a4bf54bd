//! Domain types and the closed-form system model.
//!
//! Indexing convention used throughout the crate:
//!
//! * tasks are stored 0-based; task `k` carries `id = k + 1` and is owned by
//!   the UE with device index `k + 1`;
//! * devices are indexed `0..=N`, where device [`MEC`] (index 0) is the edge
//!   server and device `d >= 1` is the UE owning task `d - 1`.
//!
//! The channel-gain matrix is `N x (N + 1)`: `gains[k][d]` is the gain from
//! the owner of task `k` to device `d`. The entry `gains[k][k + 1]` (a UE to
//! itself) is never read.

mod bounds;
mod cost;
mod power;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bounds::{feasibility_bounds, FeasibilityBounds};
pub use cost::{
    evaluate_assignment, validate_constraints, Assignment, CostBreakdown, Placement, Violation,
};
pub use power::{
    power_derivatives, transmit_power, LinkObjective, TransmitCurve, EXPONENT_SATURATION,
};

/// Device index of the edge server.
pub const MEC: usize = 0;

/// One UE's computation task together with the prices attached to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// 1-based task id (equal to the owner's device index).
    pub id: usize,
    /// Required CPU cycles `F`.
    pub cycles: f64,
    /// Input data size `D` in bits.
    pub bits: f64,
    /// Latency bound `T_max` in seconds.
    pub deadline: f64,
    /// Penalty charged when the task is not accomplished.
    pub penalty: f64,
    /// Price per watt consumed by the owning UE.
    pub power_price: f64,
}

impl TaskSpec {
    /// Slowest frequency that still meets the deadline with zero transfer time.
    pub fn f_min(&self) -> f64 {
        self.cycles / self.deadline
    }

    fn check(&self) -> Result<()> {
        let ok = self.cycles > 0.0
            && self.bits > 0.0
            && self.deadline > 0.0
            && self.penalty >= 0.0
            && self.power_price >= 0.0
            && self.f_min().is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario(format!("task {} has invalid parameters", self.id)))
        }
    }
}

/// Compute and power parameters of a device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    /// Device index (0 is the edge server).
    pub id: usize,
    /// CPU capacity in cycles/s.
    pub f_max: f64,
    /// Effective switched capacitance.
    pub kappa: f64,
    /// Computing-power exponent.
    pub nu: f64,
    /// Power-amplifier efficiency in `(0, 1)`.
    pub eta: f64,
    /// Power budget in watts (ignored for the edge server).
    pub p_max: f64,
    /// Static circuit power in watts.
    pub p_cir: f64,
    /// Position in meters.
    pub position: [f64; 2],
}

impl DeviceProfile {
    /// Dynamic power budget `p_max - p_cir`.
    pub fn p_m(&self) -> f64 {
        self.p_max - self.p_cir
    }

    /// Dynamic computing power at frequency `f`.
    pub fn compute_power(&self, f: f64) -> f64 {
        self.kappa * f.powf(self.nu)
    }

    /// Frequency at which computing alone drains `budget` watts.
    pub fn power_limited_freq(&self, budget: f64) -> f64 {
        if budget <= 0.0 {
            0.0
        } else if self.kappa <= 0.0 {
            f64::INFINITY
        } else {
            (budget / self.kappa).powf(1.0 / self.nu)
        }
    }

    fn check(&self) -> Result<()> {
        let mut ok = self.f_max > 0.0 && self.kappa >= 0.0 && self.nu >= 1.0;
        if self.id != MEC {
            ok &= self.eta > 0.0 && self.eta < 1.0 && self.p_m() > 0.0;
        }
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario(format!("device {} has invalid parameters", self.id)))
        }
    }
}

/// Additive white Gaussian noise link parameters seen by one transmitter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub gain: f64,
    pub bandwidth: f64,
    pub noise_power: f64,
}

/// A complete problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tasks: Vec<TaskSpec>,
    pub devices: Vec<DeviceProfile>,
    /// `gains[k][d]`: linear channel gain from the owner of task `k` to device `d`.
    pub gains: Vec<Vec<f64>>,
    /// Per-link bandwidth in Hz.
    pub bandwidth: f64,
    /// Noise power in watts.
    pub noise_power: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    /// Device index of the UE that owns `task`.
    pub fn home(&self, task: usize) -> usize {
        task + 1
    }

    /// Task owned by `device`, if the device is a UE.
    pub fn owned_task(&self, device: usize) -> Option<usize> {
        device.checked_sub(1)
    }

    /// Power price of a UE device (zero for the edge server).
    pub fn device_price(&self, device: usize) -> f64 {
        self.owned_task(device)
            .map_or(0.0, |k| self.tasks[k].power_price)
    }

    pub fn link(&self, task: usize, device: usize) -> Link {
        Link {
            gain: self.gains[task][device],
            bandwidth: self.bandwidth,
            noise_power: self.noise_power,
        }
    }

    /// Transmit-power curve of `task` towards `device`.
    pub fn curve(&self, task: usize, device: usize) -> TransmitCurve {
        TransmitCurve::new(&self.tasks[task], self.link(task, device))
    }

    /// Owner-side PA efficiency for `task`.
    pub fn eta(&self, task: usize) -> f64 {
        self.devices[self.home(task)].eta
    }

    /// Checks the structural invariants of the instance.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_tasks();
        if self.devices.len() != n + 1 {
            return Err(Error::Scenario(format!(
                "expected {} devices for {} tasks, got {}",
                n + 1,
                n,
                self.devices.len()
            )));
        }
        if !(self.bandwidth > 0.0 && self.noise_power > 0.0) {
            return Err(Error::Scenario("bandwidth and noise power must be positive".into()));
        }
        for (k, t) in self.tasks.iter().enumerate() {
            if t.id != k + 1 {
                return Err(Error::Scenario(format!("task at index {k} has id {}", t.id)));
            }
            t.check()?;
        }
        for (d, dev) in self.devices.iter().enumerate() {
            if dev.id != d {
                return Err(Error::Scenario(format!("device at index {d} has id {}", dev.id)));
            }
            dev.check()?;
        }
        if self.gains.len() != n {
            return Err(Error::Scenario("gain matrix must have one row per task".into()));
        }
        for (k, row) in self.gains.iter().enumerate() {
            if row.len() != n + 1 {
                return Err(Error::Scenario(format!("gain row {k} must have {} entries", n + 1)));
            }
            for (d, &g) in row.iter().enumerate() {
                if d != self.home(k) && !(g > 0.0 && g.is_finite()) {
                    return Err(Error::Scenario(format!("gain[{k}][{d}] must be positive")));
                }
            }
        }
        Ok(())
    }
}

/// Relative slack absorbed by the constraint checks.
pub const REL_TOL: f64 = 1e-9;
