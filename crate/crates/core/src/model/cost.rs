use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Scenario, MEC, REL_TOL};
use crate::error::{Error, Result};

/// Where and how fast one task runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub device: usize,
    /// Serving frequency in cycles/s.
    pub freq: f64,
    /// Transmit power in watts (zero for local execution).
    pub tx_power: f64,
}

/// Cost terms of the total system cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub transmit: f64,
    pub compute: f64,
    pub circuit: f64,
    pub penalty: f64,
    pub total: f64,
    /// `total` minus the assignment-independent constant
    /// `sum(w p_cir) + sum(phi)`.
    pub reduced: f64,
}

/// An offloading decision for every task plus its cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `placements[k]` is `None` when task `k` is not accomplished.
    pub placements: Vec<Option<Placement>>,
    pub cost: CostBreakdown,
}

impl Assignment {
    /// Every task left unaccomplished.
    pub fn unassigned(scn: &Scenario) -> Self {
        Self::from_decisions(scn, &vec![None; scn.n_tasks()])
    }

    /// Builds an assignment from `(device, frequency)` decisions, setting each
    /// offloaded task's transmit power to the delay-tight value `U(f)`.
    /// Frequencies at or below `F/T` get an infinite transmit power so the
    /// validator rejects them.
    pub fn from_decisions(scn: &Scenario, decisions: &[Option<(usize, f64)>]) -> Self {
        let placements: Vec<Option<Placement>> = decisions
            .iter()
            .enumerate()
            .map(|(k, d)| {
                d.map(|(device, freq)| {
                    let tx_power = if device == scn.home(k) || device >= scn.n_devices() {
                        0.0
                    } else {
                        scn.curve(k, device).power(freq).unwrap_or(f64::INFINITY)
                    };
                    Placement {
                        device,
                        freq,
                        tx_power,
                    }
                })
            })
            .collect();
        let cost = cost_of(scn, &placements);
        Self { placements, cost }
    }

    pub fn decisions(&self) -> Vec<Option<(usize, f64)>> {
        self.placements
            .iter()
            .map(|p| p.map(|p| (p.device, p.freq)))
            .collect()
    }

    pub fn device_of(&self, task: usize) -> Option<usize> {
        self.placements[task].map(|p| p.device)
    }

    pub fn accomplished(&self) -> usize {
        self.placements.iter().filter(|p| p.is_some()).count()
    }

    /// Total consumption of every UE (computing + PA + circuit), indexed by
    /// device; entry 0 (the edge server) is zero.
    pub fn ue_power(&self, scn: &Scenario) -> Vec<f64> {
        let mut power = vec![0.0; scn.n_devices()];
        for d in 1..scn.n_devices() {
            power[d] = scn.devices[d].p_cir;
        }
        for (k, p) in self.placements.iter().enumerate() {
            let Some(p) = p else { continue };
            if p.device != MEC && p.device < scn.n_devices() {
                power[p.device] += scn.devices[p.device].compute_power(p.freq);
            }
            if p.device != scn.home(k) {
                power[scn.home(k)] += p.tx_power / scn.eta(k);
            }
        }
        power
    }
}

fn cost_of(scn: &Scenario, placements: &[Option<Placement>]) -> CostBreakdown {
    let mut c = CostBreakdown::default();
    let mut constant = 0.0;
    for (k, task) in scn.tasks.iter().enumerate() {
        let home = scn.home(k);
        c.circuit += task.power_price * scn.devices[home].p_cir;
        constant += task.power_price * scn.devices[home].p_cir + task.penalty;
        match placements[k] {
            None => c.penalty += task.penalty,
            Some(p) => {
                if p.device != home {
                    c.transmit += task.power_price / scn.eta(k) * p.tx_power;
                }
                if p.device != MEC && p.device < scn.n_devices() {
                    c.compute +=
                        scn.device_price(p.device) * scn.devices[p.device].compute_power(p.freq);
                }
            }
        }
    }
    c.total = c.transmit + c.compute + c.circuit + c.penalty;
    c.reduced = c.total - constant;
    c
}

/// A violated constraint with the ids involved and its (negative) slack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// C1: the decision itself is malformed (unknown device, non-positive
    /// frequency, negative power).
    InvalidDecision { task: usize, device: usize },
    /// C3: upload plus execution time exceeds the deadline.
    Deadline { task: usize, device: usize, slack: f64 },
    /// C4: hosted frequencies exceed the device's CPU capacity.
    Capacity { device: usize, slack: f64 },
    /// C5: a UE's dynamic power exceeds `p_max - p_cir`.
    Power { device: usize, slack: f64 },
}

impl Violation {
    pub fn constraint(&self) -> &'static str {
        match self {
            Violation::InvalidDecision { .. } => "C1",
            Violation::Deadline { .. } => "C3",
            Violation::Capacity { .. } => "C4",
            Violation::Power { .. } => "C5",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidDecision { task, device } => {
                write!(f, "C1 task {} -> device {device}: invalid decision", task + 1)
            }
            Violation::Deadline {
                task,
                device,
                slack,
            } => write!(f, "C3 task {} -> device {device}: slack {slack:e} s", task + 1),
            Violation::Capacity { device, slack } => {
                write!(f, "C4 device {device}: slack {slack:e} cycles/s")
            }
            Violation::Power { device, slack } => write!(f, "C5 device {device}: slack {slack:e} W"),
        }
    }
}

/// Checks C1-C5. The deadline is checked as `D/r + F/f <= T (1 + 1e-9)`
/// using the stored transmit power; capacity and power allow the same
/// relative slack.
pub fn validate_constraints(scn: &Scenario, a: &Assignment) -> Vec<Violation> {
    let n_dev = scn.n_devices();
    let mut out = Vec::new();
    let mut load = vec![0.0; n_dev];
    let mut power = vec![0.0; n_dev];

    for (k, p) in a.placements.iter().enumerate() {
        let Some(p) = *p else { continue };
        let task = &scn.tasks[k];
        let home = scn.home(k);
        let malformed = p.device >= n_dev
            || !(p.freq > 0.0)
            || p.freq.is_nan()
            || !(p.tx_power >= 0.0)
            || (p.device == home && p.tx_power != 0.0);
        if malformed {
            out.push(Violation::InvalidDecision {
                task: k,
                device: p.device,
            });
            continue;
        }
        let compute_time = task.cycles / p.freq;
        let elapsed = if p.device == home {
            compute_time
        } else {
            let r = scn.curve(k, p.device).rate(p.tx_power);
            task.bits / r + compute_time
        };
        if !(elapsed <= task.deadline * (1.0 + REL_TOL)) {
            out.push(Violation::Deadline {
                task: k,
                device: p.device,
                slack: task.deadline - elapsed,
            });
        }
        load[p.device] += p.freq;
        if p.device != MEC {
            power[p.device] += scn.devices[p.device].compute_power(p.freq);
        }
        if p.device != home {
            power[home] += p.tx_power / scn.eta(k);
        }
    }

    for d in 0..n_dev {
        let dev = &scn.devices[d];
        if !(load[d] <= dev.f_max * (1.0 + REL_TOL)) {
            out.push(Violation::Capacity {
                device: d,
                slack: dev.f_max - load[d],
            });
        }
        if d != MEC && !(power[d] <= dev.p_m() * (1.0 + REL_TOL)) {
            out.push(Violation::Power {
                device: d,
                slack: dev.p_m() - power[d],
            });
        }
    }
    out
}

/// Exact system cost of `a` with every offloaded transmit power reset to the
/// delay-tight value `U(f)`. Fails with the full violation list when the
/// resulting assignment is infeasible.
pub fn evaluate_assignment(scn: &Scenario, a: &Assignment) -> Result<CostBreakdown> {
    let tight = Assignment::from_decisions(scn, &a.decisions());
    let violations = validate_constraints(scn, &tight);
    if violations.is_empty() {
        Ok(tight.cost)
    } else {
        Err(Error::InfeasibleAssignment(violations))
    }
}
