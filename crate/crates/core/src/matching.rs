//! Many-to-one matching with externalities.
//!
//! Tasks that cannot run at home are matched one at a time to the head of a
//! dynamic preference list. Each match shrinks the host's residual frequency
//! and power (and the owner's residual power), so the lists are rebuilt after
//! every step.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, LinkObjective, Scenario, MEC, REL_TOL};

/// Remaining CPU frequency and dynamic power of every device.
#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    /// Residual frequency per device (cycles/s).
    pub f_res: Vec<f64>,
    /// Residual dynamic power per device (watts); entry 0 is unused.
    pub p_res: Vec<f64>,
}

/// Frequency window of a task on a device under the current residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairWindow {
    /// Delay-tight minimum frequency with the owner's residual power.
    pub lo: f64,
    /// Largest frequency the device can still offer.
    pub hi: f64,
}

impl Residuals {
    /// Full budgets: `f_max` everywhere and `p_max - p_cir` on every UE.
    pub fn full(scn: &Scenario) -> Self {
        Self {
            f_res: scn.devices.iter().map(|d| d.f_max).collect(),
            p_res: scn
                .devices
                .iter()
                .map(|d| if d.id == MEC { 0.0 } else { d.p_m() })
                .collect(),
        }
    }

    /// `[f_D, f_U]` of `task` on `device`, or `None` when the pair is
    /// infeasible (empty window or unreachable upload).
    pub fn window(&self, scn: &Scenario, task: usize, device: usize) -> Option<PairWindow> {
        let home = scn.home(task);
        let dev = &scn.devices[device];
        let hi = if device == MEC {
            self.f_res[MEC]
        } else {
            self.f_res[device].min(dev.power_limited_freq(self.p_res[device]))
        };
        let lo = if device == home {
            scn.tasks[task].f_min()
        } else {
            let budget = scn.eta(task) * self.p_res[home];
            if budget <= 0.0 {
                return None;
            }
            scn.curve(task, device).min_freq_for_power(budget)
        };
        (lo.is_finite() && lo < hi).then_some(PairWindow { lo, hi })
    }

    /// Whether `task` can run on `device` at exactly `freq` without exceeding
    /// any residual (up to the validator's relative tolerance).
    pub fn fits(&self, scn: &Scenario, task: usize, device: usize, freq: f64) -> bool {
        let home = scn.home(task);
        let dev = &scn.devices[device];
        if !(freq > 0.0) || freq > self.f_res[device] + REL_TOL * dev.f_max {
            return false;
        }
        let host_power = if device == MEC { 0.0 } else { dev.compute_power(freq) };
        if device == home {
            return freq >= scn.tasks[task].f_min() * (1.0 - REL_TOL)
                && host_power <= self.p_res[home] + REL_TOL * dev.p_m();
        }
        let Ok(tx) = scn.curve(task, device).power(freq) else {
            return false;
        };
        let owner = &scn.devices[home];
        (device == MEC || host_power <= self.p_res[device] + REL_TOL * dev.p_m())
            && tx / owner.eta <= self.p_res[home] + REL_TOL * owner.p_m()
    }

    /// Debits the budgets consumed by `task` on `device` at `freq`.
    pub fn commit(&mut self, scn: &Scenario, task: usize, device: usize, freq: f64) {
        let home = scn.home(task);
        self.f_res[device] -= freq;
        if device != MEC {
            self.p_res[device] -= scn.devices[device].compute_power(freq);
        }
        if device != home {
            let tx = scn.curve(task, device).power(freq).unwrap_or(f64::INFINITY);
            self.p_res[home] -= tx / scn.eta(task);
        }
    }

    /// Reverses [`Residuals::commit`].
    pub fn release(&mut self, scn: &Scenario, task: usize, device: usize, freq: f64) {
        let home = scn.home(task);
        self.f_res[device] += freq;
        if device != MEC {
            self.p_res[device] += scn.devices[device].compute_power(freq);
        }
        if device != home {
            let tx = scn.curve(task, device).power(freq).unwrap_or(f64::INFINITY);
            self.p_res[home] += tx / scn.eta(task);
        }
    }
}

/// Cheapest frequency for `task` on `device` under `res`: the window minimum
/// for the edge server and for local execution, and the minimizer of the
/// owner's transmit cost plus the helper's computing cost otherwise.
pub fn pair_frequency(scn: &Scenario, res: &Residuals, task: usize, device: usize) -> Result<f64> {
    let w = res
        .window(scn, task, device)
        .ok_or(Error::InfeasiblePair { task, device })?;
    if device == MEC || device == scn.home(task) {
        return Ok(w.lo);
    }
    let curve = scn.curve(task, device);
    let dev = &scn.devices[device];
    let obj = LinkObjective {
        curve: &curve,
        tx_weight: scn.tasks[task].power_price / scn.eta(task),
        compute_weight: scn.device_price(device) * dev.kappa,
        nu: dev.nu,
        linear: 0.0,
    };
    obj.argmin(w.lo, w.hi)
}

/// Net cost of serving `task` on `device` at `freq`: the power cost minus the
/// penalty that is avoided.
pub fn pair_cost(scn: &Scenario, task: usize, device: usize, freq: f64) -> f64 {
    let t = &scn.tasks[task];
    let home = scn.home(task);
    let compute = if device == MEC {
        0.0
    } else {
        scn.device_price(device) * scn.devices[device].compute_power(freq)
    };
    let transmit = if device == home {
        0.0
    } else {
        let u = scn.curve(task, device).power(freq).unwrap_or(f64::INFINITY);
        t.power_price / scn.eta(task) * u
    };
    transmit + compute - t.penalty
}

/// Whether a task fits at home at its minimum frequency, both in CPU and in
/// power.
pub fn locally_feasible(scn: &Scenario, task: usize) -> bool {
    let dev = &scn.devices[scn.home(task)];
    let f = scn.tasks[task].f_min();
    f <= dev.f_max && dev.compute_power(f) <= dev.p_m()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceEntry {
    pub device: usize,
    pub freq: f64,
    pub cost: f64,
}

/// Feasible devices of one task, most preferred first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceList {
    pub task: usize,
    pub entries: Vec<PreferenceEntry>,
}

impl PreferenceList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> Option<&PreferenceEntry> {
        self.entries.first()
    }
}

/// Order in which unmatched tasks are served.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Fewest remaining options first, favouring the number of accomplished
    /// tasks.
    MaxTask,
    /// Cheapest head-of-list cost first.
    MinPw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskStatus {
    Unmatched,
    Matched,
    Abandoned,
}

/// Progress of the matching loop.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingState {
    /// Host device of every task, `None` while unmatched or abandoned.
    pub omega: Vec<Option<usize>>,
    /// Serving frequency of every matched task.
    pub freq: Vec<f64>,
    /// Tasks hosted by every device.
    pub hosted: Vec<Vec<usize>>,
    pub residuals: Residuals,
    pub status: Vec<TaskStatus>,
}

impl MatchingState {
    pub fn new(scn: &Scenario) -> Self {
        Self {
            omega: vec![None; scn.n_tasks()],
            freq: vec![0.0; scn.n_tasks()],
            hosted: vec![Vec::new(); scn.n_devices()],
            residuals: Residuals::full(scn),
            status: vec![TaskStatus::Unmatched; scn.n_tasks()],
        }
    }

    pub fn assign(&mut self, scn: &Scenario, task: usize, device: usize, freq: f64) {
        self.residuals.commit(scn, task, device, freq);
        self.omega[task] = Some(device);
        self.freq[task] = freq;
        self.hosted[device].push(task);
        self.status[task] = TaskStatus::Matched;
    }

    pub fn unmatched(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.status.len()).filter(|&k| self.status[k] == TaskStatus::Unmatched)
    }

    pub fn decisions(&self) -> Vec<Option<(usize, f64)>> {
        self.omega
            .iter()
            .zip(&self.freq)
            .map(|(d, &f)| d.map(|d| (d, f)))
            .collect()
    }

    pub fn assignment(&self, scn: &Scenario) -> Assignment {
        Assignment::from_decisions(scn, &self.decisions())
    }
}

/// Preference lists of every unmatched task under the current residuals,
/// sorted by ascending cost (ties by device index).
pub fn build_preferences(state: &MatchingState, scn: &Scenario) -> Vec<PreferenceList> {
    state
        .unmatched()
        .map(|k| {
            let mut entries: Vec<PreferenceEntry> = (0..scn.n_devices())
                .filter_map(|d| {
                    let freq = pair_frequency(scn, &state.residuals, k, d).ok()?;
                    state.residuals.fits(scn, k, d, freq).then(|| PreferenceEntry {
                        device: d,
                        freq,
                        cost: pair_cost(scn, k, d, freq),
                    })
                })
                .filter(|e| e.cost.is_finite())
                .collect();
            entries.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.device.cmp(&b.device)));
            PreferenceList { task: k, entries }
        })
        .collect()
}

/// Picks the next task to match among non-empty lists.
pub fn next_task(lists: &[PreferenceList], criterion: Criterion) -> Option<usize> {
    let head_cost = |l: &PreferenceList| l.head().map_or(f64::INFINITY, |e| e.cost);
    lists
        .iter()
        .filter(|l| !l.is_empty())
        .min_by(|a, b| {
            let primary = match criterion {
                Criterion::MaxTask => a.len().cmp(&b.len()),
                Criterion::MinPw => Ordering::Equal,
            };
            primary
                .then(head_cost(a).total_cmp(&head_cost(b)))
                .then(a.task.cmp(&b.task))
        })
        .map(|l| l.task)
}

/// One matching decision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchStep {
    pub iteration: usize,
    pub task: usize,
    pub device: usize,
    /// Cost of the chosen pair (penalty already subtracted).
    pub cost: f64,
    /// Total system cost of the partial matching after this step.
    pub system_cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingOutcome {
    pub assignment: Assignment,
    pub state: MatchingState,
    /// Step 0 records the cost after local seeding.
    pub trace: Vec<MatchStep>,
    /// Number of tasks seeded locally.
    pub local: usize,
}

impl MatchingOutcome {
    /// Tasks that went through the matching loop.
    pub fn helped(&self) -> usize {
        self.state.status.len() - self.local
    }

    /// Tasks finally served by the edge server.
    pub fn at_mec(&self) -> usize {
        self.state.hosted[MEC].len()
    }
}

/// Runs the whole matching: local seeding, the match loop, and the final
/// redistribution of leftover edge capacity.
pub fn run(scn: &Scenario, criterion: Criterion) -> MatchingOutcome {
    let mut state = MatchingState::new(scn);
    let mut local = 0;
    for k in 0..scn.n_tasks() {
        if locally_feasible(scn, k) {
            state.assign(scn, k, scn.home(k), scn.tasks[k].f_min());
            local += 1;
        }
    }
    let mut trace = vec![MatchStep {
        iteration: 0,
        task: usize::MAX,
        device: usize::MAX,
        cost: 0.0,
        system_cost: state.assignment(scn).cost.total,
    }];

    loop {
        let lists = build_preferences(&state, scn);
        for l in lists.iter().filter(|l| l.is_empty()) {
            state.status[l.task] = TaskStatus::Abandoned;
        }
        let Some(k) = next_task(&lists, criterion) else {
            break;
        };
        let head = *lists.iter().find(|l| l.task == k).and_then(|l| l.head()).unwrap();
        state.assign(scn, k, head.device, head.freq);
        trace.push(MatchStep {
            iteration: trace.len(),
            task: k,
            device: head.device,
            cost: head.cost,
            system_cost: state.assignment(scn).cost.total,
        });
    }

    redistribute_mec(&mut state, scn);
    let assignment = state.assignment(scn);
    MatchingOutcome {
        assignment,
        state,
        trace,
        local,
    }
}

/// Shares the leftover edge capacity among its hosted tasks in proportion to
/// their weighted transmit power. Falls back to an equal split when every
/// share weight is zero.
pub fn redistribute_frequencies(scn: &Scenario, hosted: &[(usize, f64)]) -> Vec<f64> {
    let used: f64 = hosted.iter().map(|&(_, f)| f).sum();
    let residue = scn.devices[MEC].f_max - used;
    if hosted.is_empty() || residue <= 0.0 {
        return hosted.iter().map(|&(_, f)| f).collect();
    }
    let weights: Vec<f64> = hosted
        .iter()
        .map(|&(k, f)| {
            let u = scn.curve(k, MEC).power(f).unwrap_or(0.0);
            scn.tasks[k].power_price / scn.eta(k) * u
        })
        .collect();
    let total: f64 = weights.iter().sum();
    hosted
        .iter()
        .zip(&weights)
        .map(|(&(_, f), &phi)| {
            let share = if total > 0.0 && total.is_finite() {
                phi / total
            } else {
                1.0 / hosted.len() as f64
            };
            f + share * residue
        })
        .collect()
}

/// Applies [`redistribute_frequencies`] to the tasks matched to the edge
/// server and credits the owners with the transmit power saved.
pub fn redistribute_mec(state: &mut MatchingState, scn: &Scenario) {
    let hosted: Vec<(usize, f64)> = state.hosted[MEC]
        .iter()
        .map(|&k| (k, state.freq[k]))
        .collect();
    let new = redistribute_frequencies(scn, &hosted);
    for (&(k, f), &f_new) in hosted.iter().zip(&new) {
        state.residuals.release(scn, k, MEC, f);
        state.residuals.commit(scn, k, MEC, f_new);
        state.freq[k] = f_new;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_constraints, DeviceProfile, TaskSpec};

    fn toy(n: usize) -> Scenario {
        let tasks = (0..n)
            .map(|k| TaskSpec {
                id: k + 1,
                cycles: 2e7,
                bits: 2e5,
                deadline: 0.03,
                penalty: 40.0,
                power_price: 1.0,
            })
            .collect();
        let mut devices = vec![DeviceProfile {
            id: 0,
            f_max: 5e9,
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
                f_max: 1e9,
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

    #[test]
    fn mec_frequency_is_delay_tight_minimum() {
        let scn = toy(1);
        let res = Residuals::full(&scn);
        let f = pair_frequency(&scn, &res, 0, MEC).unwrap();
        let t = &scn.tasks[0];
        let r = scn.curve(0, MEC).rate(0.5 * 0.9);
        let expected = t.cycles / (t.deadline - t.bits / r);
        assert!((f - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn local_frequency_is_cycles_over_deadline() {
        let scn = toy(1);
        let res = Residuals::full(&scn);
        let f = pair_frequency(&scn, &res, 0, 1).unwrap();
        assert_eq!(f, scn.tasks[0].f_min());
    }

    #[test]
    fn helper_frequency_matches_grid_search() {
        let scn = toy(2);
        let res = Residuals::full(&scn);
        let f = pair_frequency(&scn, &res, 0, 2).unwrap();
        let w = res.window(&scn, 0, 2).unwrap();
        let cost = |x: f64| pair_cost(&scn, 0, 2, x);
        let n = 10_000;
        let best = (0..=n)
            .map(|i| w.lo + (w.hi - w.lo) * i as f64 / n as f64)
            .filter(|&x| x > w.lo)
            .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
            .unwrap();
        let step = (w.hi - w.lo) / n as f64;
        assert!(cost(f) <= cost(best) + 1e-12);
        assert!((f - best).abs() <= 2.0 * step);
    }

    #[test]
    fn next_task_orders() {
        let list = |task, len: usize, cost| PreferenceList {
            task,
            entries: (0..len)
                .map(|d| PreferenceEntry {
                    device: d,
                    freq: 1.0,
                    cost: cost + d as f64,
                })
                .collect(),
        };
        let lists = vec![list(0, 3, -50.0), list(1, 1, 0.0), list(2, 5, -60.0)];
        assert_eq!(next_task(&lists, Criterion::MaxTask), Some(1));
        let lists = vec![list(0, 2, 5.0), list(1, 2, 2.0)];
        assert_eq!(next_task(&lists, Criterion::MaxTask), Some(1));
        let lists = vec![list(0, 2, -10.0), list(1, 4, -30.0)];
        assert_eq!(next_task(&lists, Criterion::MinPw), Some(1));
        assert_eq!(next_task(&[list(0, 0, 0.0)], Criterion::MinPw), None);
    }

    #[test]
    fn all_local_means_no_transmit_cost() {
        let scn = toy(3);
        let out = run(&scn, Criterion::MaxTask);
        assert_eq!(out.local, 3);
        assert_eq!(out.assignment.cost.transmit, 0.0);
        assert!(validate_constraints(&scn, &out.assignment).is_empty());
    }

    #[test]
    fn offloaded_tasks_are_matched_and_valid() {
        let mut scn = toy(3);
        scn.devices[1].f_max = 5e8;
        for crit in [Criterion::MaxTask, Criterion::MinPw] {
            let out = run(&scn, crit);
            assert!(validate_constraints(&scn, &out.assignment).is_empty());
            assert_eq!(out.assignment.accomplished(), 3);
            assert_eq!(out.local, 2);
            assert_eq!(out.trace.len(), 2);
        }
    }

    #[test]
    fn single_mec_task_takes_whole_residue() {
        let scn = toy(1);
        let f = pair_frequency(&scn, &Residuals::full(&scn), 0, MEC).unwrap();
        let new = redistribute_frequencies(&scn, &[(0, f)]);
        assert!((new[0] - 5e9).abs() <= 1e-6);
        assert!(redistribute_frequencies(&scn, &[]).is_empty());
    }

    #[test]
    fn redistribution_conserves_capacity_and_lowers_power() {
        let scn = toy(3);
        let res = Residuals::full(&scn);
        let hosted: Vec<(usize, f64)> = (0..3)
            .map(|k| (k, pair_frequency(&scn, &res, k, MEC).unwrap()))
            .collect();
        let new = redistribute_frequencies(&scn, &hosted);
        let sum: f64 = new.iter().sum();
        assert!((sum - 5e9).abs() <= 1e-6 * 5e9);
        for (&(k, f), &g) in hosted.iter().zip(&new) {
            assert!(g >= f);
            let curve = scn.curve(k, MEC);
            assert!(curve.power(g).unwrap() <= curve.power(f).unwrap());
        }
    }
}
