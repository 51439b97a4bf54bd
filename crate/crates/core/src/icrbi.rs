//! Integer-constraint relaxation with dual subgradient updates.
//!
//! The power budgets of every UE and the CPU capacities of every device are
//! priced by nonnegative multipliers. For fixed prices each task solves a
//! one-dimensional convex problem per candidate device; a decision rule then
//! turns the relaxed solution into a single device per task. The prices are
//! moved along the constraint violation with a diminishing or square-summable
//! step. Every iterate is repaired into a feasible assignment and the best one
//! is returned.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, NonConvergence, Result};
use crate::matching::{
    locally_feasible, pair_cost, pair_frequency, redistribute_frequencies, Residuals,
};
use crate::model::{
    feasibility_bounds, validate_constraints, Assignment, FeasibilityBounds, LinkObjective,
    Scenario, MEC,
};

/// Step-size schedule of the dual update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// `x / sqrt(t)`.
    Diminish(f64),
    /// `x / t`.
    SquareSummable(f64),
}

impl StepRule {
    pub fn step(&self, t: usize) -> f64 {
        let t = t.max(1) as f64;
        match *self {
            StepRule::Diminish(x) => x / t.sqrt(),
            StepRule::SquareSummable(x) => x / t,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            StepRule::Diminish(x) | StepRule::SquareSummable(x) => x,
        }
    }
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Diminish(0.1)
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepRule::Diminish(x) => write!(f, "diminish:{x}"),
            StepRule::SquareSummable(x) => write!(f, "square:{x}"),
        }
    }
}

impl FromStr for StepRule {
    type Err = Error;

    /// Parses `diminish:<x>` or `square:<x>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad step rule `{s}`, expected diminish:<x> or square:<x>"));
        let (kind, x) = s.split_once(':').ok_or_else(bad)?;
        let x: f64 = x.trim().parse().map_err(|_| bad())?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(bad());
        }
        match kind.trim() {
            "diminish" => Ok(StepRule::Diminish(x)),
            "square" => Ok(StepRule::SquareSummable(x)),
            _ => Err(bad()),
        }
    }
}

/// Multipliers of the power and capacity constraints.
///
/// Both are stored per device index; `mu[0]` stays zero because the edge
/// server has no power budget. The multipliers price normalized constraints
/// (`load / capacity - 1`), so the per-watt price seen by the primal step is
/// `mu / p_m` and the per-cycle price is `v / f_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub mu: Vec<f64>,
    pub v: Vec<f64>,
    pub step_rule: StepRule,
    /// Number of dual updates applied so far.
    pub iteration: usize,
    /// Multiplier scale; subgradients are multiplied by it so the prices live
    /// in the same units as the penalties.
    pub price_scale: f64,
}

impl DualState {
    pub fn new(scn: &Scenario, step_rule: StepRule) -> Self {
        let n = scn.n_devices();
        let mean_penalty =
            scn.tasks.iter().map(|t| t.penalty).sum::<f64>() / scn.n_tasks().max(1) as f64;
        Self {
            mu: vec![0.0; n],
            v: vec![0.0; n],
            step_rule,
            iteration: 0,
            price_scale: if mean_penalty > 0.0 { mean_penalty } else { 1.0 },
        }
    }

    /// Price per watt on a UE's power budget.
    pub fn power_price(&self, scn: &Scenario, device: usize) -> f64 {
        if device == MEC {
            0.0
        } else {
            self.mu[device] / scn.devices[device].p_m()
        }
    }

    /// Price per cycle/s on a device's capacity.
    pub fn capacity_price(&self, scn: &Scenario, device: usize) -> f64 {
        self.v[device] / scn.devices[device].f_max
    }

    pub fn mu_norm(&self) -> f64 {
        self.mu.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn v_norm(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn objective<'a>(
    scn: &Scenario,
    duals: &DualState,
    curve: &'a crate::model::TransmitCurve,
    task: usize,
    device: usize,
) -> LinkObjective<'a> {
    let home = scn.home(task);
    let dev = &scn.devices[device];
    let owner_price = scn.tasks[task].power_price + duals.power_price(scn, home);
    LinkObjective {
        curve,
        tx_weight: owner_price / scn.eta(task),
        compute_weight: if device == MEC {
            0.0
        } else {
            (scn.device_price(device) + duals.power_price(scn, device)) * dev.kappa
        },
        nu: dev.nu,
        linear: duals.capacity_price(scn, device),
    }
}

/// Relaxed frequency of `task` on a non-home `device`: the minimizer of the
/// priced per-link objective, clamped into the static window.
pub fn solve_gamma(
    scn: &Scenario,
    bounds: &FeasibilityBounds,
    duals: &DualState,
    task: usize,
    device: usize,
) -> Result<f64> {
    let curve = scn.curve(task, device);
    let obj = objective(scn, duals, &curve, task, device);
    obj.argmin(bounds.f_down[task][device], bounds.f_up[task][device])
}

/// Relaxed solution of one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalUpdate {
    /// Frequency per `[task][device]` (zero where the pair is infeasible).
    pub freq: Vec<Vec<f64>>,
    /// Lagrangian contribution per `[task][device]` (`+inf` where infeasible).
    pub lagrangian: Vec<Vec<f64>>,
    /// Chosen `(device, frequency)` per task.
    pub decisions: Vec<Option<(usize, f64)>>,
}

/// Solves every per-link subproblem under the current prices and applies the
/// decision rule: nothing if no device has a negative Lagrangian, home if
/// home qualifies, otherwise the device minimizing the priced
/// power-elasticity metric (ties to the lowest index).
pub fn primal_update(scn: &Scenario, bounds: &FeasibilityBounds, duals: &DualState) -> PrimalUpdate {
    let n = scn.n_tasks();
    let m = scn.n_devices();
    let mut freq = vec![vec![0.0; m]; n];
    let mut lagrangian = vec![vec![f64::INFINITY; m]; n];
    let mut decisions = vec![None; n];

    for k in 0..n {
        let home = scn.home(k);
        let task = &scn.tasks[k];
        let mut best: Option<(usize, f64)> = None;
        let mut best_metric = f64::INFINITY;
        let mut home_ok = false;
        for d in bounds.feasible_devices(k) {
            if d == home {
                let f = task.f_min();
                let dev = &scn.devices[d];
                let l = (task.power_price + duals.power_price(scn, d)) * dev.compute_power(f)
                    + duals.capacity_price(scn, d) * f
                    - task.penalty;
                freq[k][d] = f;
                lagrangian[k][d] = l;
                home_ok = l <= 0.0;
                continue;
            }
            let curve = scn.curve(k, d);
            let obj = objective(scn, duals, &curve, k, d);
            let Ok(g) = obj.argmin(bounds.f_down[k][d], bounds.f_up[k][d]) else {
                continue;
            };
            let Ok(value) = obj.value(g) else { continue };
            let l = value - task.penalty;
            freq[k][d] = g;
            lagrangian[k][d] = l;
            if l > 0.0 {
                continue;
            }
            let (Ok(u), Ok((du, _))) = (curve.power(g), curve.derivatives(g)) else {
                continue;
            };
            let metric = obj.tx_weight * (u - g * du);
            if metric < best_metric {
                best_metric = metric;
                best = Some((d, g));
            }
        }
        decisions[k] = if home_ok {
            Some((home, freq[k][home]))
        } else {
            best
        };
    }
    PrimalUpdate {
        freq,
        lagrangian,
        decisions,
    }
}

/// Objective value of integer decisions with the constant terms removed:
/// power cost of every served task minus the penalties avoided.
pub fn relaxed_cost(scn: &Scenario, decisions: &[Option<(usize, f64)>]) -> f64 {
    decisions
        .iter()
        .enumerate()
        .filter_map(|(k, d)| d.map(|(dev, f)| pair_cost(scn, k, dev, f)))
        .sum()
}

/// One projected subgradient step on the normalized power and capacity
/// constraints evaluated at `decisions`.
pub fn dual_update(state: &DualState, decisions: &[Option<(usize, f64)>], scn: &Scenario) -> DualState {
    let m = scn.n_devices();
    let mut load = vec![0.0; m];
    let mut power = vec![0.0; m];
    for (k, d) in decisions.iter().enumerate() {
        let Some((dev, f)) = *d else { continue };
        load[dev] += f;
        if dev != MEC {
            power[dev] += scn.devices[dev].compute_power(f);
        }
        let home = scn.home(k);
        if dev != home {
            let u = scn.curve(k, dev).power(f).unwrap_or(f64::INFINITY);
            power[home] += u / scn.eta(k);
        }
    }
    let t = state.iteration + 1;
    let step = state.step_rule.step(t) * state.price_scale;
    let mut next = state.clone();
    next.iteration = t;
    for d in 0..m {
        let dev = &scn.devices[d];
        let gv = load[d] / dev.f_max - 1.0;
        next.v[d] = (state.v[d] + step * gv).max(0.0);
        if d != MEC {
            let gm = (power[d] / dev.p_m() - 1.0).min(1e6);
            next.mu[d] = (state.mu[d] + step * gm).max(0.0);
        }
    }
    next
}

/// Shares the edge server's leftover capacity among the tasks it hosts.
pub fn share_mec_residue(scn: &Scenario, a: &Assignment) -> Assignment {
    let hosted: Vec<(usize, f64)> = a
        .placements
        .iter()
        .enumerate()
        .filter_map(|(k, p)| p.filter(|p| p.device == MEC).map(|p| (k, p.freq)))
        .collect();
    if hosted.is_empty() {
        return a.clone();
    }
    let mut decisions = a.decisions();
    for (&(k, _), f) in hosted.iter().zip(redistribute_frequencies(scn, &hosted)) {
        decisions[k] = Some((MEC, f));
    }
    Assignment::from_decisions(scn, &decisions)
}

/// Turns possibly infeasible decisions into a feasible assignment.
///
/// Tasks on devices whose capacity or power budget is not violated are kept
/// unchanged. The remaining tasks are re-placed in three stages, each in
/// ascending order of the static minimum frequency on the stage's target:
/// their chosen device, then the edge server, then home. Every placement uses
/// the cheapest frequency the residual budgets allow. The edge server's
/// leftover capacity is then shared among its tasks. A task that fits
/// nowhere, or whose placement would still cost more than its penalty, is
/// dropped, so the result never costs more than dropping every offender.
/// Feasible input is returned as is.
pub fn repair_feasibility(scn: &Scenario, decisions: &[Option<(usize, f64)>]) -> Assignment {
    let n = scn.n_tasks();
    let m = scn.n_devices();
    let bounds = feasibility_bounds(scn);
    let raw = Assignment::from_decisions(scn, decisions);
    let violations = validate_constraints(scn, &raw);
    if violations.is_empty() {
        return raw;
    }

    let mut bad_device = vec![false; m];
    let mut bad_task = vec![false; n];
    for v in &violations {
        use crate::model::Violation::*;
        match *v {
            InvalidDecision { task, .. } | Deadline { task, .. } => bad_task[task] = true,
            Capacity { device, .. } | Power { device, .. } => bad_device[device] = true,
        }
    }
    for (k, d) in decisions.iter().enumerate() {
        if let Some((dev, _)) = *d {
            let home = scn.home(k);
            if bad_device[dev] || (dev != home && bad_device[home]) {
                bad_task[k] = true;
            }
        }
    }

    let mut res = Residuals::full(scn);
    let mut out: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut pending = Vec::new();
    for (k, d) in decisions.iter().enumerate() {
        let Some((dev, f)) = *d else { continue };
        if !bad_task[k] && res.fits(scn, k, dev, f) {
            res.commit(scn, k, dev, f);
            out[k] = Some((dev, f));
        } else {
            pending.push((k, dev, f));
        }
    }
    // Stage 1: the chosen device; stage 2: the edge server; stage 3: home.
    let mut replaced = vec![false; n];
    let mut left: Vec<(usize, usize)> = pending.into_iter().map(|(k, d, _)| (k, d)).collect();
    for stage in 0..3 {
        let target = |k: usize, chosen: usize| match stage {
            0 => (chosen < m).then_some(chosen),
            1 => Some(MEC),
            _ => locally_feasible(scn, k).then(|| scn.home(k)),
        };
        left.sort_by(|a, b| {
            let f = |&(k, d): &(usize, usize)| target(k, d).map_or(f64::INFINITY, |t| bounds.f_down[k][t]);
            f(a).total_cmp(&f(b)).then(a.0.cmp(&b.0))
        });
        left.retain(|&(k, chosen)| {
            let Some(d) = target(k, chosen) else { return true };
            let Ok(freq) = pair_frequency(scn, &res, k, d) else {
                return true;
            };
            // Edge placements get cheaper once the leftover capacity is
            // shared; they are settled below.
            let worth_it = d == MEC || pair_cost(scn, k, d, freq) <= 0.0;
            if worth_it && res.fits(scn, k, d, freq) {
                res.commit(scn, k, d, freq);
                out[k] = Some((d, freq));
                replaced[k] = true;
                false
            } else {
                true
            }
        });
    }
    // Share the edge residue, then drop the costliest re-placed edge task
    // until every re-placed one pays for itself.
    loop {
        let a = share_mec_residue(scn, &Assignment::from_decisions(scn, &out));
        let worst = (0..n)
            .filter(|&k| replaced[k] && a.device_of(k) == Some(MEC))
            .map(|k| (k, pair_cost(scn, k, MEC, a.placements[k].map_or(0.0, |p| p.freq))))
            .filter(|&(_, c)| c > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match worst {
            Some((k, _)) => out[k] = None,
            None => return a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// The relaxed cost changed by less than `eps` and the relaxed iterate
    /// was already feasible.
    CostConverged,
    /// The best feasible cost improved by less than `eps` over the patience
    /// window.
    IncumbentStalled,
    /// `max_iter` reached.
    MaxIterations,
}

/// One row of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcrbiRecord {
    pub iteration: usize,
    /// Reduced cost of the relaxed integer decisions.
    pub reduced_cost: f64,
    pub num_assigned: usize,
    pub mu_norm: f64,
    pub v_norm: f64,
    /// Reduced cost of the best feasible assignment found so far.
    pub best_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcrbiTrace {
    pub records: Vec<IcrbiRecord>,
    /// Chosen device per task at every iteration.
    pub decisions: Vec<Vec<Option<usize>>>,
    pub termination: Termination,
    /// Absolute stopping tolerance actually used.
    pub eps: f64,
    /// Cost change measured by the rule that stopped the run.
    pub final_delta: f64,
}

impl IcrbiTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }

    /// Writes the log as CSV with header
    /// `iteration,reduced_cost,num_assigned,mu_norm,v_norm,best_cost`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcrbiOptions {
    pub step_rule: StepRule,
    /// Absolute stopping tolerance; `None` means `1e-4 |C1|` where `C1` is the
    /// first relaxed cost.
    pub eps: Option<f64>,
    pub max_iter: usize,
    /// Iterations without a better feasible assignment before stopping.
    pub patience: usize,
}

impl Default for IcrbiOptions {
    fn default() -> Self {
        Self {
            step_rule: StepRule::default(),
            eps: None,
            max_iter: 2000,
            patience: 100,
        }
    }
}

/// Runs the dual iteration and returns the best feasible assignment seen.
///
/// Stops when the relaxed cost settles on a feasible iterate, or when the
/// best feasible cost has not improved by `eps` for `patience` iterations.
/// Hitting `max_iter` yields [`Error::NonConvergence`] with the trace and the
/// incumbent.
pub fn solve(scn: &Scenario, opts: &IcrbiOptions) -> Result<(Assignment, IcrbiTrace)> {
    scn.validate()?;
    let bounds = feasibility_bounds(scn);
    let mut duals = DualState::new(scn, opts.step_rule);
    let mut best = Assignment::unassigned(scn);
    let mut records: Vec<IcrbiRecord> = Vec::new();
    let mut history = Vec::new();
    let mut eps = opts.eps.unwrap_or(0.0);
    let mut prev: Option<f64> = None;
    let mut termination = Termination::MaxIterations;
    let mut final_delta = f64::NAN;

    for t in 1..=opts.max_iter {
        let primal = primal_update(scn, &bounds, &duals);
        let c = relaxed_cost(scn, &primal.decisions);
        let repaired = repair_feasibility(scn, &primal.decisions);
        let feasible_as_is = repaired.decisions() == primal.decisions;
        let candidate = share_mec_residue(scn, &repaired);
        if candidate.cost.reduced < best.cost.reduced {
            best = candidate;
        }
        if t == 1 && opts.eps.is_none() {
            let floor = 1e-9 * duals.price_scale * scn.n_tasks().max(1) as f64;
            eps = (1e-4 * c.abs()).max(floor);
        }
        records.push(IcrbiRecord {
            iteration: t,
            reduced_cost: c,
            num_assigned: primal.decisions.iter().filter(|d| d.is_some()).count(),
            mu_norm: duals.mu_norm(),
            v_norm: duals.v_norm(),
            best_cost: best.cost.reduced,
        });
        history.push(primal.decisions.iter().map(|d| d.map(|x| x.0)).collect());

        if let Some(p) = prev {
            let delta = (c - p).abs();
            if feasible_as_is && delta < eps {
                termination = Termination::CostConverged;
                final_delta = delta;
                break;
            }
        }
        if t > opts.patience {
            let then = records[t - 1 - opts.patience].best_cost;
            let delta = (then - best.cost.reduced).abs();
            if delta < eps {
                termination = Termination::IncumbentStalled;
                final_delta = delta;
                break;
            }
        }
        prev = Some(c);
        duals = dual_update(&duals, &primal.decisions, scn);
    }

    let trace = IcrbiTrace {
        records,
        decisions: history,
        termination,
        eps,
        final_delta,
    };
    if termination == Termination::MaxIterations {
        return Err(Error::NonConvergence(Box::new(NonConvergence { trace, best })));
    }
    Ok((best, trace))
}
