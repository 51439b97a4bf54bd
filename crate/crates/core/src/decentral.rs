//! Three-step decentralized matching.
//!
//! 1. Tasks that fit at home run there at their minimum frequency.
//! 2. The edge server sorts the remaining tasks by the delay-tight frequency
//!    they need and admits the longest prefix that fits its capacity; the
//!    leftover capacity is then shared among the admitted tasks.
//! 3. The rest run synchronized deferred acceptance with the UEs: every
//!    unmatched task asks its next-best helper for the smallest frequency
//!    meeting its deadline, and every helper keeps the cheapest prefix of its
//!    pooled requests that fits its residual CPU and power.
//!
//! Requests are frozen at the start of step 3, so a UE that both hosts
//! requests and has its own task offloaded may exceed its power budget once
//! the rounds end. Such conflicts are settled by dropping whichever side
//! carries the smaller total penalty.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{locally_feasible, redistribute_frequencies, Residuals};
use crate::model::{Assignment, FeasibilityBounds, Scenario, MEC, REL_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Offer,
    Reject,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Offer => "offer",
            Verdict::Reject => "reject",
        })
    }
}

/// A helper's answer to one pooled request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub round: usize,
    pub task: usize,
    pub device: usize,
    pub freq: f64,
    pub verdict: Verdict,
}

/// Message counts used by the signaling-overhead formulas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadCounters {
    /// Number of tasks.
    pub n: u64,
    /// Tasks entering the deferred-acceptance step.
    pub n_u: u64,
    /// Tasks served by the edge server.
    pub n_m: u64,
    /// Tasks that went through the centralized matching loop.
    pub n_h: u64,
    /// Deferred-acceptance rounds.
    pub rounds: u64,
}

/// Log of the deferred-acceptance step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    /// One entry per pooled request per round.
    pub entries: Vec<RoundEntry>,
    /// Number of rounds in which at least one request was sent.
    pub rounds: usize,
    /// Tasks in each request round's sending set.
    pub requests_per_round: Vec<usize>,
    /// Total system cost after steps 1-2 and after each round.
    pub costs: Vec<f64>,
    pub counters: OverheadCounters,
    /// Tasks dropped to settle power conflicts after the rounds.
    pub dropped: Vec<usize>,
}

impl RoundLog {
    /// Writes `round,task,device,f,verdict` lines with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["round", "task", "device", "f", "verdict"])?;
        for e in &self.entries {
            wr.write_record([
                e.round.to_string(),
                (e.task + 1).to_string(),
                e.device.to_string(),
                format!("{:e}", e.freq),
                e.verdict.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Edge admission result.
#[derive(Clone, Debug, PartialEq)]
pub struct MecAdmission {
    /// Admitted tasks in admission order.
    pub admitted: Vec<usize>,
    /// Minimum frequency each admitted task asked for.
    pub requested: Vec<f64>,
    /// Frequencies after the leftover capacity is shared.
    pub freqs: Vec<f64>,
}

/// Sorts `candidates` by the full-power delay-tight frequency towards the
/// edge server and admits the longest prefix whose sum fits its capacity.
/// Tasks the edge server can never serve are skipped.
pub fn mec_admission(
    scn: &Scenario,
    bounds: &FeasibilityBounds,
    candidates: &[usize],
) -> MecAdmission {
    let mut order: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&k| bounds.is_feasible(k, MEC))
        .collect();
    order.sort_by(|&a, &b| {
        bounds.f_down[a][MEC]
            .total_cmp(&bounds.f_down[b][MEC])
            .then(a.cmp(&b))
    });
    let cap = scn.devices[MEC].f_max;
    let mut used = 0.0;
    let mut admitted = Vec::new();
    let mut requested = Vec::new();
    for k in order {
        let f = bounds.f_down[k][MEC];
        if used + f > cap {
            break;
        }
        used += f;
        admitted.push(k);
        requested.push(f);
    }
    let pairs: Vec<(usize, f64)> = admitted.iter().copied().zip(requested.iter().copied()).collect();
    let freqs = redistribute_frequencies(scn, &pairs);
    MecAdmission {
        admitted,
        requested,
        freqs,
    }
}

/// Outcome of the deferred-acceptance rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct DeferredAcceptance {
    /// Held offer per task of the pool, indexed by task.
    pub matches: Vec<Option<(usize, f64)>>,
    pub log: RoundLog,
}

/// Synchronized deferred acceptance among UE helpers for the tasks in `pool`,
/// using the residual budgets in `res` as they stand before the first round.
pub fn deferred_acceptance(scn: &Scenario, res: &Residuals, pool: &[usize]) -> DeferredAcceptance {
    let n = scn.n_tasks();
    let m = scn.n_devices();
    let prefs: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|k| {
            if !pool.contains(&k) {
                return Vec::new();
            }
            let home = scn.home(k);
            let mut list: Vec<(usize, f64)> = (1..m)
                .filter(|&d| d != home)
                .filter_map(|d| res.window(scn, k, d).map(|w| (d, w.lo)))
                .collect();
            list.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            list
        })
        .collect();

    let mut next = vec![0usize; n];
    let mut held: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut holder: Vec<Option<usize>> = vec![None; n];
    let mut log = RoundLog::default();
    let mut round = 0;

    loop {
        let senders: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&k| holder[k].is_none() && next[k] < prefs[k].len())
            .collect();
        if senders.is_empty() {
            break;
        }
        round += 1;
        log.requests_per_round.push(senders.len());
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for &k in &senders {
            let (d, f) = prefs[k][next[k]];
            incoming[d].push((k, f));
        }
        for d in 1..m {
            if incoming[d].is_empty() {
                continue;
            }
            let mut pooled = std::mem::take(&mut held[d]);
            pooled.extend(incoming[d].iter().copied());
            pooled.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let dev = &scn.devices[d];
            let mut load = 0.0;
            let mut power = 0.0;
            let mut accepting = true;
            for (k, f) in pooled {
                let p = dev.compute_power(f);
                accepting = accepting
                    && load + f <= res.f_res[d] + REL_TOL * dev.f_max
                    && power + p <= res.p_res[d] + REL_TOL * dev.p_m();
                let verdict = if accepting {
                    load += f;
                    power += p;
                    held[d].push((k, f));
                    holder[k] = Some(d);
                    Verdict::Offer
                } else {
                    holder[k] = None;
                    next[k] += 1;
                    Verdict::Reject
                };
                log.entries.push(RoundEntry {
                    round,
                    task: k,
                    device: d,
                    freq: f,
                    verdict,
                });
            }
        }
    }
    log.rounds = round;

    let mut matches = vec![None; n];
    for d in 1..m {
        for &(k, f) in &held[d] {
            matches[k] = Some((d, f));
        }
    }
    DeferredAcceptance { matches, log }
}

/// Drops offers until every UE that both hosts step-3 tasks and has its own
/// task offloaded in step 3 is within its residual power. Returns the
/// dropped tasks.
fn settle_conflicts(
    scn: &Scenario,
    res: &Residuals,
    matches: &mut [Option<(usize, f64)>],
) -> Vec<usize> {
    let m = scn.n_devices();
    let mut dropped = Vec::new();
    for u in 1..m {
        let own = u - 1;
        let Some((host, f_own)) = matches[own] else { continue };
        let dev = &scn.devices[u];
        let mut guests: Vec<(usize, f64)> = matches
            .iter()
            .enumerate()
            .filter_map(|(k, d)| d.filter(|d| d.0 == u).map(|d| (k, d.1)))
            .collect();
        if guests.is_empty() {
            continue;
        }
        let tx = scn.curve(own, host).power(f_own).unwrap_or(f64::INFINITY) / dev.eta;
        let compute: f64 = guests.iter().map(|&(_, f)| dev.compute_power(f)).sum();
        if tx + compute <= res.p_res[u] + REL_TOL * dev.p_m() {
            continue;
        }
        let guest_penalty: f64 = guests.iter().map(|&(k, _)| scn.tasks[k].penalty).sum();
        if scn.tasks[own].penalty <= guest_penalty {
            matches[own] = None;
            dropped.push(own);
            continue;
        }
        guests.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut compute = compute;
        for (k, f) in guests {
            if tx + compute <= res.p_res[u] + REL_TOL * dev.p_m() {
                break;
            }
            compute -= dev.compute_power(f);
            matches[k] = None;
            dropped.push(k);
        }
    }
    dropped.sort_unstable();
    dropped
}

/// Runs the three steps and returns the final assignment with its round log.
pub fn run(scn: &Scenario) -> (Assignment, RoundLog) {
    let n = scn.n_tasks();
    let bounds = crate::model::feasibility_bounds(scn);
    let mut res = Residuals::full(scn);
    let mut decisions: Vec<Option<(usize, f64)>> = vec![None; n];

    let mut rest = Vec::new();
    for k in 0..n {
        if locally_feasible(scn, k) {
            let f = scn.tasks[k].f_min();
            res.commit(scn, k, scn.home(k), f);
            decisions[k] = Some((scn.home(k), f));
        } else {
            rest.push(k);
        }
    }

    let adm = mec_admission(scn, &bounds, &rest);
    for (&k, &f) in adm.admitted.iter().zip(&adm.freqs) {
        res.commit(scn, k, MEC, f);
        decisions[k] = Some((MEC, f));
    }
    let pool: Vec<usize> = rest
        .iter()
        .copied()
        .filter(|k| !adm.admitted.contains(k))
        .collect();

    let base_cost = Assignment::from_decisions(scn, &decisions).cost.total;
    let mut da = deferred_acceptance(scn, &res, &pool);

    let mut costs = vec![base_cost];
    let mut tentative = decisions.clone();
    let by_round: BTreeSet<usize> = da.log.entries.iter().map(|e| e.round).collect();
    for r in by_round {
        for e in da.log.entries.iter().filter(|e| e.round == r) {
            match e.verdict {
                Verdict::Offer => tentative[e.task] = Some((e.device, e.freq)),
                Verdict::Reject => {
                    if tentative[e.task] == Some((e.device, e.freq)) {
                        tentative[e.task] = None;
                    }
                }
            }
        }
        costs.push(Assignment::from_decisions(scn, &tentative).cost.total);
    }

    let dropped = settle_conflicts(scn, &res, &mut da.matches);
    for &k in &pool {
        decisions[k] = da.matches[k];
    }

    let mut log = da.log;
    log.costs = costs;
    log.dropped = dropped;
    log.counters = OverheadCounters {
        n: n as u64,
        n_u: pool.len() as u64,
        n_m: adm.admitted.len() as u64,
        n_h: 0,
        rounds: log.rounds as u64,
    };
    (Assignment::from_decisions(scn, &decisions), log)
}

/// Algorithms whose signaling overhead has a closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OverheadAlgorithm {
    Icrbi,
    Heuristic,
    Decentral,
}

impl FromStr for OverheadAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "icrbi" => Ok(Self::Icrbi),
            "heuristic" | "maxtask" | "minpw" | "matching" => Ok(Self::Heuristic),
            "decentral" | "decentralized" => Ok(Self::Decentral),
            _ => Err(Error::UnknownAlgorithm(s.to_string())),
        }
    }
}

/// Number of exchanged messages for the named algorithm.
///
/// * dual iteration: `8N + N(N-1)`
/// * centralized matching: `2N_m + N_h (N_h + 1) N / 2 + 3N + (2N + 1) N_h`
/// * decentralized: `2 T N_u + (N-1) N_u + 2 N_m + 2N`
pub fn overhead_report(algorithm: &str, c: &OverheadCounters) -> Result<u64> {
    Ok(overhead(algorithm.parse()?, c))
}

pub fn overhead(algorithm: OverheadAlgorithm, c: &OverheadCounters) -> u64 {
    let n = c.n;
    match algorithm {
        OverheadAlgorithm::Icrbi => 8 * n + n * n.saturating_sub(1),
        OverheadAlgorithm::Heuristic => {
            2 * c.n_m + (c.n_h + 1) * c.n_h / 2 * n + 3 * n + (2 * n + 1) * c.n_h
        }
        OverheadAlgorithm::Decentral => {
            2 * c.rounds * c.n_u + n.saturating_sub(1) * c.n_u + 2 * c.n_m + 2 * n
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{feasibility_bounds, validate_constraints, DeviceProfile, TaskSpec};

    fn scenario(n: usize, cycles: f64, f_ue: f64, f0: f64) -> Scenario {
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

    #[test]
    fn overhead_closed_forms() {
        let c = OverheadCounters {
            n: 30,
            ..Default::default()
        };
        assert_eq!(overhead_report("icrbi", &c).unwrap(), 1110);
        let c = OverheadCounters {
            n: 7,
            n_m: 3,
            ..Default::default()
        };
        assert_eq!(overhead_report("decentral", &c).unwrap(), 2 * 3 + 2 * 7);
        assert_eq!(overhead_report("maxtask", &c).unwrap(), 2 * 3 + 3 * 7);
        assert!(matches!(
            overhead_report("noncope", &c),
            Err(Error::UnknownAlgorithm(_))
        ));
    }

    #[test]
    fn admission_takes_longest_fitting_prefix() {
        let scn = scenario(3, 1e7, 1e9, 5e9);
        let mut bounds = feasibility_bounds(&scn);
        bounds.f_down[0][MEC] = 2e9;
        bounds.f_down[1][MEC] = 1e9;
        bounds.f_down[2][MEC] = 4e9;
        let adm = mec_admission(&scn, &bounds, &[0, 1, 2]);
        assert_eq!(adm.admitted, vec![1, 0]);
        assert_eq!(adm.requested, vec![1e9, 2e9]);
    }

    #[test]
    fn all_local_skips_later_steps() {
        let scn = scenario(3, 1e7, 1e9, 5e9);
        let (a, log) = run(&scn);
        assert_eq!(log.rounds, 0);
        assert_eq!(log.counters.n_m, 0);
        assert_eq!(a.accomplished(), 3);
    }

    #[test]
    fn one_slot_helper_keeps_lower_request() {
        let mut scn = scenario(3, 1.2e7, 1e8, 0.0);
        scn.devices[MEC].f_max = 1.0;
        scn.devices[3].f_max = 1.2e9;
        scn.tasks[1].cycles = 1.0e7;
        let (a, log) = run(&scn);
        assert!(validate_constraints(&scn, &a).is_empty());
        assert_eq!(a.device_of(1), Some(3));
        assert_eq!(a.device_of(0), None);
        assert!(log
            .entries
            .iter()
            .any(|e| e.task == 0 && e.verdict == Verdict::Reject));
    }

    #[test]
    fn zero_edge_capacity_admits_nothing() {
        let mut scn = scenario(3, 4e7, 1e9, 5e9);
        scn.devices[MEC].f_max = 1.0;
        let (a, log) = run(&scn);
        assert_eq!(log.counters.n_m, 0);
        assert!(a.placements.iter().flatten().all(|p| p.device != MEC));
        assert!(validate_constraints(&scn, &a).is_empty());
    }
}
