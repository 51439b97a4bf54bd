//! Reference solutions: the no-cooperation baseline and an exhaustive search
//! for tiny instances.

use crate::error::{Error, Result};
use crate::matching::{locally_feasible, pair_cost, redistribute_frequencies};
use crate::model::{feasibility_bounds, Assignment, FeasibilityBounds, Scenario, MEC, REL_TOL};

/// Largest instance [`brute_force`] accepts.
pub const BRUTE_FORCE_MAX_TASKS: usize = 4;

/// Default number of frequency grid points per task/device pair.
pub const DEFAULT_GRID_POINTS: usize = 200;

fn mec_transmit_cost(scn: &Scenario, hosted: &[(usize, f64)]) -> (Vec<f64>, f64) {
    let freqs = redistribute_frequencies(scn, hosted);
    let cost = hosted
        .iter()
        .zip(&freqs)
        .map(|(&(k, _), &f)| pair_cost(scn, k, MEC, f) + scn.tasks[k].penalty)
        .sum();
    (freqs, cost)
}

/// Baseline without UE cooperation: each task runs at home or on the edge
/// server.
///
/// Tasks that cannot run at home are admitted to the edge server by ascending
/// required frequency while capacity lasts. Tasks that can run at home move
/// to the edge server, again by ascending required frequency, only when that
/// lowers the exact cost after the leftover capacity is shared. Tasks that fit
/// nowhere stay unassigned.
pub fn non_cope(scn: &Scenario) -> Assignment {
    let n = scn.n_tasks();
    let bounds = feasibility_bounds(scn);
    let cap = scn.devices[MEC].f_max;
    let local: Vec<bool> = (0..n).map(|k| locally_feasible(scn, k)).collect();

    let by_mec_freq = |mut v: Vec<usize>| {
        v.sort_by(|&a, &b| {
            bounds.f_down[a][MEC]
                .total_cmp(&bounds.f_down[b][MEC])
                .then(a.cmp(&b))
        });
        v
    };
    let must = by_mec_freq(
        (0..n)
            .filter(|&k| !local[k] && bounds.is_feasible(k, MEC))
            .collect(),
    );
    let mut hosted: Vec<(usize, f64)> = Vec::new();
    let mut used = 0.0;
    for k in must {
        let f = bounds.f_down[k][MEC];
        if used + f <= cap {
            used += f;
            hosted.push((k, f));
        }
    }

    let optional = by_mec_freq(
        (0..n)
            .filter(|&k| local[k] && bounds.is_feasible(k, MEC))
            .collect(),
    );
    for k in optional {
        let f = bounds.f_down[k][MEC];
        if used + f > cap {
            continue;
        }
        let (_, now) = mec_transmit_cost(scn, &hosted);
        let home_cost = pair_cost(scn, k, scn.home(k), scn.tasks[k].f_min()) + scn.tasks[k].penalty;
        let mut with = hosted.clone();
        with.push((k, f));
        let (_, after) = mec_transmit_cost(scn, &with);
        if after < now + home_cost {
            used += f;
            hosted = with;
        }
    }

    let mut decisions: Vec<Option<(usize, f64)>> = (0..n)
        .map(|k| local[k].then(|| (scn.home(k), scn.tasks[k].f_min())))
        .collect();
    let (freqs, _) = mec_transmit_cost(scn, &hosted);
    for (&(k, _), &f) in hosted.iter().zip(&freqs) {
        decisions[k] = Some((MEC, f));
    }
    Assignment::from_decisions(scn, &decisions)
}

/// Number of decision maps [`brute_force`] enumerates: every task is either
/// unassigned or placed on one of its statically feasible devices.
pub fn decision_map_count(bounds: &FeasibilityBounds) -> u64 {
    bounds
        .infeasible
        .iter()
        .map(|inf| 1 + (bounds.f_up[0].len() - inf.len()) as u64)
        .product()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    pub assignment: Assignment,
    pub maps_enumerated: u64,
}

/// Pre-evaluated grid point of one task/device pair.
#[derive(Clone, Copy, Debug)]
struct Point {
    freq: f64,
    /// Owner transmit power drawn from the budget (`U/eta`).
    owner_power: f64,
    /// Host computing power.
    host_power: f64,
    /// Power cost minus the penalty avoided.
    cost: f64,
}

struct Grid {
    points: Vec<Point>,
    /// Index of the cheapest point (the costs are unimodal along the grid).
    argmin: usize,
}

fn build_grid(scn: &Scenario, bounds: &FeasibilityBounds, k: usize, d: usize, n: usize) -> Grid {
    let home = scn.home(k);
    let dev = &scn.devices[d];
    let freqs: Vec<f64> = if d == home {
        vec![scn.tasks[k].f_min()]
    } else {
        let (lo, hi) = (bounds.f_down[k][d], bounds.f_up[k][d]);
        let n = n.max(2);
        let ratio = (hi / lo).ln();
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo * (ratio * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect()
    };
    let points: Vec<Point> = freqs
        .into_iter()
        .map(|f| {
            let owner_power = if d == home {
                0.0
            } else {
                scn.curve(k, d).power(f).unwrap_or(f64::INFINITY) / scn.eta(k)
            };
            Point {
                freq: f,
                owner_power,
                host_power: if d == MEC { 0.0 } else { dev.compute_power(f) },
                cost: pair_cost(scn, k, d, f),
            }
        })
        .collect();
    let argmin = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map_or(0, |(i, _)| i);
    Grid { points, argmin }
}

struct Search<'a> {
    scn: &'a Scenario,
    /// Offloaded or local tasks of the current map with their grids.
    items: Vec<(usize, usize, &'a Grid)>,
    /// Cheapest point cost of each remaining suffix, for pruning.
    suffix_min: Vec<f64>,
    f_res: Vec<f64>,
    p_res: Vec<f64>,
    chosen: Vec<usize>,
    best_cost: f64,
    best: Option<Vec<(usize, usize, f64)>>,
}

impl Search<'_> {
    fn f_tol(&self, d: usize) -> f64 {
        REL_TOL * self.scn.devices[d].f_max
    }

    fn p_tol(&self, d: usize) -> f64 {
        REL_TOL * self.scn.devices[d].p_m()
    }

    fn fits(&self, k: usize, d: usize, p: &Point) -> bool {
        let home = self.scn.home(k);
        p.freq <= self.f_res[d] + self.f_tol(d)
            && (d == MEC || p.host_power <= self.p_res[d] + self.p_tol(d))
            && (d == home || p.owner_power <= self.p_res[home] + self.p_tol(home))
    }

    fn apply(&mut self, k: usize, d: usize, p: &Point, sign: f64) {
        let home = self.scn.home(k);
        self.f_res[d] -= sign * p.freq;
        if d != MEC {
            self.p_res[d] -= sign * p.host_power;
        }
        if d != home {
            self.p_res[home] -= sign * p.owner_power;
        }
    }

    fn record(&mut self, cost: f64) {
        if cost < self.best_cost {
            self.best_cost = cost;
            self.best = Some(
                self.items
                    .iter()
                    .zip(&self.chosen)
                    .map(|(&(k, d, g), &i)| (k, d, g.points[i].freq))
                    .collect(),
            );
        }
    }

    fn dfs(&mut self, depth: usize, cost: f64) {
        if depth == self.items.len() {
            self.record(cost);
            return;
        }
        if cost + self.suffix_min[depth] >= self.best_cost {
            return;
        }
        let (k, d, grid) = self.items[depth];
        if depth + 1 == self.items.len() {
            if let Some(i) = self.best_last(k, d, grid) {
                self.chosen[depth] = i;
                self.record(cost + grid.points[i].cost);
            }
            return;
        }
        for i in 0..grid.points.len() {
            let p = grid.points[i];
            if !self.fits(k, d, &p) {
                continue;
            }
            self.apply(k, d, &p, 1.0);
            self.chosen[depth] = i;
            self.dfs(depth + 1, cost + p.cost);
            self.apply(k, d, &p, -1.0);
        }
    }

    /// Cheapest feasible point of the last task. Capacity and host power
    /// bound the frequency from above, the owner's power from below, and the
    /// cost is unimodal, so the answer is the clamped unconstrained argmin.
    fn best_last(&self, k: usize, d: usize, grid: &Grid) -> Option<usize> {
        let home = self.scn.home(k);
        let pts = &grid.points;
        let hi = pts.partition_point(|p| {
            p.freq <= self.f_res[d] + self.f_tol(d)
                && (d == MEC || p.host_power <= self.p_res[d] + self.p_tol(d))
        });
        let lo = if d == home {
            0
        } else {
            pts.partition_point(|p| p.owner_power > self.p_res[home] + self.p_tol(home))
        };
        if lo >= hi {
            return None;
        }
        let i = grid.argmin.clamp(lo, hi - 1);
        self.fits(k, d, &pts[i]).then_some(i)
    }
}

/// Hands the unused edge capacity to the tasks hosted there, never lowering
/// a frequency. Edge costs are convex and decreasing, so the optimal split
/// equalizes marginal cost across the tasks that receive a share; the level
/// is found by bisection.
fn fill_edge_capacity(scn: &Scenario, bounds: &FeasibilityBounds, sol: &mut [(usize, usize, f64)]) {
    let cap = scn.devices[MEC].f_max;
    let idx: Vec<usize> = (0..sol.len()).filter(|&i| sol[i].1 == MEC).collect();
    let slack = cap - idx.iter().map(|&i| sol[i].2).sum::<f64>();
    if idx.is_empty() || slack <= REL_TOL * cap {
        return;
    }
    let marginal = |k: usize, f: f64| {
        let d1 = scn.curve(k, MEC).derivatives(f).map_or(f64::NEG_INFINITY, |d| d.0);
        -scn.tasks[k].power_price / scn.eta(k) * d1
    };
    // Frequency at which a task's marginal saving drops to `level`.
    let reach = |k: usize, lo: f64, level: f64| {
        let hi = bounds.f_up[k][MEC].min(lo + slack);
        if marginal(k, lo) <= level {
            return lo;
        }
        if marginal(k, hi) >= level {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if marginal(k, m) > level {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let base: Vec<f64> = idx.iter().map(|&i| sol[i].2).collect();
    let total = |level: f64| -> f64 {
        idx.iter()
            .zip(&base)
            .map(|(&i, &g)| reach(sol[i].0, g, level) - g)
            .sum()
    };
    let top = idx
        .iter()
        .zip(&base)
        .map(|(&i, &g)| marginal(sol[i].0, g))
        .fold(0.0, f64::max);
    if !(top.is_finite() && top > 0.0) {
        return;
    }
    // Geometric bisection on the level so that the handed-out total stays
    // within the slack.
    let (mut lo, mut hi) = (top * 1e-30, top);
    if total(lo) <= slack {
        hi = lo;
    }
    for _ in 0..200 {
        if hi <= lo {
            break;
        }
        let m = (lo * hi).sqrt();
        if total(m) > slack {
            lo = m;
        } else {
            hi = m;
        }
    }
    let freqs: Vec<f64> = idx
        .iter()
        .zip(&base)
        .map(|(&i, &g)| reach(sol[i].0, g, hi))
        .collect();
    for (&i, f) in idx.iter().zip(freqs) {
        sol[i].2 = f;
    }
}

fn solution_cost(scn: &Scenario, sol: &[(usize, usize, f64)]) -> f64 {
    sol.iter().map(|&(k, d, f)| pair_cost(scn, k, d, f)).sum()
}

/// Exhaustive search over every decision map with frequencies on a
/// per-pair logarithmic grid. Local execution always uses the minimum
/// frequency, which is cheapest and least demanding. The best grid point of
/// each map then receives any unused edge capacity, which a grid cannot hit
/// exactly.
pub fn brute_force(scn: &Scenario, grid_points: usize) -> Result<BruteForce> {
    let n = scn.n_tasks();
    if n > BRUTE_FORCE_MAX_TASKS {
        return Err(Error::InstanceTooLarge {
            got: n,
            max: BRUTE_FORCE_MAX_TASKS,
        });
    }
    let bounds = feasibility_bounds(scn);
    let options: Vec<Vec<usize>> = (0..n).map(|k| bounds.feasible_devices(k).collect()).collect();
    let grids: Vec<Vec<Grid>> = (0..n)
        .map(|k| {
            options[k]
                .iter()
                .map(|&d| build_grid(scn, &bounds, k, d, grid_points))
                .collect()
        })
        .collect();

    let mut best_cost = 0.0;
    let mut best: Vec<(usize, usize, f64)> = Vec::new();
    let mut maps = 0u64;
    // Odometer over choices: 0 = unassigned, c >= 1 = options[k][c - 1].
    let mut choice = vec![0usize; n];
    loop {
        maps += 1;
        let mut items: Vec<(usize, usize, &Grid)> = (0..n)
            .filter(|&k| choice[k] > 0)
            .map(|k| (k, options[k][choice[k] - 1], &grids[k][choice[k] - 1]))
            .collect();
        // Fixed-frequency (local) placements first keeps the branching low.
        items.sort_by_key(|&(k, _, g)| (g.points.len(), k));
        let mut suffix_min = vec![0.0; items.len() + 1];
        for i in (0..items.len()).rev() {
            let g = items[i].2;
            suffix_min[i] = suffix_min[i + 1] + g.points[g.argmin].cost;
        }
        if !items.is_empty() && suffix_min[0] < best_cost {
            let mut s = Search {
                scn,
                chosen: vec![0; items.len()],
                items,
                suffix_min,
                f_res: scn.devices.iter().map(|d| d.f_max).collect(),
                p_res: scn
                    .devices
                    .iter()
                    .map(|d| if d.id == MEC { 0.0 } else { d.p_m() })
                    .collect(),
                best_cost: f64::INFINITY,
                best: None,
            };
            s.dfs(0, 0.0);
            if let Some(mut b) = s.best {
                fill_edge_capacity(scn, &bounds, &mut b);
                let cost = solution_cost(scn, &b);
                if cost < best_cost {
                    best_cost = cost;
                    best = b;
                }
            }
        }

        let mut i = n;
        loop {
            if i == 0 {
                let mut decisions = vec![None; n];
                for (k, d, f) in best {
                    decisions[k] = Some((d, f));
                }
                return Ok(BruteForce {
                    assignment: Assignment::from_decisions(scn, &decisions),
                    maps_enumerated: maps,
                });
            }
            i -= 1;
            if choice[i] < options[i].len() {
                choice[i] += 1;
                break;
            }
            choice[i] = 0;
        }
    }
}
