mod common;

use coopmec::matching::{
    build_preferences, locally_feasible, next_task, redistribute_frequencies, run, Criterion,
    MatchingState, PreferenceEntry, PreferenceList, TaskStatus,
};
use coopmec::model::{feasibility_bounds, validate_constraints, MEC, REL_TOL};
use coopmec::oracle::{brute_force, DEFAULT_GRID_POINTS};
use common::{rel, seeded, uniform_scenario};

fn list(task: usize, costs: &[f64]) -> PreferenceList {
    PreferenceList {
        task,
        entries: costs
            .iter()
            .enumerate()
            .map(|(d, &cost)| PreferenceEntry {
                device: d,
                freq: 1e9,
                cost,
            })
            .collect(),
    }
}

#[test]
fn max_task_prefers_the_shortest_list_then_the_cheapest_head() {
    let lists = [list(0, &[1.0; 5]), list(1, &[9.0; 3]), list(2, &[10.0])];
    assert_eq!(next_task(&lists, Criterion::MaxTask), Some(2));
    let lists = [list(0, &[5.0, 6.0]), list(1, &[2.0, 7.0])];
    assert_eq!(next_task(&lists, Criterion::MaxTask), Some(1));
}

#[test]
fn min_pw_prefers_the_cheapest_head() {
    let lists = [list(0, &[-10.0]), list(1, &[-30.0, 0.0, 1.0])];
    assert_eq!(next_task(&lists, Criterion::MinPw), Some(1));
    let tied = [list(3, &[-5.0]), list(1, &[-5.0])];
    assert_eq!(next_task(&tied, Criterion::MinPw), Some(1));
}

#[test]
fn preference_lists_are_sorted_and_skip_hopeless_tasks() {
    for seed in 0..50 {
        let scn = seeded(8, seed);
        let b = feasibility_bounds(&scn);
        let lists = build_preferences(&MatchingState::new(&scn), &scn);
        for l in &lists {
            assert!(l.entries.windows(2).all(|w| w[0].cost <= w[1].cost));
            if b.feasible_devices(l.task).next().is_none() {
                assert!(l.is_empty());
            }
        }
    }
}

#[test]
fn matching_a_helper_raises_or_removes_it_for_everyone_else() {
    let mut checked = 0;
    for seed in 0..200 {
        let scn = seeded(8, seed);
        let state = MatchingState::new(&scn);
        let before = build_preferences(&state, &scn);
        let Some((k, e)) = before.iter().find_map(|l| {
            l.entries
                .iter()
                .find(|e| e.device != MEC && e.device != scn.home(l.task))
                .map(|e| (l.task, *e))
        }) else {
            continue;
        };
        let mut next = state.clone();
        next.assign(&scn, k, e.device, e.freq);
        let after = build_preferences(&next, &scn);
        for old in before.iter().filter(|l| l.task != k) {
            let Some(was) = old.entries.iter().find(|x| x.device == e.device) else {
                continue;
            };
            let new = after.iter().find(|l| l.task == old.task).unwrap();
            if let Some(now) = new.entries.iter().find(|x| x.device == e.device) {
                assert!(now.cost >= was.cost - 1e-12 * was.cost.abs(), "seed {seed}");
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn all_locally_feasible_tasks_stay_home() {
    let scn = uniform_scenario(4, 2e7, 1e9, 5e9);
    let out = run(&scn, Criterion::MaxTask);
    for k in 0..4 {
        assert_eq!(out.assignment.device_of(k), Some(scn.home(k)));
    }
    assert_eq!(out.assignment.cost.transmit, 0.0);
    assert_eq!(out.trace.len(), 1);
}

/// Replays the loop through the public API and checks the per-step
/// invariants against the packaged run.
fn replay(scn: &coopmec::Scenario, criterion: Criterion) {
    let mut state = MatchingState::new(scn);
    for k in 0..scn.n_tasks() {
        if locally_feasible(scn, k) {
            state.assign(scn, k, scn.home(k), scn.tasks[k].f_min());
        }
    }
    let seeded_local: Vec<usize> = (0..scn.n_tasks()).filter(|&k| locally_feasible(scn, k)).collect();
    let mut steps = 0;
    loop {
        let lists = build_preferences(&state, scn);
        assert!(lists.iter().all(|l| !seeded_local.contains(&l.task)));
        for l in lists.iter().filter(|l| l.is_empty()) {
            state.status[l.task] = TaskStatus::Abandoned;
        }
        let Some(k) = next_task(&lists, criterion) else { break };
        let head = *lists.iter().find(|l| l.task == k).unwrap().head().unwrap();
        let prev = state.residuals.clone();
        state.assign(scn, k, head.device, head.freq);
        for d in 0..scn.n_devices() {
            assert!(state.residuals.f_res[d] <= prev.f_res[d]);
            assert!(state.residuals.p_res[d] <= prev.p_res[d]);
        }
        steps += 1;
    }
    assert!(steps <= scn.n_tasks());
    let out = run(scn, criterion);
    assert_eq!(out.trace.len(), steps + 1);
    let ours: Vec<_> = state.decisions().iter().map(|d| d.map(|x| x.0)).collect();
    let theirs: Vec<_> = out.assignment.decisions().iter().map(|d| d.map(|x| x.0)).collect();
    assert_eq!(ours, theirs);
}

#[test]
fn matching_invariants_hold_step_by_step() {
    for seed in 0..100 {
        let scn = seeded(10, seed);
        replay(&scn, Criterion::MaxTask);
        replay(&scn, Criterion::MinPw);
    }
}

#[test]
fn final_matching_is_feasible_delay_tight_and_uses_the_whole_edge_server() {
    for seed in 0..200 {
        let scn = seeded(10, seed);
        for crit in [Criterion::MaxTask, Criterion::MinPw] {
            let out = run(&scn, crit);
            let a = &out.assignment;
            assert!(validate_constraints(&scn, a).is_empty(), "seed {seed}");
            for (k, p) in a.placements.iter().enumerate() {
                let Some(p) = p else { continue };
                if p.device == scn.home(k) {
                    continue;
                }
                let t = &scn.tasks[k];
                let r = scn.curve(k, p.device).rate(p.tx_power);
                let elapsed = t.bits / r + t.cycles / p.freq;
                assert!(rel(elapsed, t.deadline) < 1e-9, "seed {seed} task {k}");
            }
            let at_mec: f64 = a
                .placements
                .iter()
                .flatten()
                .filter(|p| p.device == MEC)
                .map(|p| p.freq)
                .sum();
            if out.at_mec() > 0 {
                assert!(rel(at_mec, scn.devices[MEC].f_max) < REL_TOL);
            }
        }
    }
}

#[test]
fn redistribution_examples() {
    let scn = uniform_scenario(3, 2e7, 1e9, 5e9);
    assert_eq!(redistribute_frequencies(&scn, &[(0, 1e9)]), vec![5e9]);
    assert!(redistribute_frequencies(&scn, &[]).is_empty());
    let before = [(0, 1e9), (1, 1.5e9), (2, 0.8e9)];
    let after = redistribute_frequencies(&scn, &before);
    assert!(rel(after.iter().sum(), 5e9) < 1e-15);
    for (&(k, f), &g) in before.iter().zip(&after) {
        assert!(g >= f);
        let curve = scn.curve(k, MEC);
        assert!(curve.power(g).unwrap() <= curve.power(f).unwrap());
    }
}

#[test]
fn small_instances_track_the_exhaustive_optimum() {
    for crit in [Criterion::MaxTask, Criterion::MinPw] {
        let close = (0..100)
            .filter(|&seed| {
                let scn = seeded(3, seed);
                let opt = brute_force(&scn, DEFAULT_GRID_POINTS).unwrap().assignment.cost.total;
                run(&scn, crit).assignment.cost.total <= 1.1 * opt
            })
            .count();
        assert!(close >= 80, "{crit:?}: {close} of 100 within 10%");
    }
}
