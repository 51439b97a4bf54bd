use super::{Scenario, MEC};

/// Static per-pair frequency window and the infeasible device sets.
///
/// All matrices are `N x (N + 1)` and indexed `[task][device]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityBounds {
    /// Largest frequency the device can devote to the task.
    pub f_up: Vec<Vec<f64>>,
    /// Smallest frequency that meets the deadline with the owner's whole
    /// transmit budget (`F/T` for local execution, `+inf` if the upload alone
    /// misses the deadline).
    pub f_down: Vec<Vec<f64>>,
    /// Upload rate at full owner power (`+inf` on the local entry).
    pub rate_max: Vec<Vec<f64>>,
    /// Devices that can never serve the task, ascending.
    pub infeasible: Vec<Vec<usize>>,
}

impl FeasibilityBounds {
    pub fn is_feasible(&self, task: usize, device: usize) -> bool {
        self.infeasible[task].binary_search(&device).is_err()
    }

    /// Devices outside the infeasible set, ascending.
    pub fn feasible_devices(&self, task: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.f_up[task].len()).filter(move |&d| self.is_feasible(task, d))
    }
}

/// Frequency windows and infeasible sets for every task/device pair.
pub fn feasibility_bounds(scn: &Scenario) -> FeasibilityBounds {
    let n = scn.n_tasks();
    let mut f_up = vec![vec![0.0; n + 1]; n];
    let mut f_down = vec![vec![0.0; n + 1]; n];
    let mut rate_max = vec![vec![f64::INFINITY; n + 1]; n];
    let mut infeasible = vec![Vec::new(); n];

    for (k, task) in scn.tasks.iter().enumerate() {
        let home = scn.home(k);
        let owner = &scn.devices[home];
        let budget = owner.eta * owner.p_m();
        for d in 0..=n {
            let dev = &scn.devices[d];
            let upload_ok;
            if d == home {
                f_up[k][d] = dev.f_max.min(dev.power_limited_freq(dev.p_m()));
                f_down[k][d] = task.f_min();
                upload_ok = true;
            } else {
                f_up[k][d] = if d == MEC {
                    dev.f_max
                } else {
                    dev.f_max.min(dev.power_limited_freq(dev.p_m()))
                };
                let curve = scn.curve(k, d);
                let r = curve.rate(budget);
                rate_max[k][d] = r;
                upload_ok = task.deadline > task.bits / r;
                f_down[k][d] = curve.min_freq_for_power(budget);
            }
            if !upload_ok || f_down[k][d] >= f_up[k][d] {
                infeasible[k].push(d);
            }
        }
    }

    FeasibilityBounds {
        f_up,
        f_down,
        rate_max,
        infeasible,
    }
}
