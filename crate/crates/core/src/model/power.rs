use std::f64::consts::LN_2;

use super::{Link, TaskSpec};
use crate::error::{Error, Result};

/// Exponent above which the delay-tight transmit power is reported as `+inf`.
pub const EXPONENT_SATURATION: f64 = 700.0;

/// Delay-tight transmit power as a function of the serving frequency.
///
/// With the deadline met exactly, a task served at `f` cycles/s has
/// `T - F/f` seconds left for the upload, which fixes the rate
/// `G(f) = D f / (T f - F)`; inverting the AWGN capacity gives the power
/// `H(r) = (sigma^2 / h) (2^(r/B) - 1)`. `U = H o G` is strictly decreasing
/// and strictly convex on `(F/T, inf)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransmitCurve {
    noise_over_gain: f64,
    bandwidth: f64,
    bits: f64,
    cycles: f64,
    deadline: f64,
}

impl TransmitCurve {
    pub fn new(task: &TaskSpec, link: Link) -> Self {
        Self {
            noise_over_gain: link.noise_power / link.gain,
            bandwidth: link.bandwidth,
            bits: task.bits,
            cycles: task.cycles,
            deadline: task.deadline,
        }
    }

    pub fn f_min(&self) -> f64 {
        self.cycles / self.deadline
    }

    fn slack(&self, f: f64) -> Result<f64> {
        let s = self.deadline * f - self.cycles;
        if s > 0.0 && f.is_finite() {
            Ok(s)
        } else {
            Err(Error::Domain {
                freq: f,
                f_min: self.f_min(),
            })
        }
    }

    /// `(ln 2 / B) * G(f)`.
    pub fn exponent(&self, f: f64) -> Result<f64> {
        let s = self.slack(f)?;
        Ok(LN_2 / self.bandwidth * self.bits * f / s)
    }

    /// Upload rate needed for the deadline to be tight at frequency `f`.
    pub fn rate_for(&self, f: f64) -> Result<f64> {
        let s = self.slack(f)?;
        Ok(self.bits * f / s)
    }

    /// Transmit power achieving rate `r`.
    pub fn power_for_rate(&self, r: f64) -> f64 {
        let e = LN_2 / self.bandwidth * r;
        if e > EXPONENT_SATURATION {
            f64::INFINITY
        } else {
            self.noise_over_gain * e.exp_m1()
        }
    }

    /// `U(f)`; saturates to `+inf` once the exponent exceeds
    /// [`EXPONENT_SATURATION`].
    pub fn power(&self, f: f64) -> Result<f64> {
        let e = self.exponent(f)?;
        if e > EXPONENT_SATURATION {
            return Ok(f64::INFINITY);
        }
        Ok(self.noise_over_gain * e.exp_m1())
    }

    /// `(U'(f), U''(f))`.
    pub fn derivatives(&self, f: f64) -> Result<(f64, f64)> {
        let s = self.slack(f)?;
        let e = LN_2 / self.bandwidth * self.bits * f / s;
        if e > EXPONENT_SATURATION {
            return Ok((f64::NEG_INFINITY, f64::INFINITY));
        }
        let d1 = -self.noise_over_gain * LN_2 / self.bandwidth
            * e.exp()
            * self.bits
            * self.cycles
            / (s * s);
        let d2 = -d1 / s
            * (LN_2 * self.bits * self.cycles / (self.bandwidth * s) + 2.0 * self.deadline);
        Ok((d1, d2))
    }

    /// Shannon rate with transmit power `p`.
    pub fn rate(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        self.bandwidth * (p / self.noise_over_gain).ln_1p() / LN_2
    }

    /// Smallest serving frequency that meets the deadline when the upload
    /// may use at most `p` watts of transmit power; `+inf` when the upload
    /// alone already misses the deadline.
    pub fn min_freq_for_power(&self, p: f64) -> f64 {
        let r = self.rate(p);
        let upload = self.bits / r;
        if !(upload < self.deadline) {
            return f64::INFINITY;
        }
        self.cycles / (self.deadline - upload)
    }

    /// Limit of `U(f)` as `f -> inf`.
    pub fn asymptote(&self) -> f64 {
        self.power_for_rate(self.bits / self.deadline)
    }
}

/// `U(f)` for `task` over `link`.
pub fn transmit_power(task: &TaskSpec, link: Link, f: f64) -> Result<f64> {
    TransmitCurve::new(task, link).power(f)
}

/// `(U'(f), U''(f))` for `task` over `link`.
pub fn power_derivatives(task: &TaskSpec, link: Link, f: f64) -> Result<(f64, f64)> {
    TransmitCurve::new(task, link).derivatives(f)
}

/// Per-link objective `a U(x) + b x^nu + c x` minimized over the serving
/// frequency. Both the dual-subgradient primal step and the matching
/// subproblem reduce to this form with different weights.
#[derive(Clone, Copy, Debug)]
pub struct LinkObjective<'a> {
    pub curve: &'a TransmitCurve,
    /// Weight `a` on the transmit power.
    pub tx_weight: f64,
    /// Weight `b` on `x^nu` (host computing power).
    pub compute_weight: f64,
    pub nu: f64,
    /// Weight `c` on `x` (capacity price).
    pub linear: f64,
}

impl LinkObjective<'_> {
    pub fn value(&self, x: f64) -> Result<f64> {
        let u = self.curve.power(x)?;
        let tx = if self.tx_weight == 0.0 { 0.0 } else { self.tx_weight * u };
        Ok(tx + self.compute_weight * x.powf(self.nu) + self.linear * x)
    }

    /// First derivative and its magnitude scale (sum of absolute terms).
    fn slope_scaled(&self, x: f64) -> Result<(f64, f64, f64)> {
        let (d1, d2) = self.curve.derivatives(x)?;
        let tx1 = if self.tx_weight == 0.0 { 0.0 } else { self.tx_weight * d1 };
        let tx2 = if self.tx_weight == 0.0 { 0.0 } else { self.tx_weight * d2 };
        let c1 = self.compute_weight * self.nu * x.powf(self.nu - 1.0);
        let c2 = if self.nu > 1.0 {
            self.compute_weight * self.nu * (self.nu - 1.0) * x.powf(self.nu - 2.0)
        } else {
            0.0
        };
        let g = tx1 + c1 + self.linear;
        let scale = tx1.abs() + c1.abs() + self.linear.abs();
        Ok((g, tx2 + c2, scale))
    }

    pub fn slope(&self, x: f64) -> Result<f64> {
        Ok(self.slope_scaled(x)?.0)
    }

    /// Minimizer over `[lo, hi]` (requires `F/T < lo <= hi`). This is the
    /// unconstrained stationary point clamped into the interval.
    pub fn argmin(&self, lo: f64, hi: f64) -> Result<f64> {
        debug_assert!(lo <= hi);
        let (g_lo, _, _) = self.slope_scaled(lo)?;
        if g_lo >= 0.0 {
            return Ok(lo);
        }
        if !hi.is_finite() {
            return Ok(self.stationary_point().unwrap_or(hi));
        }
        let (g_hi, _, _) = self.slope_scaled(hi)?;
        if g_hi <= 0.0 {
            return Ok(hi);
        }
        Ok(self.newton_bisect(lo, hi))
    }

    /// The unique root of the slope on `(F/T, inf)`, or `None` when the slope
    /// stays negative (e.g. no compute cost and no capacity price).
    pub fn stationary_point(&self) -> Option<f64> {
        let f_min = self.curve.f_min();
        let lo = f_min * (1.0 + 1e-12);
        let mut hi = 2.0 * f_min;
        for _ in 0..1100 {
            match self.slope_scaled(hi) {
                Ok((g, _, _)) if g > 0.0 => return Some(self.newton_bisect(lo, hi)),
                Ok(_) => {}
                Err(_) => return None,
            }
            hi *= 2.0;
            if !hi.is_finite() {
                return None;
            }
        }
        None
    }

    /// Newton iteration safeguarded by a sign-change bracket `[lo, hi]`.
    fn newton_bisect(&self, mut lo: f64, mut hi: f64) -> f64 {
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (g, dg, scale) = match self.slope_scaled(x) {
                Ok(v) => v,
                Err(_) => {
                    lo = x;
                    x = 0.5 * (lo + hi);
                    continue;
                }
            };
            if g.abs() <= 1e-13 * scale {
                return x;
            }
            if g < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 1e-15 * hi {
                return 0.5 * (lo + hi);
            }
            let newton = x - g / dg;
            x = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }
}
