//! Transmit power needed to offload one task as the serving CPU speeds up.
//!
//! The faster the host computes, the more of the deadline is left for the
//! upload, so the required rate and power fall toward an asymptote.

use coopmec::model::{power_derivatives, transmit_power, Link, TaskSpec, TransmitCurve};

fn main() -> coopmec::Result<()> {
    let task = TaskSpec {
        id: 1,
        cycles: 1e7,
        bits: 1e5,
        deadline: 0.02,
        penalty: 40.0,
        power_price: 1.0,
    };
    let link = Link {
        gain: 1e-10,
        bandwidth: 2e6,
        noise_power: 7.96e-15,
    };
    let curve = TransmitCurve::new(&task, link);
    println!("minimum serving frequency {:.3e} cycles/s", task.f_min());
    println!("{:>12} {:>12} {:>14} {:>14}", "f (Hz)", "U (W)", "U'", "U''");
    for f in [6e8, 8e8, 1e9, 2e9, 5e9, 2e10] {
        let u = transmit_power(&task, link, f)?;
        let (d1, d2) = power_derivatives(&task, link, f)?;
        println!("{f:>12.3e} {u:>12.5e} {d1:>14.5e} {d2:>14.5e}");
    }
    println!("asymptote as f grows: {:.5e} W", curve.asymptote());
    Ok(())
}
