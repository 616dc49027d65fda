//! Minimal library walkthrough: load a preset, report its reproduction
//! number, simulate a year, and locate the infection peak.

use epivax_core::models::{preset_scenario, simulate, Compartment};
use epivax_core::reproduction::{peak, r0_baseline};

fn main() -> epivax_core::Result<()> {
    let scenario = preset_scenario("epidemic")?;
    println!("R0 = {}", r0_baseline(&scenario.params)?);

    let trajectory = simulate(&scenario, 0.05)?;
    let (t, infected) = peak(&trajectory, Compartment::IH)?;
    println!("peak of {infected:.0} infected on day {t:.1}");
    Ok(())
}
