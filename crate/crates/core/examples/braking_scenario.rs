//! Closed-loop braking with honest, inflated and noisy depth perception.

use lensdepth::scenario::{run_scenario, write_tick_csv, ScenarioConfig};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = ScenarioConfig::default();
    for ratio in [1.0, 1.2, 1.5, 2.0] {
        let run = run_scenario(&base.with_ratio(ratio))?;
        println!("ratio {ratio}: {}", run.outcome);
    }

    let noisy = ScenarioConfig {
        noise_sigma_m: 0.5,
        seed: 7,
        ..base
    };
    let run = run_scenario(&noisy)?;
    println!("sigma 0.5 seed 7: {} after {} ticks", run.outcome, run.ticks.len());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("ticks.csv");
    write_tick_csv(&run, std::fs::File::create(&path)?)?;
    let text = std::fs::read_to_string(&path)?;
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
