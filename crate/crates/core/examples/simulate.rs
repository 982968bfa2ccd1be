//! Monte Carlo paths of a controlled double well: ergodic cost and occupation.
//!
//! `cargo run --release --example simulate`

use smallnoise::ergodic::{ergodic_cost, empirical_measure, OccupationHistogram};
use smallnoise::model::library::double_well;
use smallnoise::model::{DiffusionSpec, DriftSpec, RunningCost};
use smallnoise::sde::{simulate, ControlInput, SimConfig};

fn main() -> smallnoise::Result<()> {
    let drift = DriftSpec::gradient(double_well(-3.0, 3.0), 1.0);
    // Running cost (x − 1)² rewards sitting in the right well.
    let cost = RunningCost::separable(vec![1.0, -2.0, 1.0], None, 0.0, 0.0);
    for eps in [0.8, 0.5, 0.3] {
        let cfg = SimConfig::new(1e-2, 400.0, 32, 7, -1.0).with_record_every(5);
        let paths = simulate(&drift, &DiffusionSpec::scalar(eps), ControlInput::Constant(0.0), &cfg)?;
        let est = ergodic_cost(&paths, &cost, 0.25)?;
        let hist = empirical_measure(&paths, &OccupationHistogram::uniform_edges(-3.0, 3.0, 2), 0.25)?;
        println!(
            "eps {eps:.1}: rho = {:.4} +- {:.4}, mass left/right = {:.3}/{:.3}",
            est.rho,
            est.se,
            hist.spatial()[0],
            hist.spatial()[1]
        );
    }
    Ok(())
}
