//! Exit times from one well of the double well, on the Freidlin-Wentzell scale.
//!
//! `ε² ln E τ` approaches twice the barrier height, here ½.
//!
//! `cargo run --release --example exit_times`

use smallnoise::model::library::double_well;
use smallnoise::model::{DiffusionSpec, DriftSpec};
use smallnoise::numerics::mean_se;
use smallnoise::sde::{first_exit, ControlInput, ExitSide, SimConfig};

fn main() -> smallnoise::Result<()> {
    let drift = DriftSpec::gradient(double_well(-3.0, 3.0), 1.0);
    for eps in [0.5, 0.4, 0.35] {
        let cfg = SimConfig::new(5e-3, 1e5, 200, 5, 1.0);
        let exits = first_exit(&drift, &DiffusionSpec::scalar(eps), ControlInput::Constant(0.0), (0.0, 3.0), &cfg)?;
        let taus: Vec<f64> = exits.iter().map(|e| e.tau).collect();
        let (m, se) = mean_se(&taus);
        let censored = exits.iter().filter(|e| e.side == ExitSide::Censored).count();
        println!("eps {eps:.2}: E tau = {m:.1} +- {se:.1}, eps^2 ln E tau = {:.4}, censored {censored}", eps * eps * m.ln());
    }
    Ok(())
}
