//! Ergodic HJB for the linear-quadratic problem against the Riccati value.
//!
//! `cargo run --release --example hjb_lq`

use smallnoise::hjb::{solve_ladder, HjbOptions};
use smallnoise::model::{ControlSet, DiffusionSpec, DriftSpec, RunningCost};
use smallnoise::numerics::Grid1D;

fn main() -> smallnoise::Result<()> {
    // dx = (−x + u)dt + ε dW, cost x² + u².
    let drift = DriftSpec::linear(-1.0, 1.0, 0.0);
    let cost = RunningCost::separable(vec![0.0, 0.0, 1.0], None, 1.0, 0.0);
    let set = ControlSet::uniform(-3.0, 3.0, 33)?;
    let grid = Grid1D::new(-4.0, 4.0, 801)?;
    let ladder = [0.5, 0.3, 0.1];
    let sols = solve_ladder(&drift, &DiffusionSpec::zero(1), &ladder, &cost, grid, &set, &HjbOptions::default())?;
    for s in &sols {
        let riccati = s.eps * s.eps * (2f64.sqrt() - 1.0);
        let mid = grid.n / 2;
        println!(
            "eps {:.2}: rho {:.5} (Riccati {:.5}), sweeps {}, u*(1) = {:.3}",
            s.eps,
            s.rho,
            riccati,
            s.sweeps,
            s.law.barycenter(mid + 100)
        );
    }
    Ok(())
}
