//! Quasi-potential of a cubic drift against direct minimization of the action.
//!
//! `cargo run --release --example quasi_potential`

use smallnoise::landscape::{action_oracle, quasi_potential_1d};
use smallnoise::numerics::Grid1D;

fn main() -> smallnoise::Result<()> {
    let b = |y: f64| -y * y * y;
    let qp = quasi_potential_1d(&b, 1.0, Grid1D::new(-2.0, 2.0, 801)?)?;
    for x in [0.25, 0.5, 1.0, 1.5] {
        let act = action_oracle(&b, 1.0, x, &[2.0, 5.0, 10.0], 120, 3, 1)?;
        println!(
            "x {x:.2}: quasi-potential {:.4} (x^4/2 = {:.4}), action {:.4} at T = {}",
            qp.value_at(x),
            x.powi(4) / 2.0,
            act.value,
            act.horizon
        );
    }
    Ok(())
}
