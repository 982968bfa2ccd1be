//! Well structure of the triple well and the Laplace approximation of its Gibbs law.
//!
//! `cargo run --release --example landscape`

use smallnoise::landscape::{analyze, gibbs_quadrature, laplace_partition};
use smallnoise::model::library::triple_well;

fn main() -> smallnoise::Result<()> {
    let v = triple_well(-3.0, 3.0);
    let d = analyze(&v)?;
    println!("{}", serde_json::to_string_pretty(&d.to_json()).expect("json"));
    for eps in [0.8, 0.6, 0.4] {
        let lap = laplace_partition(&d, eps)?;
        let g = gibbs_quadrature(&v, eps, (-3.0, 3.0), 600)?;
        println!(
            "eps {eps:.1}: ln Z quadrature {:.4}, Laplace {:.4}; well masses {:?} vs {:?}",
            g.log_partition,
            lap.log_partition,
            g.well_masses(&d),
            lap.masses
        );
    }
    Ok(())
}
