//! Which well the optimal cost settles on as the noise vanishes.
//!
//! The noiseless flow keeps whatever well it starts in, so its cost depends on the
//! start. With noise the long-run cost becomes start-independent once the horizon
//! exceeds the switching time.
//!
//! `cargo run --release --example selection_demo`

use std::path::PathBuf;

use smallnoise::cli::ExperimentConfig;
use smallnoise::hjb::HjbOptions;
use smallnoise::verify::{verify_value_and_selection, CheckParams};

fn main() -> smallnoise::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/double_well.json");
    let problem = ExperimentConfig::load(&path)?.problem.build()?;
    let mut p = CheckParams::defaults("value_selection")?;
    p.eps = vec![0.6, 0.45];
    p.horizon = 2e3;
    p.batch = 64;
    let rep = verify_value_and_selection(&problem, &p, &HjbOptions::default())?;
    println!("chain value {}", rep.details["rho_chain"]);
    println!("noiseless per start {}", rep.details["noiseless"]);
    for row in rep.details["per_eps"].as_array().into_iter().flatten() {
        println!("eps {}: hjb {:.4}, per start {}", row["eps"], row["rho_hjb"].as_f64().unwrap_or(f64::NAN), row["per_start"]);
    }
    println!("status {}", rep.status.label());
    Ok(())
}
