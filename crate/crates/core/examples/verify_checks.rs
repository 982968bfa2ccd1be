//! Runs the checks that apply to a bundled config and prints the summary.
//!
//! `cargo run --release --example verify_checks -- configs/errorbound2.json`

use std::path::PathBuf;

use smallnoise::cli::ExperimentConfig;
use smallnoise::hjb::HjbOptions;
use smallnoise::verify::{applicable, run_check, summary_table, CHECKS};

fn main() -> smallnoise::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/errorbound2.json")
    });
    let cfg = ExperimentConfig::load(&path)?;
    let problem = cfg.problem.build()?;
    let mut reports = Vec::new();
    for name in CHECKS.iter().filter(|n| applicable(n, &problem)) {
        // The long exit and tunneling runs are left to the CLI.
        if ["fw_exit", "exit_location", "chain_limit", "value_selection"].contains(name) {
            continue;
        }
        reports.push(run_check(name, &problem, &cfg.check_params(name, None)?, &HjbOptions::default())?);
    }
    print!("{}", summary_table(&reports));
    Ok(())
}
