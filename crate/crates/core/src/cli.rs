//! Config-driven command line: each command reads one experiment file, runs
//! the library and writes CSV/JSON artifacts plus a `manifest.json` that
//! hashes every emitted file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::ergodic::{empirical_measure, ergodic_cost, OccupationHistogram};
use crate::error::{ensure, Error, Result};
use crate::hjb::{solve_ladder, HjbOptions};
use crate::landscape::{analyze, gibbs_quadrature, laplace_partition};
use crate::problem::{from_json_str, Problem, ProblemConfig};
use crate::sde::{simulate, ControlInput, SimConfig};
use crate::tunnel::{build_rate_matrix, simulate_chain};
use crate::verify::{
    applicable, read_jsonl, run_check, summary_table, verify_chain_limit, verify_value_and_selection,
    write_jsonl, write_summary_csv, CheckOverrides, CheckParams, Status, VerificationReport, CHECKS,
};

/// Environment variable that overrides the default output directory.
pub const OUT_ENV: &str = "SMALLNOISE_OUT";

#[derive(Debug, Parser)]
#[command(name = "smallnoise", version, about = "Small-noise ergodic control experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `$SMALLNOISE_OUT` or `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Comma-separated ε ladder replacing the config's.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Monte Carlo paths, ergodic cost and occupation histogram.
    Simulate,
    /// Ergodic HJB over the ε ladder.
    Hjb,
    /// Critical points, deep wells, Laplace constants and Gibbs quadrature.
    Landscape,
    /// Tunneling chain, a chain path and the chain-vs-SDE comparison.
    Tunnel,
    /// Run one named check, or `all`.
    Verify { name: String },
    /// Start dependence of the noiseless flow against noisy runs.
    SelectionDemo,
    /// Merge the JSON-lines reports of an output directory.
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub eps: f64,
    pub dt: f64,
    pub horizon: f64,
    pub batch: usize,
    pub x0: f64,
    #[serde(default = "ten")]
    pub record_every: usize,
    #[serde(default = "half")]
    pub burn_in: f64,
    /// Constant action applied throughout.
    #[serde(default)]
    pub control: f64,
    #[serde(default = "sixty")]
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjbBlock {
    pub eps: Vec<f64>,
    #[serde(default)]
    pub max_sweeps: Option<usize>,
    #[serde(default)]
    pub improvement_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeBlock {
    pub eps: Vec<f64>,
    #[serde(default = "four_hundred")]
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunnelBlock {
    pub eps: f64,
    /// Chain horizon in rescaled time.
    pub horizon: f64,
    #[serde(default)]
    pub start: usize,
    /// SDE side of the comparison; omitted means chain only.
    #[serde(default)]
    pub sde: Option<CheckOverrides>,
}

/// One experiment: a problem plus the blocks its commands read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub simulate: Option<SimulateBlock>,
    #[serde(default)]
    pub hjb: Option<HjbBlock>,
    #[serde(default)]
    pub landscape: Option<LandscapeBlock>,
    #[serde(default)]
    pub tunnel: Option<TunnelBlock>,
    /// Per-check overrides of the default settings.
    #[serde(default)]
    pub verify: BTreeMap<String, CheckOverrides>,
    #[serde(default)]
    pub selection: Option<CheckOverrides>,
}

fn ten() -> usize {
    10
}
fn sixty() -> usize {
    60
}
fn four_hundred() -> usize {
    400
}
fn half() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = from_json_str(text)?;
        for name in cfg.verify.keys() {
            ensure(CHECKS.contains(&name.as_str()), || Error::Config(format!("verify.{name}: unknown check")))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn block<'a, T>(b: &'a Option<T>, command: &str, field: &str) -> Result<&'a T> {
        b.as_ref().ok_or_else(|| Error::Config(format!("command `{command}` needs a `{field}` block")))
    }

    /// Check settings: defaults, then the config's overrides, then the global seed and ε override.
    pub fn check_params(&self, name: &str, eps: Option<&[f64]>) -> Result<CheckParams> {
        let mut p = CheckParams::defaults(name)?;
        p.seed = self.seed;
        if let Some(o) = self.verify.get(name) {
            p = o.apply(p);
        }
        if let Some(e) = eps {
            p.eps = e.to_vec();
        }
        Ok(p)
    }
}

/// Files written by a command, hashed into the manifest.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn manifest(&self, command: &str, seed: u64, config: &ExperimentConfig, extra: serde_json::Value) -> Result<()> {
        let mut files = Vec::new();
        for name in &self.files {
            let bytes = std::fs::read(self.dir.join(name))?;
            files.push(json!({"path": name, "bytes": bytes.len(), "sha256": hex::encode(Sha256::digest(&bytes))}));
        }
        let m = json!({
            "tool": "smallnoise",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": seed,
            "config": config,
            "run": extra,
            "files": files,
        });
        let mut w = BufWriter::new(File::create(self.dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &m)?;
        writeln!(w)?;
        Ok(())
    }
}

/// Content hash of a file, as recorded in manifests.
pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn eps_tag(eps: f64) -> String {
    format!("{eps}").replace('.', "p")
}

/// Outcome of a command: artifacts written, and whether any check failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub out: PathBuf,
    pub failures: usize,
}

/// Runs `cli` and returns the outcome; `main` maps it to an exit code.
pub fn run(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Command::Report = cli.command {
        let out = output_dir(cli, None);
        let failures = report(&out)?;
        return Ok(Outcome { out, failures });
    }
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let problem = cfg.problem.build()?;
    let out = output_dir(cli, cfg.out.as_deref());
    let mut art = Artifacts::new(&out)?;
    let eps = cli.eps.as_deref();
    if let Some(e) = eps {
        ensure(!e.is_empty() && e.iter().all(|x| *x > 0.0 && x.is_finite()), || {
            Error::Parameter("--eps needs positive values".into())
        })?;
    }
    let mut failures = 0;
    let command = match &cli.command {
        Command::Simulate => {
            cmd_simulate(&cfg, &problem, eps, &mut art)?;
            "simulate".to_string()
        }
        Command::Hjb => {
            cmd_hjb(&cfg, &problem, eps, &mut art)?;
            "hjb".to_string()
        }
        Command::Landscape => {
            cmd_landscape(&cfg, &problem, eps, &mut art)?;
            "landscape".to_string()
        }
        Command::Tunnel => {
            cmd_tunnel(&cfg, &problem, eps, &mut art)?;
            "tunnel".to_string()
        }
        Command::Verify { name } => {
            let reports = cmd_verify(&cfg, &problem, name, eps, &mut art)?;
            print!("{}", summary_table(&reports));
            failures = reports.iter().filter(|r| r.status.is_failure()).count();
            format!("verify {name}")
        }
        Command::SelectionDemo => {
            let rep = cmd_selection(&cfg, &problem, eps, &mut art)?;
            failures = rep.status.is_failure() as usize;
            "selection-demo".to_string()
        }
        Command::Report => unreachable!(),
    };
    art.manifest(&command, cfg.seed, &cfg, json!({"threads": cli.threads, "eps_override": cli.eps}))?;
    Ok(Outcome { out, failures })
}

fn output_dir(cli: &Cli, from_config: Option<&Path>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| from_config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn cmd_simulate(cfg: &ExperimentConfig, problem: &Problem, eps: Option<&[f64]>, art: &mut Artifacts) -> Result<()> {
    let b = ExperimentConfig::block(&cfg.simulate, "simulate", "simulate")?;
    let e = eps.map_or(b.eps, |l| l[0]);
    let sim = SimConfig::new(b.dt, b.horizon, b.batch, cfg.seed, b.x0).with_record_every(b.record_every);
    let sigma = if e > 0.0 { problem.sigma.build_perturbation(e)? } else { problem.sigma.clone() };
    let paths = simulate(&problem.drift, &sigma, ControlInput::Constant(b.control), &sim)?;
    paths.check_divergence()?;
    let est = ergodic_cost(&paths, &problem.cost, b.burn_in)?;
    let g = problem.grid;
    let hist = empirical_measure(&paths, &OccupationHistogram::uniform_edges(g.lo, g.hi, b.bins), b.burn_in)?;
    art.write("paths.csv", |w| paths.write_csv(w))?;
    art.write("histogram.csv", |w| hist.write_csv(w))?;
    let finals = paths.final_values();
    let (mean, se) = crate::numerics::mean_se(&finals);
    art.json(
        "simulate.json",
        &json!({
            "seed": cfg.seed, "eps": e, "ergodic": est.to_json(), "final_mean": mean, "final_se": se,
            "diverged": paths.diverged_count(), "out_of_range": hist.out_of_range,
        }),
    )
}

fn cmd_hjb(cfg: &ExperimentConfig, problem: &Problem, eps: Option<&[f64]>, art: &mut Artifacts) -> Result<()> {
    let b = ExperimentConfig::block(&cfg.hjb, "hjb", "hjb")?;
    let ladder = eps.map_or_else(|| b.eps.clone(), <[f64]>::to_vec);
    let mut opts = HjbOptions::default();
    opts.max_sweeps = b.max_sweeps.unwrap_or(opts.max_sweeps);
    opts.improvement_tol = b.improvement_tol.unwrap_or(opts.improvement_tol);
    let sols = solve_ladder(&problem.drift, &problem.sigma, &ladder, &problem.cost, problem.grid, &problem.set, &opts)?;
    let mut rows = Vec::new();
    for s in &sols {
        let name = format!("hjb_eps_{}.csv", eps_tag(s.eps));
        art.write(&name, |w| s.write_csv(w))?;
        let mut j = s.to_json();
        j["rho_history"] = json!(s.rho_history);
        j["csv"] = json!(name);
        rows.push(j);
    }
    art.json("hjb.json", &json!({"seed": cfg.seed, "solutions": rows}))
}

fn cmd_landscape(cfg: &ExperimentConfig, problem: &Problem, eps: Option<&[f64]>, art: &mut Artifacts) -> Result<()> {
    let b = ExperimentConfig::block(&cfg.landscape, "landscape", "landscape")?;
    let v = problem.potential.as_ref().ok_or_else(|| Error::Config("landscape needs a `potential` block".into()))?;
    let ladder = eps.map_or_else(|| b.eps.clone(), <[f64]>::to_vec);
    let decomp = analyze(v)?;
    let mut rows = Vec::new();
    for &e in &ladder {
        let lap = laplace_partition(&decomp, e)?;
        let gibbs = gibbs_quadrature(v, e, crate::model::Landscape1D::interval(v), b.bins)?;
        let name = format!("gibbs_eps_{}.csv", eps_tag(e));
        art.write(&name, |w| gibbs.histogram.write_csv(w))?;
        let masses = gibbs.well_masses(&decomp);
        rows.push(json!({
            "eps": e, "C": lap.c, "log_partition_laplace": lap.log_partition,
            "log_partition_lambda_form": lap.log_partition_lambda_form, "laplace_masses": lap.masses,
            "log_partition_quadrature": gibbs.log_partition, "quadrature_masses": masses,
            "ratio_minus_one": (gibbs.log_partition - lap.log_partition).exp() - 1.0,
            "lambda_form_log_ratio": gibbs.log_partition - lap.log_partition_lambda_form, "csv": name,
        }));
    }
    art.json("landscape.json", &json!({"seed": cfg.seed, "decomposition": decomp.to_json(), "laplace": rows}))
}

fn cmd_tunnel(cfg: &ExperimentConfig, problem: &Problem, eps: Option<&[f64]>, art: &mut Artifacts) -> Result<()> {
    let b = ExperimentConfig::block(&cfg.tunnel, "tunnel", "tunnel")?;
    let v = problem.potential.as_ref().ok_or_else(|| Error::Config("tunnel needs a `potential` block".into()))?;
    let e = eps.map_or(b.eps, |l| l[0]);
    let decomp = analyze(v)?;
    let chain = build_rate_matrix(&decomp, &laplace_partition(&decomp, e)?)?;
    let mut cj = chain.to_json();
    cj["eps"] = json!(e);
    cj["seed"] = json!(cfg.seed);
    cj["mean_holding_rescaled"] = json!(chain.mean_holding());
    cj["mean_holding_physical"] = json!(chain.physical_mean_holding(e));
    art.json("chain.json", &cj)?;
    let path = simulate_chain(&chain, b.start, b.horizon, cfg.seed)?;
    art.write("chain_path.csv", |w| {
        writeln!(w, "entry_time,state,x")?;
        for (t, s) in path.entry_times.iter().zip(&path.states) {
            writeln!(w, "{},{},{}", t, s, chain.states[*s])?;
        }
        Ok(())
    })?;
    let chain_occ = path.occupation(chain.len());
    let mut comparison = json!({"eps": e, "chain_occupation": chain_occ, "mu": chain.mu, "chain_jumps": path.jumps()});
    if let Some(o) = &b.sde {
        let mut p = o.apply(CheckParams::defaults("chain_limit")?);
        p.seed = o.seed.unwrap_or(cfg.seed);
        p.eps = vec![e];
        let rep = verify_chain_limit(problem, &p)?;
        comparison["sde"] = rep.details.clone();
        comparison["sde_status"] = json!(rep.status);
    }
    art.json("comparison.json", &comparison)
}

/// Runs `name` (or every check when `all`) and writes `reports.jsonl` and summaries.
fn cmd_verify(
    cfg: &ExperimentConfig,
    problem: &Problem,
    name: &str,
    eps: Option<&[f64]>,
    art: &mut Artifacts,
) -> Result<Vec<VerificationReport>> {
    let opts = HjbOptions::default();
    let mut reports = Vec::new();
    if name == "all" {
        for check in CHECKS {
            let params = cfg.check_params(check, eps)?;
            if !applicable(check, problem) {
                let mut r = skipped(check, &params);
                r.notes.push("not applicable to this problem".into());
                reports.push(r);
                continue;
            }
            reports.push(run_check(check, problem, &params, &opts).unwrap_or_else(|e| {
                let mut r = skipped(check, &params);
                r.status = Status::Fail;
                r.notes.push(format!("error: {e}"));
                r
            }));
        }
    } else {
        ensure(CHECKS.contains(&name), || {
            Error::Config(format!("unknown check `{name}`; expected one of {} or `all`", CHECKS.join(", ")))
        })?;
        reports.push(run_check(name, problem, &cfg.check_params(name, eps)?, &opts)?);
    }
    art.write("reports.jsonl", |w| write_jsonl(&reports, w))?;
    art.write("summary.csv", |w| write_summary_csv(&reports, w))?;
    Ok(reports)
}

fn skipped(name: &str, p: &CheckParams) -> VerificationReport {
    VerificationReport {
        name: name.into(),
        statement: String::new(),
        measured: f64::NAN,
        bound: f64::NAN,
        tolerance: String::new(),
        status: Status::Skipped,
        runtime_s: 0.0,
        seeds: vec![p.seed],
        details: json!({}),
        notes: Vec::new(),
    }
}

fn cmd_selection(cfg: &ExperimentConfig, problem: &Problem, eps: Option<&[f64]>, art: &mut Artifacts) -> Result<VerificationReport> {
    let mut p = CheckParams::defaults("value_selection")?;
    p.seed = cfg.seed;
    if let Some(o) = &cfg.selection {
        p = o.apply(p);
    }
    if let Some(e) = eps {
        p.eps = e.to_vec();
    }
    let rep = verify_value_and_selection(problem, &p, &HjbOptions::default())?;
    art.write("selection.csv", |w| {
        // ε = 0 rows are the noiseless flows.
        writeln!(w, "eps,start,rho,se")?;
        let wells = rep.details["wells"].as_array().cloned().unwrap_or_default();
        for (x, c) in wells.iter().zip(rep.details["noiseless"].as_array().into_iter().flatten()) {
            writeln!(w, "0,{},{},{}", x, c["rho"], c["se"])?;
        }
        for row in rep.details["per_eps"].as_array().into_iter().flatten() {
            for (x, c) in wells.iter().zip(row["per_start"].as_array().into_iter().flatten()) {
                writeln!(w, "{},{},{},{}", row["eps"], x, c["rho"], c["se"])?;
            }
        }
        Ok(())
    })?;
    art.write("selection.jsonl", |w| write_jsonl(std::slice::from_ref(&rep), w))?;
    Ok(rep)
}

/// Merges every `*.jsonl` report file in `dir` into `summary.csv` and
/// `summary.txt`; returns the number of failing reports.
pub fn report(dir: &Path) -> Result<usize> {
    let manifest = dir.join("manifest.json");
    ensure(manifest.is_file(), || Error::Config(format!("no manifest.json in {}", dir.display())))?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    names.sort();
    let mut reports = Vec::new();
    for n in &names {
        reports.extend(read_jsonl(BufReader::new(File::open(n)?))?);
    }
    let table = summary_table(&reports);
    print!("{table}");
    let mut csv = BufWriter::new(File::create(dir.join("summary.csv"))?);
    write_summary_csv(&reports, &mut csv)?;
    csv.flush()?;
    std::fs::write(dir.join("summary.txt"), &table)?;
    Ok(reports.iter().filter(|r| r.status.is_failure()).count())
}

/// Entry point of the binary: 0 success, 1 failing checks, 2 error.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) if o.failures == 0 => ExitCode::SUCCESS,
        Ok(o) => {
            eprintln!("{} check(s) failed; see {}", o.failures, o.out.display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
