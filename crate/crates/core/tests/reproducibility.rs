//! Seeded reruns, long-run statistics and checks on the bundled configs.

use std::path::PathBuf;

use smallnoise::cli::ExperimentConfig;
use smallnoise::ergodic::{empirical_measure, OccupationHistogram};
use smallnoise::hjb::HjbOptions;
use smallnoise::landscape::{analyze, gibbs_quadrature, laplace_partition};
use smallnoise::model::library::{asymmetric_saddles, double_well};
use smallnoise::model::{DiffusionSpec, DriftSpec};
use smallnoise::problem::Problem;
use smallnoise::sde::{simulate, ControlInput, SimConfig};
use smallnoise::verify::{run_check, Status, VerificationReport};

fn bundled(name: &str) -> (ExperimentConfig, Problem) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let cfg = ExperimentConfig::load(&path).unwrap();
    let p = cfg.problem.build().unwrap();
    (cfg, p)
}

fn without_runtime(mut r: VerificationReport) -> VerificationReport {
    r.runtime_s = 0.0;
    r
}

#[test]
fn reports_rerun_bit_exactly() {
    let (cfg, prob) = bundled("errorbound2.json");
    for name in ["comparison", "flat_error"] {
        let p = cfg.check_params(name, None).unwrap();
        let a = run_check(name, &prob, &p, &HjbOptions::default()).unwrap();
        let b = run_check(name, &prob, &p, &HjbOptions::default()).unwrap();
        assert_eq!(without_runtime(a.clone()), without_runtime(b));
        assert_eq!(a.seeds, (0..p.eps.len() as u64).map(|k| p.seed + k).collect::<Vec<_>>());
    }
}

#[test]
fn moment_bound_holds_down_to_small_noise() {
    let (cfg, lq) = bundled("lq.json");
    let p = cfg.check_params("moment_bound", Some(&[0.4, 0.2, 0.1, 0.05])).unwrap();
    assert_eq!(p.batch, 10_000);
    let r = run_check("moment_bound", &lq, &p, &HjbOptions::default()).unwrap();
    assert_eq!(r.status, Status::Pass, "{}", r.details);
}

#[test]
fn empirical_measure_approaches_gibbs() {
    // Large noise so the two wells mix within the horizon.
    let v = double_well(-3.0, 3.0);
    let eps = 0.8;
    let cfg = SimConfig::new(5e-3, 2000.0, 8, 11, 0.0).with_record_every(4);
    let paths = simulate(&DriftSpec::gradient(v.clone(), 1.0), &DiffusionSpec::scalar(eps), ControlInput::Constant(0.0), &cfg).unwrap();
    let edges = OccupationHistogram::uniform_edges(-3.0, 3.0, 60);
    let emp = empirical_measure(&paths, &edges, 0.05).unwrap();
    let gibbs = gibbs_quadrature(&v, eps, (-3.0, 3.0), 60).unwrap();
    let tv = emp.total_variation(&gibbs.histogram).unwrap();
    assert!(tv < 0.05, "TV = {tv}");
}

#[test]
fn laplace_masses_match_quadrature_to_first_order() {
    // Deep minima with curvatures 24 and 96: Laplace masses 2/3 and 1/3.
    let v = asymmetric_saddles(-2.5, 1.5);
    let d = analyze(&v).unwrap();
    let mut gaps = Vec::new();
    for eps in [0.6, 0.4, 0.3, 0.2] {
        let lap = laplace_partition(&d, eps).unwrap();
        assert!((lap.masses[0] - 2.0 / 3.0).abs() < 1e-6);
        let g = gibbs_quadrature(&v, eps, (-2.5, 1.5), 4000).unwrap();
        let m = g.well_masses(&d);
        let gap = (m[0] - lap.masses[0]).abs();
        assert!(gap <= eps, "ε = {eps}: gap {gap}");
        gaps.push(gap);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn bundled_configs_load() {
    for name in ["lq.json", "double_well.json", "triple_well.json", "errorbound2.json"] {
        let (cfg, p) = bundled(name);
        assert_eq!(p.name, name.trim_end_matches(".json"));
        assert_eq!(cfg.seed, 20240);
    }
    let (_, dw) = bundled("double_well.json");
    let d = analyze(dw.potential.as_ref().unwrap()).unwrap();
    assert_eq!(d.deep.len(), 2);
    assert!((d.lambda.unwrap() - 0.125).abs() < 1e-9);
    let (_, tw) = bundled("triple_well.json");
    assert_eq!(analyze(tw.potential.as_ref().unwrap()).unwrap().minima.len(), 3);
}
