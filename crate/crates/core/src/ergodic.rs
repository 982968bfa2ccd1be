//! Time averages, occupation measures, invariance residuals and trace paths.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::landscape::WellDecomposition;
use crate::model::{DiffusionSpec, DriftSpec, RunningCost};
use crate::numerics::mean_se;
use crate::sde::PathBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEstimate {
    pub rho: f64,
    pub se: f64,
    pub burn_in: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub batch: usize,
    pub diverged: usize,
}

impl ErgodicEstimate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({"rho": self.rho, "se": self.se, "T": self.horizon, "burn_in": self.burn_in,
                           "batch": self.batch, "diverged": self.diverged})
    }
}

fn check_burn_in(burn_in: f64) -> Result<()> {
    ensure((0.0..=0.9).contains(&burn_in), || Error::Parameter(format!("burn-in {burn_in} outside [0, 0.9]")))
}

/// Record indices `r` whose interval `[t_r, t_{r+1})` starts at or after the burn-in.
fn window(paths: &PathBatch, burn_in: f64) -> std::ops::Range<usize> {
    let t_end = *paths.times.last().unwrap();
    let t0 = burn_in * t_end;
    let start = paths.times.partition_point(|t| *t < t0 - 1e-12);
    start..paths.n_records() - 1
}

/// Per-trajectory time averages of `r(X, U)` after the burn-in.
pub fn trajectory_averages(paths: &PathBatch, cost: &RunningCost, burn_in: f64) -> Result<Vec<f64>> {
    check_burn_in(burn_in)?;
    paths.check_divergence()?;
    let w = window(paths, burn_in);
    ensure(!w.is_empty(), || Error::Config("no recorded steps after the burn-in".into()))?;
    Ok(paths
        .valid()
        .map(|j| {
            let (mut s, mut span) = (0.0, 0.0);
            for r in w.clone() {
                let dt = paths.times[r + 1] - paths.times[r];
                s += cost.eval(paths.state(j, r), paths.controls[j][r]) * dt;
                span += dt;
            }
            s / span
        })
        .collect())
}

/// `ρ̂ = (1/(T − T₀)) Σ r(X_k, U_k) dt` averaged over trajectories, SE across trajectories.
///
/// The cost is evaluated at the mean applied action, which is exact for
/// precise laws and for costs affine in `u`.
pub fn ergodic_cost(paths: &PathBatch, cost: &RunningCost, burn_in: f64) -> Result<ErgodicEstimate> {
    let avgs = trajectory_averages(paths, cost, burn_in)?;
    let (rho, se) = mean_se(&avgs);
    Ok(ErgodicEstimate {
        rho,
        se,
        burn_in,
        horizon: *paths.times.last().unwrap(),
        batch: avgs.len(),
        diverged: paths.diverged_count(),
    })
}

/// `ρ̂(T)` evaluated at `points` evenly spaced horizons, each with the same burn-in fraction.
pub fn ergodic_cost_curve(paths: &PathBatch, cost: &RunningCost, burn_in: f64, points: usize) -> Result<Vec<ErgodicEstimate>> {
    let n = paths.n_records();
    (1..=points.max(1))
        .map(|p| {
            let last = (p * (n - 1)) / points.max(1);
            let mut cut = paths.clone();
            cut.times.truncate(last + 1);
            for j in 0..cut.n_traj() {
                cut.states[j].truncate((last + 1) * cut.dim);
                cut.controls[j].truncate(last + 1);
            }
            ergodic_cost(&cut, cost, burn_in)
        })
        .filter(|e| !matches!(e, Err(Error::Config(_))))
        .collect()
}

/// Normalized occupation masses over bins, optionally joint with an action axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationHistogram {
    pub edges: Vec<f64>,
    /// Action points of the joint `(x, u)` variant; masses are then row-major `bins × actions`.
    pub actions: Option<Vec<f64>>,
    pub masses: Vec<f64>,
    /// Fraction of the raw occupation that fell outside the bins.
    pub out_of_range: f64,
}

impl OccupationHistogram {
    pub fn from_masses(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        ensure(edges.len() >= 2 && masses.len() + 1 == edges.len(), || {
            Error::Config("histogram needs one more edge than bins".into())
        })?;
        ensure(masses.iter().all(|m| *m >= 0.0), || Error::Data("negative histogram mass".into()))?;
        let s: f64 = masses.iter().sum();
        ensure(s > 0.0, || Error::Data("histogram is empty".into()))?;
        Ok(OccupationHistogram { edges, actions: None, masses: masses.iter().map(|m| m / s).collect(), out_of_range: 0.0 })
    }

    /// Equal bins on `[lo, hi]`.
    pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
        (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Spatial marginal.
    pub fn spatial(&self) -> Vec<f64> {
        match &self.actions {
            None => self.masses.clone(),
            Some(a) => self.masses.chunks(a.len()).map(|row| row.iter().sum()).collect(),
        }
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let n = self.bins();
        if x < self.edges[0] || x > self.edges[n] {
            return None;
        }
        let (lo, hi) = (self.edges[0], self.edges[n]);
        let i = (((x - lo) / (hi - lo)) * n as f64).floor() as usize;
        Some(i.min(n - 1))
    }

    /// `½ Σ |p − q|` between spatial marginals on identical bins.
    pub fn total_variation(&self, other: &OccupationHistogram) -> Result<f64> {
        ensure(self.edges == other.edges, || Error::Config("histograms have different bins".into()))?;
        Ok(0.5 * self.spatial().iter().zip(other.spatial()).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// More than 1% of the occupation fell outside the bins.
    pub fn range_warning(&self) -> bool {
        self.out_of_range > 0.01
    }

    /// CSV `lo,hi,mass` (or `lo,hi,u,mass` for the joint variant).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match &self.actions {
            None => {
                writeln!(w, "lo,hi,mass")?;
                for (e, m) in self.edges.windows(2).zip(&self.masses) {
                    writeln!(w, "{},{},{}", e[0], e[1], m)?;
                }
            }
            Some(a) => {
                writeln!(w, "lo,hi,u,mass")?;
                for (e, row) in self.edges.windows(2).zip(self.masses.chunks(a.len())) {
                    for (u, m) in a.iter().zip(row) {
                        writeln!(w, "{},{},{},{}", e[0], e[1], u, m)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Time-occupation histogram of the first coordinate after the burn-in.
pub fn empirical_measure(paths: &PathBatch, edges: &[f64], burn_in: f64) -> Result<OccupationHistogram> {
    fill(paths, edges, None, burn_in)
}

/// Joint `(x, u)` occupation; the applied action is binned to the nearest of `actions`.
pub fn empirical_joint_measure(paths: &PathBatch, edges: &[f64], actions: &[f64], burn_in: f64) -> Result<OccupationHistogram> {
    fill(paths, edges, Some(actions), burn_in)
}

fn fill(paths: &PathBatch, edges: &[f64], actions: Option<&[f64]>, burn_in: f64) -> Result<OccupationHistogram> {
    check_burn_in(burn_in)?;
    paths.check_divergence()?;
    let na = actions.map_or(1, |a| a.len());
    let mut shell = OccupationHistogram::from_masses(edges.to_vec(), vec![1.0; edges.len() - 1])?;
    shell.actions = actions.map(|a| a.to_vec());
    let mut masses = vec![0.0; shell.bins() * na];
    let mut outside = 0.0;
    let w = window(paths, burn_in);
    for j in paths.valid() {
        for r in w.clone() {
            let dt = paths.times[r + 1] - paths.times[r];
            match shell.bin_of(paths.value(j, r)) {
                None => outside += dt,
                Some(i) => {
                    let k = match actions {
                        None => 0,
                        Some(a) => nearest(a, paths.controls[j][r]),
                    };
                    masses[i * na + k] += dt;
                }
            }
        }
    }
    let inside: f64 = masses.iter().sum();
    ensure(inside > 0.0, || Error::Data("no occupation inside the histogram range".into()))?;
    shell.masses = masses.iter().map(|m| m / inside).collect();
    shell.out_of_range = outside / (inside + outside);
    Ok(shell)
}

fn nearest(points: &[f64], u: f64) -> usize {
    let mut best = 0;
    for (k, p) in points.iter().enumerate() {
        if (p - u).abs() < (points[best] - u).abs() {
            best = k;
        }
    }
    best
}

/// Twice-differentiable test functions for the invariance residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// Cubic B-spline `B((x − center)/scale)`, supported on `center ± 2·scale`.
    Bump { center: f64, scale: f64 },
    Constant(f64),
    /// Linear combination `Σ c_k f_k`.
    Combination(Vec<(f64, TestFunction)>),
}

impl TestFunction {
    pub fn value(&self, x: f64) -> f64 {
        self.derivatives(x).0
    }

    /// `(f, f′, f″)` at `x`.
    pub fn derivatives(&self, x: f64) -> (f64, f64, f64) {
        match self {
            TestFunction::Constant(c) => (*c, 0.0, 0.0),
            TestFunction::Bump { center, scale } => {
                let t = (x - center) / scale;
                let a = t.abs();
                let s = t.signum();
                let (f, d1, d2) = if a < 1.0 {
                    (2.0 / 3.0 - a * a + 0.5 * a * a * a, s * (-2.0 * a + 1.5 * a * a), -2.0 + 3.0 * a)
                } else if a < 2.0 {
                    let b = 2.0 - a;
                    (b * b * b / 6.0, -s * 0.5 * b * b, b)
                } else {
                    (0.0, 0.0, 0.0)
                };
                (f, d1 / scale, d2 / (scale * scale))
            }
            TestFunction::Combination(parts) => parts.iter().fold((0.0, 0.0, 0.0), |acc, (c, f)| {
                let (a, b, d) = f.derivatives(x);
                (acc.0 + c * a, acc.1 + c * b, acc.2 + c * d)
            }),
        }
    }

    /// `k` bumps with centres evenly spaced strictly inside `[lo, hi]`, supports inside the interval.
    pub fn bump_family(lo: f64, hi: f64, k: usize) -> Vec<TestFunction> {
        let spacing = (hi - lo) / (k + 1) as f64;
        (1..=k)
            .map(|i| TestFunction::Bump { center: lo + spacing * i as f64, scale: spacing / 2.0 })
            .collect()
    }
}

/// `Σ_bins ℒ^U f(x_bin)·mass(bin)` with `ℒ^U f = ½σ²f″ + m(x, U)f′`, one value per test function.
///
/// `control` gives the (barycentric) action at each bin centre.
pub fn generator_residual(
    hist: &OccupationHistogram,
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    control: &dyn Fn(f64) -> f64,
    tests: &[TestFunction],
) -> Vec<f64> {
    let centers = hist.centers();
    let masses = hist.spatial();
    tests
        .iter()
        .map(|f| {
            centers
                .iter()
                .zip(&masses)
                .map(|(&x, &m)| {
                    let (_, d1, d2) = f.derivatives(x);
                    let s = diffusion.eval1(x);
                    m * (0.5 * s * s * d2 + drift.eval1(x, control(x)) * d1)
                })
                .sum()
        })
        .collect()
}

/// Fraction of post-burn-in time spent in each coarse well.
pub fn well_occupation(paths: &PathBatch, wells: &WellDecomposition, burn_in: f64) -> Result<Vec<f64>> {
    check_burn_in(burn_in)?;
    paths.check_divergence()?;
    let mut occ = vec![0.0; wells.deep.len().max(1)];
    let w = window(paths, burn_in);
    for j in paths.valid() {
        for r in w.clone() {
            occ[wells.coarse_index(paths.value(j, r))] += paths.times[r + 1] - paths.times[r];
        }
    }
    let total: f64 = occ.iter().sum();
    ensure(total > 0.0, || Error::Config("no recorded steps after the burn-in".into()))?;
    Ok(occ.iter().map(|o| o / total).collect())
}

/// Per-trajectory well occupations (for across-trajectory standard errors).
pub fn well_occupation_per_trajectory(paths: &PathBatch, wells: &WellDecomposition, burn_in: f64) -> Result<Vec<Vec<f64>>> {
    check_burn_in(burn_in)?;
    paths.check_divergence()?;
    let w = window(paths, burn_in);
    Ok(paths
        .valid()
        .map(|j| {
            let mut occ = vec![0.0; wells.deep.len().max(1)];
            for r in w.clone() {
                occ[wells.coarse_index(paths.value(j, r))] += paths.times[r + 1] - paths.times[r];
            }
            let total: f64 = occ.iter().sum();
            occ.iter().map(|o| o / total).collect()
        })
        .collect())
}

/// The path observed only while inside the well neighbourhoods, with the
/// outside time excised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePath {
    /// Excised (and optionally rescaled) time of each retained step.
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    /// Index of the neighbourhood (deep well) of each retained step.
    pub labels: Vec<usize>,
    /// Total retained time.
    pub duration: f64,
    /// Time-rescaling factor applied (1 when none).
    pub rescale: f64,
}

impl TracePath {
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Label sequence with consecutive repeats collapsed.
    pub fn label_sequence(&self) -> Vec<usize> {
        let mut seq: Vec<usize> = Vec::new();
        for &l in &self.labels {
            if seq.last() != Some(&l) {
                seq.push(l);
            }
        }
        seq
    }

    pub fn jumps(&self) -> usize {
        self.label_sequence().len().saturating_sub(1)
    }

    /// Mean excised time between label changes, per label of departure.
    pub fn holding_times(&self) -> Vec<Vec<f64>> {
        let k = self.labels.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); k];
        if self.is_empty() {
            return out;
        }
        let mut start = self.times[0];
        for i in 1..self.labels.len() {
            if self.labels[i] != self.labels[i - 1] {
                out[self.labels[i - 1]].push(self.times[i] - start);
                start = self.times[i];
            }
        }
        out
    }
}

/// Excises the time trajectory `j` spends outside `∪ V_i` and projects states
/// to well labels. With `rescale = Some(s)` the excised clock is divided by `s`
/// (pass `s = e^{2λ/ε²}` for the tunneling time scale).
pub fn extract_trace(paths: &PathBatch, j: usize, neighborhoods: &[(f64, f64)], rescale: Option<f64>) -> Result<TracePath> {
    ensure(j < paths.n_traj(), || Error::Config(format!("trajectory {j} out of range")))?;
    let s = rescale.unwrap_or(1.0);
    ensure(s > 0.0 && s.is_finite(), || Error::Parameter("rescale factor must be positive".into()))?;
    let mut trace = TracePath { times: Vec::new(), states: Vec::new(), labels: Vec::new(), duration: 0.0, rescale: s };
    let mut clock = 0.0;
    for r in 0..paths.n_records() - 1 {
        let x = paths.value(j, r);
        if let Some(l) = neighborhoods.iter().position(|(a, b)| x >= *a && x <= *b) {
            let dt = paths.times[r + 1] - paths.times[r];
            trace.times.push(clock / s);
            trace.states.push(x);
            trace.labels.push(l);
            clock += dt;
        }
    }
    trace.duration = clock / s;
    ensure(!trace.is_empty(), || Error::Data("path never visits the well neighbourhoods".into()))?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::analyze;
    use crate::model::library::double_well;
    use crate::sde::{simulate, ControlInput, SimConfig};
    use proptest::prelude::*;

    fn batch_from(values: Vec<Vec<f64>>, dt: f64) -> PathBatch {
        let n = values[0].len();
        PathBatch {
            dim: 1,
            dt,
            record_every: 1,
            times: (0..n).map(|k| k as f64 * dt).collect(),
            controls: values.iter().map(|v| vec![0.0; v.len()]).collect(),
            seeds: (0..values.len() as u64).collect(),
            diverged: vec![false; values.len()],
            states: values,
        }
    }

    #[test]
    fn constant_cost() {
        let p = batch_from(vec![vec![0.3; 50], vec![-1.0; 50]], 0.1);
        let e = ergodic_cost(&p, &RunningCost::constant(2.5), 0.2).unwrap();
        assert!((e.rho - 2.5).abs() < 1e-12);
        assert!(e.se < 1e-12);
        assert!(ergodic_cost(&p, &RunningCost::constant(2.5), 0.95).is_err());
        assert_eq!(e.to_json()["T"], 4.9);
    }

    #[test]
    fn ou_stationary_cost() {
        let eps = 0.5;
        let cfg = SimConfig::new(1e-3, 200.0, 32, 4, 0.0).with_record_every(10);
        let p = simulate(&DriftSpec::linear(-1.0, 1.0, 0.0), &DiffusionSpec::scalar(eps), ControlInput::Constant(0.0), &cfg).unwrap();
        let r = RunningCost::separable(vec![0.0, 0.0, 1.0], None, 0.0, 0.0);
        let e = ergodic_cost(&p, &r, 0.2).unwrap();
        assert!((e.rho - 0.125).abs() < 3.0 * e.se + 1e-3, "{e:?}");
    }

    #[test]
    fn trapped_flow_has_zero_cost() {
        let cfg = SimConfig::new(1e-3, 30.0, 1, 0, 0.5).with_record_every(10);
        let drift = DriftSpec::gradient(double_well(-3.0, 3.0), 1.0);
        let p = simulate(&drift, &DiffusionSpec::zero(1), ControlInput::Constant(0.0), &cfg).unwrap();
        let r = RunningCost::separable(vec![1.0, -2.0, 1.0], None, 0.0, 0.0);
        assert!(ergodic_cost(&p, &r, 0.5).unwrap().rho < 1e-10);
    }

    #[test]
    fn point_mass_histogram() {
        let p = batch_from(vec![vec![0.37; 20]], 0.1);
        let edges = OccupationHistogram::uniform_edges(-1.0, 1.0, 20);
        let h = empirical_measure(&p, &edges, 0.0).unwrap();
        assert_eq!(h.masses[h.bin_of(0.37).unwrap()], 1.0);
        assert!(!h.range_warning());
        let j = empirical_joint_measure(&p, &edges, &[-1.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!(j.masses.len(), 60);
        assert_eq!(j.masses[h.bin_of(0.37).unwrap() * 3 + 1], 1.0);
    }

    #[test]
    fn out_of_range_is_flagged() {
        let p = batch_from(vec![vec![0.0, 5.0, 5.0, 0.0]], 1.0);
        let h = empirical_measure(&p, &OccupationHistogram::uniform_edges(-1.0, 1.0, 4), 0.0).unwrap();
        assert!(h.range_warning());
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_detects_non_invariance() {
        let v = double_well(-3.0, 3.0);
        let drift = DriftSpec::gradient(v.clone(), 1.0);
        let sigma = DiffusionSpec::scalar(0.3);
        let edges = OccupationHistogram::uniform_edges(0.49, 0.51, 1);
        let h = OccupationHistogram::from_masses(edges, vec![1.0]).unwrap();
        let f = TestFunction::Bump { center: 0.2, scale: 0.3 };
        let res = generator_residual(&h, &drift, &sigma, &|_| 0.0, &[f.clone(), TestFunction::Constant(3.0)]);
        let (_, d1, d2) = f.derivatives(0.5);
        use crate::model::Landscape1D;
        assert!((res[0] - (-v.d1(0.5) * d1 + 0.045 * d2)).abs() < 1e-12);
        assert!(res[0].abs() > 0.1);
        assert_eq!(res[1], 0.0);
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let f = TestFunction::Bump { center: 0.3, scale: 0.4 };
        for x in [-0.6, -0.2, 0.1, 0.3, 0.55, 0.9, 1.2] {
            let (v, d1, d2) = f.derivatives(x);
            let h = 1e-5;
            assert!(((f.value(x + h) - f.value(x - h)) / (2.0 * h) - d1).abs() < 1e-6);
            let fd2 = (f.derivatives(x + h).1 - f.derivatives(x - h).1) / (2.0 * h);
            assert!((fd2 - d2).abs() < 1e-3, "{x}");
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn trace_by_construction() {
        // 1 s in V₁, 5 s outside, 1 s in V₂ at dt = 0.1.
        let mut xs = vec![-1.0; 10];
        xs.extend(vec![0.0; 50]);
        xs.extend(vec![1.0; 11]);
        let p = batch_from(vec![xs], 0.1);
        let t = extract_trace(&p, 0, &[(-1.3, -0.7), (0.7, 1.3)], None).unwrap();
        assert!((t.duration - 2.0).abs() < 1e-12);
        assert_eq!(t.label_sequence(), vec![0, 1]);
        let r = extract_trace(&p, 0, &[(-1.3, -0.7), (0.7, 1.3)], Some(4.0)).unwrap();
        assert!((r.duration - 0.5).abs() < 1e-12);
        let none = batch_from(vec![vec![0.0; 5]], 0.1);
        assert!(extract_trace(&none, 0, &[(0.7, 1.3)], None).is_err());
    }

    #[test]
    fn well_occupation_of_confined_path() {
        let d = analyze(&double_well(-3.0, 3.0)).unwrap();
        let p = batch_from(vec![vec![-0.9; 30]], 0.1);
        assert_eq!(well_occupation(&p, &d, 0.0).unwrap(), vec![1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn histogram_mass_is_conserved(xs in proptest::collection::vec(-2.0f64..2.0, 10..60), burn in 0.0f64..0.9) {
            let p = batch_from(vec![xs], 0.1);
            let h = empirical_measure(&p, &OccupationHistogram::uniform_edges(-2.0, 2.0, 17), burn);
            if let Ok(h) = h {
                prop_assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn ergodic_cost_is_permutation_and_split_invariant(xs in proptest::collection::vec(-2.0f64..2.0, 40)) {
            let rows: Vec<Vec<f64>> = xs.chunks(10).map(|c| c.to_vec()).collect();
            let r = RunningCost::separable(vec![0.0, 1.0, 1.0], None, 0.0, 0.0);
            let a = ergodic_cost(&batch_from(rows.clone(), 0.1), &r, 0.2).unwrap().rho;
            let mut rev = rows.clone();
            rev.reverse();
            let b = ergodic_cost(&batch_from(rev, 0.1), &r, 0.2).unwrap().rho;
            let h1 = ergodic_cost(&batch_from(rows[..2].to_vec(), 0.1), &r, 0.2).unwrap().rho;
            let h2 = ergodic_cost(&batch_from(rows[2..].to_vec(), 0.1), &r, 0.2).unwrap().rho;
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((a - 0.5 * (h1 + h2)).abs() < 1e-12);
        }

        #[test]
        fn residual_is_linear(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
            let h = OccupationHistogram::from_masses(OccupationHistogram::uniform_edges(-2.0, 2.0, 40), (0..40).map(|i| 1.0 + (i % 7) as f64).collect()).unwrap();
            let drift = DriftSpec::gradient(double_well(-3.0, 3.0), 1.0);
            let s = DiffusionSpec::scalar(0.4);
            let f = TestFunction::Bump { center: -0.5, scale: 0.3 };
            let g = TestFunction::Bump { center: 0.6, scale: 0.2 };
            let combo = TestFunction::Combination(vec![(c1, f.clone()), (c2, g.clone())]);
            let r = generator_residual(&h, &drift, &s, &|_| 0.1, &[f, g, combo]);
            prop_assert!((r[2] - (c1 * r[0] + c2 * r[1])).abs() < 1e-10);
        }
    }
}
