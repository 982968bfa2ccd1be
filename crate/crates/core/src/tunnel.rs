//! The tunneled birth–death chain on the deep wells: exit probabilities,
//! rates, invariant law, simulation and the ergodic-value representation.
//!
//! Rates live in the rescaled clock `t ↦ e^{2λ/ε²}t`; see
//! [`TunnelChain::physical_mean_holding`] for the unscaled times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::landscape::{LaplaceData, WellDecomposition};
use crate::model::{ControlLaw, Landscape1D, RunningCost};
use crate::numerics::log_integral_exp;

const QUADRATURE_NODES: usize = 8001;

/// `(p_left, p_right)` for the diffusion `dX = −V′dt + ε dW` started at the
/// minimum `well` (index into `decomp.minima`), by quadrature of the scale
/// density `e^{2V/ε²}` between the two adjacent saddles.
///
/// Boundary wells have a single exit and return `(0, 1)` or `(1, 0)`.
pub fn exit_prob_exact(v: &impl Landscape1D, eps: f64, well: usize, decomp: &WellDecomposition) -> Result<(f64, f64)> {
    ensure(eps > 0.0, || Error::Parameter("ε must be positive".into()))?;
    let (left, right) = adjacent_saddles(decomp, well)?;
    match (left, right) {
        (None, Some(_)) => Ok((0.0, 1.0)),
        (Some(_), None) => Ok((1.0, 0.0)),
        (None, None) => Err(Error::Config("well has no saddle to exit through".into())),
        (Some(yl), Some(yr)) => {
            let k = 2.0 / (eps * eps);
            let x = decomp.minima[well].x;
            let g = |y: f64| k * v.value(y);
            let num = log_integral_exp(g, yl, x, QUADRATURE_NODES);
            let den = log_integral_exp(g, yl, yr, QUADRATURE_NODES);
            let p = (num - den).exp().clamp(0.0, 1.0);
            Ok((1.0 - p, p))
        }
    }
}

/// The limiting exit law in the form `p_right = √|V″(y_left)| / (√|V″(y_left)| + √|V″(y_right)|)`.
///
/// This is the split implied by the chain's rates. The scale-function limit of
/// [`exit_prob_exact`] is its mirror image, `√|V″(y_right)|` in the numerator.
pub fn exit_prob_asymptotic(decomp: &WellDecomposition, well: usize) -> Result<(f64, f64)> {
    let (left, right) = adjacent_saddles(decomp, well)?;
    match (left, right) {
        (None, Some(_)) => Ok((0.0, 1.0)),
        (Some(_), None) => Ok((1.0, 0.0)),
        (None, None) => Err(Error::Config("well has no saddle to exit through".into())),
        (Some(_), Some(_)) => {
            let l = decomp.maxima[well - 1].curvature.abs().sqrt();
            let r = decomp.maxima[well].curvature.abs().sqrt();
            let p = l / (l + r);
            Ok((1.0 - p, p))
        }
    }
}

fn adjacent_saddles(decomp: &WellDecomposition, well: usize) -> Result<(Option<f64>, Option<f64>)> {
    ensure(well < decomp.minima.len(), || Error::Config(format!("no well with index {well}")))?;
    let left = (well > 0).then(|| decomp.maxima[well - 1].x);
    let right = (well < decomp.maxima.len()).then(|| decomp.maxima[well].x);
    Ok((left, right))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelChain {
    /// Locations `x_{m_i}` of the states.
    pub states: Vec<f64>,
    /// Row-major `κ×κ` generator.
    pub q: Vec<f64>,
    pub mu: Vec<f64>,
    /// Total jump rates `λ(i)`.
    pub lambda: Vec<f64>,
    /// Embedded jump matrix, row-major.
    pub p: Vec<f64>,
    /// Normalizer `C` (`NaN` for chains built from raw rates).
    pub c: f64,
    /// Well scale `λ` behind the time change, when known.
    pub well_scale: Option<f64>,
}

impl TunnelChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.len() + j]
    }

    pub fn jump_prob(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.len() + j]
    }

    /// Birth–death chain from up-rates `Q(i,i+1)` and down-rates `Q(i+1,i)`.
    pub fn from_rates(states: Vec<f64>, up: &[f64], down: &[f64]) -> Result<Self> {
        let k = states.len();
        ensure(k >= 1, || Error::Config("chain needs at least one state".into()))?;
        ensure(up.len() + 1 == k && down.len() + 1 == k, || {
            Error::Config(format!("{k} states need {} up- and down-rates", k - 1))
        })?;
        ensure(up.iter().chain(down).all(|r| r.is_finite() && *r >= 0.0), || {
            Error::Data("rates must be finite and non-negative".into())
        })?;
        let mut q = vec![0.0; k * k];
        for i in 0..k - 1 {
            q[i * k + i + 1] = up[i];
            q[(i + 1) * k + i] = down[i];
        }
        let lambda: Vec<f64> = (0..k).map(|i| (0..k).filter(|&j| j != i).map(|j| q[i * k + j]).sum()).collect();
        for i in 0..k {
            q[i * k + i] = -lambda[i];
        }
        let mut p = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                if j != i && lambda[i] > 0.0 {
                    p[i * k + j] = q[i * k + j] / lambda[i];
                }
            }
        }
        let mut chain = TunnelChain { states, q, mu: Vec::new(), lambda, p, c: f64::NAN, well_scale: None };
        chain.mu = chain_invariant(&chain)?;
        Ok(chain)
    }

    /// Mean holding times `1/λ(i)` in the rescaled clock.
    pub fn mean_holding(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| 1.0 / l).collect()
    }

    /// Mean holding times `e^{2λ/ε²}/λ(i)` in the original clock.
    pub fn physical_mean_holding(&self, eps: f64) -> Vec<f64> {
        let s = (2.0 * self.well_scale.unwrap_or(0.0) / (eps * eps)).exp();
        self.lambda.iter().map(|l| s / l).collect()
    }

    /// `max_i |(μQ)_i|`.
    pub fn stationarity_residual(&self) -> f64 {
        let k = self.len();
        (0..k).map(|j| (0..k).map(|i| self.mu[i] * self.q[i * k + j]).sum::<f64>().abs()).fold(0.0, f64::max)
    }

    /// JSON `{"states", "Q", "mu", "lambda", "p"}` with matrices as nested rows.
    pub fn to_json(&self) -> serde_json::Value {
        let k = self.len();
        let rows = |m: &[f64]| m.chunks(k).map(|r| r.to_vec()).collect::<Vec<_>>();
        serde_json::json!({
            "states": self.states,
            "Q": rows(&self.q),
            "mu": self.mu,
            "lambda": self.lambda,
            "p": rows(&self.p),
        })
    }
}

/// Chain on the deep wells with `Q(i,i±1) = 1/(C μ(i) √|V″(y)|)` over the
/// separating saddle `y` and `μ(i) = 1/(C √V″(x_{m_i}))`.
///
/// The end states have a single saddle term and jump inward with probability 1.
pub fn build_rate_matrix(decomp: &WellDecomposition, laplace: &LaplaceData) -> Result<TunnelChain> {
    let minima = decomp.deep_minima();
    let saddles = decomp.separator_points();
    ensure(!minima.is_empty(), || Error::Config("decomposition has no deep wells".into()))?;
    ensure(saddles.len() + 1 == minima.len(), || Error::Data("deep wells and separators do not interlace".into()))?;
    ensure(minima.iter().all(|m| m.curvature > 0.0) && saddles.iter().all(|y| y.curvature < 0.0), || {
        Error::Data("degenerate curvature at a deep well or separator".into())
    })?;
    let c = laplace.c;
    let mu: Vec<f64> = minima.iter().map(|m| 1.0 / (c * m.curvature.sqrt())).collect();
    let rate = |i: usize, y: usize| 1.0 / (c * mu[i] * saddles[y].curvature.abs().sqrt());
    let up: Vec<f64> = (0..saddles.len()).map(|i| rate(i, i)).collect();
    let down: Vec<f64> = (0..saddles.len()).map(|i| rate(i + 1, i)).collect();
    let mut chain = TunnelChain::from_rates(minima.iter().map(|m| m.x).collect(), &up, &down)?;
    chain.c = c;
    chain.well_scale = decomp.lambda;
    Ok(chain)
}

/// Invariant law by the birth–death product formula `μ(i+1) = μ(i)Q(i,i+1)/Q(i+1,i)`.
pub fn chain_invariant(chain: &TunnelChain) -> Result<Vec<f64>> {
    let k = chain.len();
    let mut mu = vec![1.0; k];
    for i in 0..k.saturating_sub(1) {
        let (up, down) = (chain.rate(i, i + 1), chain.rate(i + 1, i));
        ensure(up > 0.0 && down > 0.0, || Error::Data(format!("chain is reducible: zero rate between states {i} and {}", i + 1)))?;
        mu[i + 1] = mu[i] * up / down;
    }
    let z: f64 = mu.iter().sum();
    Ok(mu.iter().map(|m| m / z).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    /// Visited states, in order.
    pub states: Vec<usize>,
    /// Entry time of each visit; the first is 0.
    pub entry_times: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
}

impl ChainPath {
    pub fn jumps(&self) -> usize {
        self.states.len() - 1
    }

    /// Fraction of `[0, horizon]` spent in each of `k` states.
    pub fn occupation(&self, k: usize) -> Vec<f64> {
        let mut occ = vec![0.0; k];
        for (n, &s) in self.states.iter().enumerate() {
            let end = self.entry_times.get(n + 1).copied().unwrap_or(self.horizon);
            occ[s] += end - self.entry_times[n];
        }
        occ.iter().map(|t| t / self.horizon).collect()
    }

    /// Completed sojourns per state (the final, censored one is dropped).
    pub fn holding_times(&self, k: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); k];
        for n in 0..self.jumps() {
            out[self.states[n]].push(self.entry_times[n + 1] - self.entry_times[n]);
        }
        out
    }
}

/// Jump-chain simulation on `[0, horizon]` from `start`.
pub fn simulate_chain(chain: &TunnelChain, start: usize, horizon: f64, seed: u64) -> Result<ChainPath> {
    ensure(horizon > 0.0 && horizon.is_finite(), || Error::Parameter("horizon must be positive".into()))?;
    ensure(start < chain.len(), || Error::Config(format!("no chain state {start}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = chain.len();
    let mut states = vec![start];
    let mut entry_times = vec![0.0];
    let (mut s, mut t) = (start, 0.0);
    loop {
        let rate = chain.lambda[s];
        if rate <= 0.0 {
            break;
        }
        t += Exp::new(rate).map_err(|e| Error::Numerical(e.to_string()))?.sample(&mut rng);
        if t >= horizon {
            break;
        }
        let draw: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = s;
        for j in 0..k {
            acc += chain.jump_prob(s, j);
            if j != s && chain.jump_prob(s, j) > 0.0 && draw < acc {
                next = j;
                break;
            }
        }
        if next == s {
            // Rounding left the draw above the last cumulative sum.
            next = (0..k).rev().find(|&j| j != s && chain.jump_prob(s, j) > 0.0).unwrap();
        }
        s = next;
        states.push(s);
        entry_times.push(t);
    }
    Ok(ChainPath { states, entry_times, horizon, seed })
}

/// Independent runs for each seed, in parallel.
pub fn simulate_chain_ladder(chain: &TunnelChain, start: usize, horizon: f64, seeds: &[u64]) -> Result<Vec<ChainPath>> {
    seeds.par_iter().map(|&s| simulate_chain(chain, start, horizon, s)).collect()
}

/// `ρ* = Σ_i r̄(x_{m_i}, u⁰(x_{m_i}))·μ(x_{m_i})`, with relaxed laws averaged over their weights.
pub fn ergodic_value_representation(cost: &RunningCost, u0: &ControlLaw, chain: &TunnelChain) -> f64 {
    chain
        .states
        .iter()
        .zip(&chain.mu)
        .map(|(&x, m)| m * cost.relaxed(&[x], &u0.weights_at(u0.node(x)), &u0.set))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{analyze, laplace_partition, CriticalPoint};
    use crate::model::library::{asymmetric_saddles, double_well};
    use crate::model::ControlSet;
    use crate::numerics::{mean_se, Grid1D};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn double_well_chain() -> TunnelChain {
        let d = analyze(&double_well(-3.0, 3.0)).unwrap();
        build_rate_matrix(&d, &laplace_partition(&d, 0.25).unwrap()).unwrap()
    }

    fn assert_chain_invariants(c: &TunnelChain) {
        let k = c.len();
        for i in 0..k {
            let row: f64 = (0..k).map(|j| c.rate(i, j)).sum();
            assert!(row.abs() < 1e-12);
            if c.lambda[i] > 0.0 {
                let p: f64 = (0..k).map(|j| c.jump_prob(i, j)).sum();
                assert!((p - 1.0).abs() < 1e-12);
            }
        }
        assert!((c.mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(c.stationarity_residual() < 1e-12);
        for i in 0..k.saturating_sub(1) {
            let (a, b) = (c.mu[i] * c.rate(i, i + 1), c.mu[i + 1] * c.rate(i + 1, i));
            assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }

    /// Hand-built decomposition with prescribed curvatures.
    fn synthetic(min_curv: &[f64], saddle_curv: &[f64]) -> WellDecomposition {
        let pt = |x: f64, curvature: f64| CriticalPoint { x, value: 0.0, curvature };
        let k = min_curv.len();
        WellDecomposition {
            minima: min_curv.iter().enumerate().map(|(i, c)| pt(2.0 * i as f64, *c)).collect(),
            maxima: saddle_curv.iter().enumerate().map(|(i, c)| pt(2.0 * i as f64 + 1.0, -c)).collect(),
            depths: vec![(None, None); k],
            lambdas: vec![Some(1.0); k],
            lambda: Some(1.0),
            deep: (0..k).collect(),
            separators: (0..k - 1).collect(),
        }
    }

    #[test]
    fn symmetric_double_well_chain() {
        let c = double_well_chain();
        assert_chain_invariants(&c);
        assert!((c.mu[0] - 0.5).abs() < 1e-9 && (c.mu[1] - 0.5).abs() < 1e-9);
        let s2 = 2f64.sqrt();
        assert!((c.rate(0, 1) - s2).abs() < 1e-8 && (c.rate(1, 0) - s2).abs() < 1e-8);
        assert!((c.rate(0, 0) + s2).abs() < 1e-8);
        assert_eq!(c.jump_prob(0, 1), 1.0);
        let j = c.to_json();
        assert_eq!(j["Q"].as_array().unwrap().len(), 2);
        assert_eq!(j["p"][1][0], 1.0);
    }

    #[test]
    fn single_well_chain() {
        let d = synthetic(&[3.0], &[]);
        let c = build_rate_matrix(&d, &laplace_partition(&d, 0.3).unwrap()).unwrap();
        assert_eq!(c.mu, vec![1.0]);
        assert_eq!(c.q, vec![0.0]);
        let path = simulate_chain(&c, 0, 100.0, 1).unwrap();
        assert_eq!(path.jumps(), 0);
        assert_eq!(path.occupation(1), vec![1.0]);
    }

    #[test]
    fn curvature_law_examples() {
        let d = synthetic(&[2.0, 8.0], &[1.0]);
        let c = build_rate_matrix(&d, &laplace_partition(&d, 0.3).unwrap()).unwrap();
        assert!((c.mu[0] - 2.0 / 3.0).abs() < 1e-12 && (c.mu[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn three_state_law_matches_null_space() {
        let d = synthetic(&[2.0, 5.0, 3.0], &[1.0, 4.0]);
        let lap = laplace_partition(&d, 0.3).unwrap();
        let c = build_rate_matrix(&d, &lap).unwrap();
        assert_chain_invariants(&c);
        for (m, l) in c.mu.iter().zip(&lap.masses) {
            assert!((m - l).abs() < 1e-12);
        }
        // Null vector of Qᵀ from the SVD.
        let qt = DMatrix::from_row_slice(3, 3, &c.q).transpose();
        let svd = qt.svd(false, true);
        let (imin, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let v = svd.v_t.unwrap().row(imin).transpose();
        let s: f64 = v.iter().sum();
        for i in 0..3 {
            assert!((v[i] / s - c.mu[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn random_birth_death_law_matches_linear_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let up: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..3.0)).collect();
        let down: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..3.0)).collect();
        let c = TunnelChain::from_rates((0..5).map(f64::from).collect(), &up, &down).unwrap();
        assert_chain_invariants(&c);
        // μQ = 0 with the last equation replaced by Σμ = 1.
        let mut a = DMatrix::from_row_slice(5, 5, &c.q).transpose();
        a.row_mut(4).fill(1.0);
        let mut b = nalgebra::DVector::zeros(5);
        b[4] = 1.0;
        let mu = a.lu().solve(&b).unwrap();
        for i in 0..5 {
            assert!((mu[i] - c.mu[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rate_is_reducible() {
        let e = TunnelChain::from_rates(vec![0.0, 1.0, 2.0], &[1.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(e, Err(Error::Data(_))));
    }

    #[test]
    fn two_state_occupation_and_holding() {
        let c = double_well_chain();
        let path = simulate_chain(&c, 0, 1e4 / 2f64.sqrt(), 5).unwrap();
        let occ = path.occupation(2);
        assert!((occ[0] - 0.5).abs() < 0.05, "{occ:?}");
        let hold = path.holding_times(2);
        let (m, se) = mean_se(&hold[0]);
        assert!((m - 1.0 / c.lambda[0]).abs() < 3.0 * se, "{m} ± {se}");
        assert_eq!(simulate_chain(&c, 0, 50.0, 9).unwrap(), simulate_chain(&c, 0, 50.0, 9).unwrap());
    }

    #[test]
    fn chain_occupation_converges_to_mu() {
        let d = synthetic(&[2.0, 5.0, 3.0], &[1.0, 4.0]);
        let c = build_rate_matrix(&d, &laplace_partition(&d, 0.3).unwrap()).unwrap();
        let lmin = c.lambda.iter().cloned().fold(f64::INFINITY, f64::min);
        let seeds: Vec<u64> = (0..20).collect();
        let runs = simulate_chain_ladder(&c, 0, 1e3 / lmin, &seeds).unwrap();
        for s in 0..3 {
            let occ: Vec<f64> = runs.iter().map(|r| r.occupation(3)[s]).collect();
            let (m, se) = mean_se(&occ);
            assert!((m - c.mu[s]).abs() < 3.0 * se.max(1e-3), "state {s}: {m} ± {se} vs {}", c.mu[s]);
        }
    }

    #[test]
    fn exit_probability_examples() {
        let v = double_well(-3.0, 3.0);
        let d = analyze(&v).unwrap();
        assert_eq!(exit_prob_exact(&v, 0.3, 0, &d).unwrap(), (0.0, 1.0));
        assert_eq!(exit_prob_exact(&v, 0.3, 1, &d).unwrap(), (1.0, 0.0));
        assert_eq!(exit_prob_asymptotic(&d, 0).unwrap(), (0.0, 1.0));

        let v = asymmetric_saddles(-2.5, 1.5);
        let d = analyze(&v).unwrap();
        assert_eq!(d.minima.len(), 3);
        let (_, p) = exit_prob_asymptotic(&d, 1).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-6, "{p}");
        let d1 = synthetic(&[1.0, 1.0, 1.0], &[1.0, 4.0]);
        assert!((exit_prob_asymptotic(&d1, 1).unwrap().1 - 1.0 / 3.0).abs() < 1e-12);
        let d2 = synthetic(&[1.0, 1.0, 1.0], &[2.0, 2.0]);
        assert_eq!(exit_prob_asymptotic(&d2, 1).unwrap(), (0.5, 0.5));
    }

    #[test]
    fn symmetric_well_exits_evenly() {
        // Triple well, middle minimum between saddles ±1.
        let v = crate::model::library::triple_well(-3.0, 3.0);
        let d = analyze(&v).unwrap();
        let (l, r) = exit_prob_exact(&v, 0.3, 1, &d).unwrap();
        assert!((l - 0.5).abs() < 1e-9 && (r - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exact_exit_law_is_the_mirrored_split() {
        // The right half is W(2x), so its scale integral is exactly half the left
        // one at every ε: p_right = 2/3, the mirror of the rate-implied 1/3.
        let v = asymmetric_saddles(-2.5, 1.5);
        let d = analyze(&v).unwrap();
        for e in [0.4, 0.3, 0.2, 0.15] {
            let (l, r) = exit_prob_exact(&v, e, 1, &d).unwrap();
            assert!((r - 2.0 / 3.0).abs() < 1e-8, "ε = {e}: {r}");
            assert!((l + r - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn value_representation_examples() {
        let c = double_well_chain();
        let g = Grid1D::new(-3.0, 3.0, 61).unwrap();
        let set = ControlSet::uniform(-1.0, 1.0, 3).unwrap();
        let zero = ControlLaw::constant(g, set.clone(), 0.0).unwrap();
        let r1 = RunningCost::separable(vec![1.0, -2.0, 1.0], None, 0.0, 0.0);
        assert!((ergodic_value_representation(&r1, &zero, &c) - 2.0).abs() < 1e-9);
        assert!((ergodic_value_representation(&RunningCost::constant(0.7), &zero, &c) - 0.7).abs() < 1e-12);
        // A relaxed law contributes its weighted cost.
        let mixed = ControlLaw::relaxed(g, set.clone(), [0.5, 0.0, 0.5].repeat(g.n)).unwrap();
        let quad = RunningCost::separable(vec![0.0], None, 1.0, 0.0);
        assert!((ergodic_value_representation(&quad, &mixed, &c) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn built_chains_satisfy_invariants(
            mins in proptest::collection::vec(0.2f64..10.0, 1..6),
            saddles in proptest::collection::vec(0.2f64..10.0, 5),
        ) {
            let d = synthetic(&mins, &saddles[..mins.len() - 1]);
            let lap = laplace_partition(&d, 0.3).unwrap();
            let c = build_rate_matrix(&d, &lap).unwrap();
            assert_chain_invariants(&c);
            for (m, l) in c.mu.iter().zip(&lap.masses) {
                prop_assert!((m - l).abs() < 1e-12);
            }
        }
    }
}
