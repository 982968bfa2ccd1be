//! Ergodic HJB `ρ = min_u [m(x,u)φ′ + r(x,u)] + ½a(x)φ″` on a 1-D grid by
//! policy iteration.
//!
//! The upwind discretization is the generator of a birth–death chain with
//! rates `a/(2h²) + m±/h` and reflecting ends. Each policy evaluation is
//! solved exactly in O(n): `ρ` from the chain's stationary law, then the
//! increments of `φ` by a flux recursion run inward from both ends.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::model::{ControlLaw, ControlSet, DiffusionSpec, DriftSpec, RunningCost};
use crate::numerics::Grid1D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbOptions {
    pub max_sweeps: usize,
    /// Relative margin an action must win by to replace the current one.
    pub improvement_tol: f64,
}

impl Default for HjbOptions {
    fn default() -> Self {
        HjbOptions { max_sweeps: 100, improvement_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjbSolution {
    pub eps: f64,
    pub rho: f64,
    pub grid: Grid1D,
    /// Bias function with `φ(x₀) = 0` at the grid midpoint.
    pub phi: Vec<f64>,
    pub law: ControlLaw,
    pub sweeps: usize,
    pub converged: bool,
    /// `ρ` after each policy evaluation.
    pub rho_history: Vec<f64>,
    /// HJB residual after each policy evaluation.
    pub residual_history: Vec<f64>,
    pub residual: f64,
}

impl HjbSolution {
    pub fn u_star(&self) -> Vec<f64> {
        self.law.barycenters()
    }

    /// CSV `x,phi,u_star`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,phi,u_star")?;
        for (i, x) in self.grid.nodes().iter().enumerate() {
            writeln!(w, "{},{},{}", x, self.phi[i], self.law.barycenter(i))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({"rho_eps": self.rho, "sweeps": self.sweeps, "residual": self.residual,
                           "converged": self.converged, "eps": self.eps})
    }
}

/// Drift, cost and diffusion tabulated at every (node, action).
struct Tables {
    n: usize,
    k: usize,
    h: f64,
    m: Vec<f64>,
    r: Vec<f64>,
    a: Vec<f64>,
    points: Vec<f64>,
}

impl Tables {
    fn new(drift: &DriftSpec, a: Vec<f64>, cost: &RunningCost, grid: Grid1D, set: &ControlSet) -> Self {
        let xs = grid.nodes();
        let points = set.points().to_vec();
        let k = points.len();
        let mut m = Vec::with_capacity(xs.len() * k);
        let mut r = Vec::with_capacity(xs.len() * k);
        for &x in &xs {
            for &u in &points {
                m.push(drift.eval1(x, u));
                r.push(cost.eval1(x, u));
            }
        }
        Tables { n: xs.len(), k, h: grid.step(), m, r, a, points }
    }

    /// `(q_{i,i−1}, q_{i,i+1})` under action `c`.
    #[inline]
    fn rates(&self, i: usize, c: usize) -> (f64, f64) {
        let d = 0.5 * self.a[i] / (self.h * self.h);
        let m = self.m[i * self.k + c];
        let down = if i == 0 { 0.0 } else { d + (-m).max(0.0) / self.h };
        let up = if i + 1 == self.n { 0.0 } else { d + m.max(0.0) / self.h };
        (down, up)
    }

    /// `m⁺Δ_i/h − m⁻Δ_{i−1}/h + r` for action `c` at node `i` (the diffusion part is action-free).
    #[inline]
    fn hamiltonian(&self, i: usize, c: usize, delta: &[f64]) -> f64 {
        let m = self.m[i * self.k + c];
        let fwd = if i + 1 < self.n { m.max(0.0) * delta[i] / self.h } else { 0.0 };
        let bwd = if i > 0 { (-m).max(0.0) * delta[i - 1] / self.h } else { 0.0 };
        fwd - bwd + self.r[i * self.k + c]
    }
}

/// Exact evaluation of a policy: returns `(ρ, Δ)` with `Δ_i = φ_{i+1} − φ_i`.
fn evaluate(t: &Tables, policy: &[usize]) -> Result<(f64, Vec<f64>)> {
    let n = t.n;
    let rates: Vec<(f64, f64)> = (0..n).map(|i| t.rates(i, policy[i])).collect();
    let r: Vec<f64> = (0..n).map(|i| t.r[i * t.k + policy[i]]).collect();
    for (i, (d, u)) in rates.iter().enumerate() {
        ensure((i == 0 || *d > 0.0) && (i + 1 == n || *u > 0.0), || {
            Error::Numerical(format!("zero transition rate at node {i}; grid too coarse or ε = 0"))
        })?;
    }
    // Log stationary weights, built outward from the middle so mirror-symmetric
    // problems give mirror-identical weights.
    let mid = n / 2;
    let mut lp = vec![0.0; n];
    for i in mid..n - 1 {
        lp[i + 1] = lp[i] + (rates[i].1 / rates[i + 1].0).ln();
    }
    for i in (1..=mid).rev() {
        lp[i - 1] = lp[i] + (rates[i].0 / rates[i - 1].1).ln();
    }
    let top = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pi: Vec<f64> = lp.iter().map(|l| (l - top).exp()).collect();
    // Pairwise from the outside in, so the sums are mirror invariant.
    let (mut z, mut s) = (0.0, 0.0);
    for i in 0..n.div_ceil(2) {
        let j = n - 1 - i;
        if i == j {
            z += pi[i];
            s += pi[i] * r[i];
        } else {
            z += pi[i] + pi[j];
            s += pi[i] * r[i] + pi[j] * r[j];
        }
    }
    let rho = s / z;
    // Each increment is computed from the side holding less stationary mass.
    let mut left_mass = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc += pi[i];
        left_mass[i] = acc;
    }
    let mut delta = vec![0.0; n - 1];
    let split = (0..n - 1).find(|&i| left_mass[i] > z - left_mass[i]).unwrap_or(n - 1);
    for i in 0..split {
        let prev = if i == 0 { 0.0 } else { rates[i].0 * delta[i - 1] };
        delta[i] = (prev + (rho - r[i])) / rates[i].1;
    }
    for j in (split..n - 1).rev() {
        let next = if j + 2 == n { 0.0 } else { rates[j + 1].1 * -delta[j + 1] };
        delta[j] = -((next + (rho - r[j + 1])) / rates[j + 1].0);
    }
    ensure(rho.is_finite() && delta.iter().all(|d| d.is_finite()), || {
        Error::Numerical("policy evaluation produced non-finite values".into())
    })?;
    Ok((rho, delta))
}

/// Minimizer at node `i`; ties (relative `tol`) go to the smallest `|u|`, then the smallest `u`.
fn argmin_tie_broken(t: &Tables, i: usize, delta: &[f64], tol: f64) -> usize {
    let vals: Vec<f64> = (0..t.k).map(|c| t.hamiltonian(i, c, delta)).collect();
    let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let slack = tol * (1.0 + best.abs());
    (0..t.k)
        .filter(|&c| vals[c] <= best + slack)
        .min_by(|&a, &b| {
            let (ua, ub) = (t.points[a], t.points[b]);
            ua.abs().total_cmp(&ub.abs()).then(ua.total_cmp(&ub))
        })
        .unwrap()
}

fn residual(t: &Tables, rho: f64, delta: &[f64]) -> f64 {
    (1..t.n - 1)
        .map(|i| {
            let d2 = 0.5 * t.a[i] * (delta[i] - delta[i - 1]) / (t.h * t.h);
            let h = (0..t.k).map(|c| t.hamiltonian(i, c, delta)).fold(f64::INFINITY, f64::min);
            (d2 + h - rho).abs()
        })
        .fold(0.0, f64::max)
}

fn integrate_phi(grid: Grid1D, delta: &[f64]) -> Vec<f64> {
    let mut phi = vec![0.0; grid.n];
    for i in 0..delta.len() {
        phi[i + 1] = phi[i] + delta[i];
    }
    let x0 = phi[grid.n / 2];
    phi.iter_mut().for_each(|p| *p -= x0);
    phi
}

/// Policy iteration for the perturbed ergodic HJB with diffusion `a = σ² + ε²`.
pub fn solve_ergodic_hjb(
    drift: &DriftSpec,
    sigma: &DiffusionSpec,
    eps: f64,
    cost: &RunningCost,
    grid: Grid1D,
    set: &ControlSet,
    opts: &HjbOptions,
) -> Result<HjbSolution> {
    ensure(eps > 0.0, || Error::Parameter("the HJB solver needs ε > 0".into()))?;
    solve_with_diffusion(drift, &sigma.build_perturbation(eps)?, eps, cost, grid, set, opts)
}

/// Same solver with the perturbed diffusion `σ_ε` supplied directly
/// (e.g. the additive form `σ + εσ̂`); `eps` is only recorded.
pub fn solve_with_diffusion(
    drift: &DriftSpec,
    sigma_eps: &DiffusionSpec,
    eps: f64,
    cost: &RunningCost,
    grid: Grid1D,
    set: &ControlSet,
    opts: &HjbOptions,
) -> Result<HjbSolution> {
    ensure(grid.n >= 201, || Error::Config(format!("HJB grid needs at least 201 nodes, got {}", grid.n)))?;
    ensure(drift.dim() == 1 && sigma_eps.dim() == 1, || Error::Unsupported("the HJB solver is one-dimensional".into()))?;
    let a: Vec<f64> = grid.nodes().iter().map(|&x| sigma_eps.eval1(x).powi(2)).collect();
    ensure(a.iter().all(|v| *v > 0.0 && v.is_finite()), || {
        Error::Parameter("perturbed diffusion must be non-degenerate on the grid".into())
    })?;
    let t = Tables::new(drift, a, cost, grid, set);
    let zero = vec![0.0; grid.n - 1];
    let mut policy: Vec<usize> = (0..t.n).map(|i| argmin_tie_broken(&t, i, &zero, opts.improvement_tol)).collect();
    let mut rho_history = Vec::new();
    let mut residual_history = Vec::new();
    let mut converged = false;
    let mut delta = zero;
    let mut rho = f64::NAN;
    for _ in 0..opts.max_sweeps {
        let (r, d) = evaluate(&t, &policy)?;
        rho = r;
        delta = d;
        rho_history.push(rho);
        residual_history.push(residual(&t, rho, &delta));
        let mut changed = false;
        for i in 0..t.n {
            let cur = t.hamiltonian(i, policy[i], &delta);
            let cand = argmin_tie_broken(&t, i, &delta, opts.improvement_tol);
            let val = t.hamiltonian(i, cand, &delta);
            if val < cur - opts.improvement_tol * (1.0 + cur.abs()) {
                policy[i] = cand;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    let law = ControlLaw::precise(grid, set.clone(), policy.iter().map(|&c| t.points[c]).collect())?;
    Ok(HjbSolution {
        eps,
        rho,
        grid,
        phi: integrate_phi(grid, &delta),
        law,
        sweeps: rho_history.len(),
        converged,
        residual: *residual_history.last().unwrap(),
        rho_history,
        residual_history,
    })
}

/// Independent solves over an ε ladder, in parallel.
pub fn solve_ladder(
    drift: &DriftSpec,
    sigma: &DiffusionSpec,
    eps: &[f64],
    cost: &RunningCost,
    grid: Grid1D,
    set: &ControlSet,
    opts: &HjbOptions,
) -> Result<Vec<HjbSolution>> {
    eps.par_iter().map(|&e| solve_ergodic_hjb(drift, sigma, e, cost, grid, set, opts)).collect()
}

/// Per-node argmin of `m(x,u)·D₁φ + r(x,u)` with upwind `D₁φ`;
/// ties go to the smallest `|u|`, then the smallest `u`.
pub fn minimizing_selector(phi: &[f64], grid: Grid1D, drift: &DriftSpec, cost: &RunningCost, set: &ControlSet) -> Result<ControlLaw> {
    ensure(phi.len() == grid.n, || Error::Config("φ does not match the grid".into()))?;
    let t = Tables::new(drift, vec![0.0; grid.n], cost, grid, set);
    let delta: Vec<f64> = phi.windows(2).map(|w| w[1] - w[0]).collect();
    let values = (0..grid.n).map(|i| t.points[argmin_tie_broken(&t, i, &delta, 1e-12)]).collect();
    ControlLaw::precise(grid, set.clone(), values)
}

/// Linear extrapolation in `ε` of the barycentric controls of two solutions
/// to `ε = 0`, snapped to the nearest action point.
pub fn extrapolate_control(a: &HjbSolution, b: &HjbSolution) -> Result<ControlLaw> {
    ensure(a.grid == b.grid && a.eps != b.eps, || Error::Config("extrapolation needs two ε on one grid".into()))?;
    let set = &a.law.set;
    let values = (0..a.grid.n)
        .map(|i| {
            let (ua, ub) = (a.law.barycenter(i), b.law.barycenter(i));
            let u0 = ua - a.eps * (ub - ua) / (b.eps - a.eps);
            set.points()[set.nearest(u0)]
        })
        .collect();
    ControlLaw::precise(a.grid, set.clone(), values)
}
