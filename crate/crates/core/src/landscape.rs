//! Critical points, wells, deep wells, Laplace asymptotics, Gibbs measures and
//! the one-dimensional quasi-potential.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ergodic::OccupationHistogram;
use crate::error::{ensure, Error, Result};
use crate::model::Landscape1D;
use crate::numerics::{integrate, Grid1D};

/// Curvatures smaller than this at a critical point are treated as degenerate.
pub const DEGENERACY: f64 = 1e-6;
/// Relative tolerance used for ties between well scales and saddle heights.
const TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub value: f64,
    pub curvature: f64,
}

/// Minima, saddles, depths, well scales and deep wells of a 1-D landscape.
///
/// Built in three stages: [`find_critical_points`] fills the points,
/// [`depths_and_wells`] the depths and `λ_i`, [`deep_wells`] the deep-well set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellDecomposition {
    pub minima: Vec<CriticalPoint>,
    pub maxima: Vec<CriticalPoint>,
    /// Per minimum: barrier to the left and right saddle (`None` for a half-line side).
    pub depths: Vec<(Option<f64>, Option<f64>)>,
    /// `λ_i = ½·min` of the adjacent depths; `None` when there is no saddle at all.
    pub lambdas: Vec<Option<f64>>,
    /// `λ = max_i λ_i`.
    pub lambda: Option<f64>,
    /// Indices into `minima` of the deep wells.
    pub deep: Vec<usize>,
    /// Indices into `maxima` of the saddles separating consecutive deep wells.
    pub separators: Vec<usize>,
}

impl WellDecomposition {
    pub fn metastable(&self) -> bool {
        !self.maxima.is_empty()
    }

    /// Deep-well minima `x_{m_i}`.
    pub fn deep_minima(&self) -> Vec<CriticalPoint> {
        self.deep.iter().map(|&i| self.minima[i]).collect()
    }

    /// Separating saddles `y_{m_i}`.
    pub fn separator_points(&self) -> Vec<CriticalPoint> {
        self.separators.iter().map(|&j| self.maxima[j]).collect()
    }

    /// Index of the coarse well `W_i` containing `x`.
    pub fn coarse_index(&self, x: f64) -> usize {
        self.separators.iter().filter(|&&j| x > self.maxima[j].x).count()
    }

    /// Index of the fine well `E_i` containing `x`.
    pub fn fine_index(&self, x: f64) -> usize {
        self.maxima.iter().filter(|y| x > y.x).count()
    }

    /// Default neighbourhoods `x_{m_i} ± 0.3·(distance to the nearest saddle)`.
    pub fn default_neighborhoods(&self) -> Vec<(f64, f64)> {
        self.deep_minima()
            .iter()
            .map(|m| {
                let d = self
                    .maxima
                    .iter()
                    .map(|y| (y.x - m.x).abs())
                    .fold(f64::INFINITY, f64::min);
                let r = if d.is_finite() { 0.3 * d } else { 0.3 };
                (m.x - r, m.x + r)
            })
            .collect()
    }

    /// JSON record `{"minima", "maxima", "depths", "lambda", "deep_wells"}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "minima": self.minima.iter().map(|p| p.x).collect::<Vec<_>>(),
            "maxima": self.maxima.iter().map(|p| p.x).collect::<Vec<_>>(),
            "depths": self.depths.iter().map(|(l, r)| vec![*l, *r]).collect::<Vec<_>>(),
            "lambda": self.lambda,
            "lambdas": self.lambdas,
            "deep_wells": self.deep_minima().iter().map(|p| p.x).collect::<Vec<_>>(),
            "separators": self.separator_points().iter().map(|p| p.x).collect::<Vec<_>>(),
            "curvatures_minima": self.minima.iter().map(|p| p.curvature).collect::<Vec<_>>(),
            "curvatures_maxima": self.maxima.iter().map(|p| p.curvature).collect::<Vec<_>>(),
        })
    }

    fn check_interlacing(&self) -> Result<()> {
        let n = self.minima.len();
        ensure(n >= 1, || Error::Data("landscape has no minima".into()))?;
        ensure(self.maxima.len() + 1 == n, || {
            Error::Data(format!("{} minima and {} maxima do not interlace", n, self.maxima.len()))
        })?;
        for (k, y) in self.maxima.iter().enumerate() {
            ensure(self.minima[k].x < y.x && y.x < self.minima[k + 1].x, || {
                Error::Data("critical points do not interlace".into())
            })?;
        }
        Ok(())
    }
}

/// Sign changes of `V′` on a fine grid, refined by bisection to 1e-10.
pub fn find_critical_points(v: &impl Landscape1D, interval: (f64, f64), nodes: usize) -> Result<WellDecomposition> {
    let (a, b) = interval;
    let grid = Grid1D::new(a, b, nodes.max(3))?;
    let mut roots = Vec::new();
    let mut prev = v.d1(grid.x(0));
    let mut i = 1;
    while i < grid.n {
        let x = grid.x(i);
        let cur = v.d1(x);
        if cur == 0.0 {
            roots.push(x);
            // Skip past the exact zero so it is not bracketed twice.
            i += 1;
            prev = if i < grid.n { v.d1(grid.x(i)) } else { cur };
            i += 1;
            continue;
        }
        if prev != 0.0 && prev.signum() != cur.signum() {
            let (mut lo, mut hi) = (grid.x(i - 1), x);
            let slo = prev.signum();
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                let s = v.d1(mid);
                if s == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if s.signum() == slo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
        i += 1;
    }
    let mut minima = Vec::new();
    let mut maxima = Vec::new();
    for x in roots {
        let c = v.d2(x);
        ensure(c.abs() >= DEGENERACY, || {
            Error::Data(format!("potential violates nondegeneracy: V″({x}) = {c}"))
        })?;
        let p = CriticalPoint { x, value: v.value(x), curvature: c };
        if c > 0.0 {
            minima.push(p);
        } else {
            maxima.push(p);
        }
    }
    ensure(!minima.is_empty(), || Error::Data("landscape has no minima".into()))?;
    let d = WellDecomposition {
        minima,
        maxima,
        depths: Vec::new(),
        lambdas: Vec::new(),
        lambda: None,
        deep: Vec::new(),
        separators: Vec::new(),
    };
    d.check_interlacing()?;
    Ok(d)
}

/// Depths `V(y_j) − V(x_i)` to the adjacent saddles and `λ_i = ½·min`.
pub fn depths_and_wells(points: WellDecomposition) -> Result<WellDecomposition> {
    points.check_interlacing()?;
    let mut d = points;
    let n = d.minima.len();
    d.depths = (0..n)
        .map(|i| {
            let left = (i > 0).then(|| d.maxima[i - 1].value - d.minima[i].value);
            let right = (i + 1 < n).then(|| d.maxima[i].value - d.minima[i].value);
            (left, right)
        })
        .collect();
    for (l, r) in &d.depths {
        ensure(l.is_none_or(|v| v > 0.0) && r.is_none_or(|v| v > 0.0), || {
            Error::Data("non-positive depth".into())
        })?;
    }
    d.lambdas = d
        .depths
        .iter()
        .map(|(l, r)| match (l, r) {
            (Some(a), Some(b)) => Some(0.5 * a.min(*b)),
            (Some(a), None) | (None, Some(a)) => Some(0.5 * a),
            (None, None) => None,
        })
        .collect();
    d.lambda = d.lambdas.iter().flatten().cloned().reduce(f64::max);
    Ok(d)
}

/// Deep wells `S = argmax λ_i` and the separating saddles (highest, then leftmost).
pub fn deep_wells(decomp: WellDecomposition) -> Result<WellDecomposition> {
    let mut d = if decomp.lambdas.len() == decomp.minima.len() { decomp } else { depths_and_wells(decomp)? };
    match d.lambda {
        None => {
            d.deep = vec![0];
            d.separators = Vec::new();
        }
        Some(lam) => {
            d.deep = d
                .lambdas
                .iter()
                .enumerate()
                .filter(|(_, l)| l.is_some_and(|l| (l - lam).abs() <= TIE * lam.abs().max(1.0)))
                .map(|(i, _)| i)
                .collect();
            d.separators = d
                .deep
                .windows(2)
                .map(|w| {
                    // Saddles between minima w[0] and w[1] are maxima w[0]..w[1].
                    let mut best = w[0];
                    for j in w[0]..w[1] {
                        let h = d.maxima[j].value;
                        if h > d.maxima[best].value + TIE * h.abs().max(1.0) {
                            best = j;
                        }
                    }
                    best
                })
                .collect();
        }
    }
    Ok(d)
}

/// Full pipeline with the default bracketing resolution.
pub fn analyze(v: &impl Landscape1D) -> Result<WellDecomposition> {
    deep_wells(depths_and_wells(find_critical_points(v, v.interval(), 10_000)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceData {
    /// `C = Σ_j 1/√V″(x_{m_j})`.
    pub c: f64,
    pub eps: f64,
    /// `ln` of the Laplace approximation `√π ε Σ_j e^{−2V(x_{m_j})/ε²}/√V″(x_{m_j})`.
    pub log_partition: f64,
    /// `ln(√π ε e^{−2λ/ε²} C)`, the form with the well scale in the exponent.
    pub log_partition_lambda_form: f64,
    /// Predicted mass `1/(C√V″(x_{m_i}))` of each deep well.
    pub masses: Vec<f64>,
}

pub fn laplace_partition(decomp: &WellDecomposition, eps: f64) -> Result<LaplaceData> {
    ensure(eps > 0.0, || Error::Parameter("ε must be positive".into()))?;
    ensure(!decomp.deep.is_empty(), || Error::Config("decomposition has no deep wells".into()))?;
    let deep = decomp.deep_minima();
    let c: f64 = deep.iter().map(|m| 1.0 / m.curvature.sqrt()).sum();
    let masses = deep.iter().map(|m| 1.0 / (c * m.curvature.sqrt())).collect();
    let terms: Vec<f64> = deep.iter().map(|m| -2.0 * m.value / (eps * eps) - 0.5 * m.curvature.ln()).collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    let base = PI.sqrt().ln() + eps.ln();
    let lam = decomp.lambda.unwrap_or(0.0);
    Ok(LaplaceData {
        c,
        eps,
        log_partition: base + log_sum,
        log_partition_lambda_form: base - 2.0 * lam / (eps * eps) + c.ln(),
        masses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsMeasure {
    pub histogram: OccupationHistogram,
    /// `ln ∫ e^{−2V/ε²}` over the interval.
    pub log_partition: f64,
}

impl GibbsMeasure {
    /// Mass of each coarse well of `decomp`, summing bins by their centres.
    pub fn well_masses(&self, decomp: &WellDecomposition) -> Vec<f64> {
        let mut out = vec![0.0; decomp.deep.len().max(1)];
        for (c, m) in self.histogram.centers().iter().zip(&self.histogram.masses) {
            out[decomp.coarse_index(*c)] += m;
        }
        out
    }
}

/// Gibbs law `∝ e^{−2V/ε²}` on `bins` equal bins, with the minimum subtracted.
pub fn gibbs_quadrature(v: &impl Landscape1D, eps: f64, interval: (f64, f64), bins: usize) -> Result<GibbsMeasure> {
    ensure(eps > 0.0, || Error::Parameter("ε must be positive".into()))?;
    let (a, b) = interval;
    ensure(a < b && bins >= 1, || Error::Config("empty Gibbs interval".into()))?;
    let k = 2.0 / (eps * eps);
    let probe = Grid1D::new(a, b, 20 * bins + 1)?;
    let vmin = probe.nodes().iter().map(|&x| v.value(x)).fold(f64::INFINITY, f64::min);
    let edges = OccupationHistogram::uniform_edges(a, b, bins);
    let raw: Vec<f64> = edges.windows(2).map(|w| integrate(|x| (-k * (v.value(x) - vmin)).exp(), w[0], w[1], 9)).collect();
    let z: f64 = raw.iter().sum();
    Ok(GibbsMeasure {
        histogram: OccupationHistogram::from_masses(edges, raw.iter().map(|m| m / z).collect())?,
        log_partition: z.ln() - k * vmin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPotentialCurve {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub a_hat: f64,
}

impl QuasiPotentialCurve {
    /// Linear interpolation between nodes.
    pub fn value_at(&self, x: f64) -> f64 {
        let i = self.grid.cell(x);
        let t = ((x - self.grid.x(i)) / self.grid.step()).clamp(0.0, 1.0);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// `inf_{|x| ≥ r}` over the tabulated range.
    pub fn inf_outside(&self, r: f64) -> f64 {
        let inside = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .filter(|(x, _)| x.abs() >= r - 1e-12)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        inside.min(self.value_at(r)).min(self.value_at(-r))
    }
}

/// `V(0, x) = (2/â) ∫₀ˣ −b(s) ds`, valid for fields attracted to 0.
pub fn quasi_potential_1d(b: &dyn Fn(f64) -> f64, a_hat: f64, grid: Grid1D) -> Result<QuasiPotentialCurve> {
    ensure(a_hat > 0.0, || Error::Parameter("â must be positive".into()))?;
    let zero = grid.node_of(0.0).ok_or_else(|| Error::Config("quasi-potential grid must have a node at 0".into()))?;
    ensure(b(0.0) == 0.0, || Error::Data("quasi-potential formula invalid: b(0) ≠ 0".into()))?;
    for x in grid.nodes() {
        ensure(x == 0.0 || x * b(x) < 0.0, || {
            Error::Data(format!("quasi-potential formula invalid: field not attracted to 0 at {x}"))
        })?;
    }
    let mut values = vec![0.0; grid.n];
    for i in zero + 1..grid.n {
        values[i] = values[i - 1] + integrate(|s| -b(s), grid.x(i - 1), grid.x(i), 9);
    }
    for i in (0..zero).rev() {
        values[i] = values[i + 1] - integrate(|s| -b(s), grid.x(i), grid.x(i + 1), 9);
    }
    values.iter_mut().for_each(|v| *v *= 2.0 / a_hat);
    Ok(QuasiPotentialCurve { grid, values, a_hat })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEstimate {
    pub value: f64,
    /// Horizon at which the minimum was attained.
    pub horizon: f64,
    /// Spread (max − min) of the restart results at that horizon.
    pub dispersion: f64,
}

/// Midpoint-discretized action `½ Σ h ((φ_{k+1} − φ_k)/h − b(φ̄_k))² / â`.
fn discrete_action(b: &dyn Fn(f64) -> f64, a_hat: f64, path: &[f64], h: f64) -> f64 {
    path.windows(2)
        .map(|w| {
            let r = (w[1] - w[0]) / h - b(0.5 * (w[0] + w[1]));
            0.5 * h * r * r / a_hat
        })
        .sum()
}

fn segment(b: &dyn Fn(f64) -> f64, a_hat: f64, p: f64, q: f64, h: f64) -> f64 {
    let r = (q - p) / h - b(0.5 * (p + q));
    0.5 * h * r * r / a_hat
}

/// Brute-force minimum of the action over piecewise-linear paths `0 → x_target`
/// on horizon `T` with `n_steps` segments: over-relaxed coordinate descent with
/// seeded random restarts. Returns the best over the horizon ladder `horizons`.
pub fn action_oracle(
    b: &dyn Fn(f64) -> f64,
    a_hat: f64,
    x_target: f64,
    horizons: &[f64],
    n_steps: usize,
    restarts: usize,
    seed: u64,
) -> Result<ActionEstimate> {
    ensure((2..=200).contains(&n_steps), || Error::Parameter("action oracle uses 2..=200 steps".into()))?;
    ensure(!horizons.is_empty() && horizons.iter().all(|t| *t > 0.0), || {
        Error::Parameter("horizons must be positive".into())
    })?;
    if x_target == 0.0 {
        return Ok(ActionEstimate { value: 0.0, horizon: horizons[0], dispersion: 0.0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = ActionEstimate { value: f64::INFINITY, horizon: f64::NAN, dispersion: f64::NAN };
    for &t in horizons {
        let h = t / n_steps as f64;
        let mut results = Vec::with_capacity(restarts.max(1));
        for r in 0..restarts.max(1) {
            let mut path: Vec<f64> = (0..=n_steps)
                .map(|k| {
                    let s = k as f64 / n_steps as f64;
                    let base = x_target * s;
                    if r == 0 || k == 0 || k == n_steps {
                        base
                    } else {
                        base + 0.3 * x_target.abs() * rng.random_range(-1.0..1.0)
                    }
                })
                .collect();
            descend(b, a_hat, &mut path, h);
            results.push(discrete_action(b, a_hat, &path, h));
        }
        let lo = results.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = results.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo < best.value {
            best = ActionEstimate { value: lo, horizon: t, dispersion: hi - lo };
        }
    }
    Ok(best)
}

fn descend(b: &dyn Fn(f64) -> f64, a_hat: f64, path: &mut [f64], h: f64) {
    let n = path.len() - 1;
    let scale = path.iter().map(|p| p.abs()).fold(0.0, f64::max).max(1e-3);
    let omega = 1.8;
    for _ in 0..200_000 {
        let mut moved = 0.0f64;
        for i in 1..n {
            let (p, q) = (path[i - 1], path[i + 1]);
            let local = |z: f64| segment(b, a_hat, p, z, h) + segment(b, a_hat, z, q, h);
            let z = path[i];
            let d = 1e-6 * scale;
            let (fm, f0, fp) = (local(z - d), local(z), local(z + d));
            let g = (fp - fm) / (2.0 * d);
            let c = (fp - 2.0 * f0 + fm) / (d * d);
            if !(c > 0.0) || g == 0.0 {
                continue;
            }
            let newton = -g / c;
            let mut step = omega * newton;
            if local(z + step) > f0 {
                step = newton;
                if local(z + step) > f0 {
                    continue;
                }
            }
            path[i] = z + step;
            moved = moved.max(step.abs());
        }
        if moved < 1e-11 * scale {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::library::{asymmetric_saddles, double_well, triple_well};
    use crate::model::Potential1D;

    #[test]
    fn double_well_points() {
        let d = analyze(&double_well(-3.0, 3.0)).unwrap();
        let xs: Vec<f64> = d.minima.iter().map(|p| p.x).collect();
        assert!((xs[0] + 1.0).abs() < 1e-9 && (xs[1] - 1.0).abs() < 1e-9);
        assert!(d.maxima[0].x.abs() < 1e-9);
        assert!((d.minima[0].curvature - 2.0).abs() < 1e-8 && (d.maxima[0].curvature + 1.0).abs() < 1e-8);
        assert!((d.depths[0].1.unwrap() - 0.25).abs() < 1e-12);
        assert!((d.lambda.unwrap() - 0.125).abs() < 1e-12);
        assert_eq!(d.deep, vec![0, 1]);
        assert_eq!(d.coarse_index(-0.5), 0);
        assert_eq!(d.coarse_index(0.5), 1);
        let j = d.to_json();
        assert_eq!(j["deep_wells"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn single_well_has_no_metastability() {
        let v = Potential1D::polynomial(vec![0.0, 0.0, 0.5], 0.5, -3.0, 3.0).unwrap();
        let d = analyze(&v).unwrap();
        assert_eq!(d.minima.len(), 1);
        assert!(d.maxima.is_empty() && d.lambda.is_none() && !d.metastable());
        assert_eq!(d.deep, vec![0]);
    }

    #[test]
    fn triple_well_structure() {
        let d = analyze(&triple_well(-3.0, 3.0)).unwrap();
        let xs: Vec<f64> = d.minima.iter().map(|p| p.x).collect();
        for (a, b) in xs.iter().zip([-2.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((d.minima[1].curvature - 4.0).abs() < 1e-7);
        assert!((d.minima[0].curvature - 24.0).abs() < 1e-7);
        assert!((d.maxima[0].curvature + 6.0).abs() < 1e-7);
        assert!((d.lambdas[1].unwrap() - 11.0 / 24.0).abs() < 1e-12);
        assert!((d.lambda.unwrap() - 9.0 / 8.0).abs() < 1e-12);
        assert_eq!(d.deep, vec![0, 2]);
        // Equal-height saddles: the leftmost separates.
        assert_eq!(d.separators, vec![0]);
        assert_eq!(d.coarse_index(-1.5), 0);
        assert_eq!(d.coarse_index(0.0), 1);
    }

    #[test]
    fn tilted_double_well_has_one_deep_well() {
        let v = Potential1D::polynomial(vec![0.0, 0.1, -0.5, 0.0, 0.25], 1.0, -3.0, 3.0).unwrap();
        let d = analyze(&v).unwrap();
        assert_eq!(d.deep, vec![0]);
        assert!(d.separators.is_empty());
    }

    #[test]
    fn degenerate_points_are_rejected() {
        let v = Potential1D::polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0], 1.0, -2.0, 2.0).unwrap();
        assert!(matches!(analyze(&v), Err(Error::Data(_))));
    }

    #[test]
    fn scale_equivariance() {
        let v = triple_well(-3.0, 3.0);
        let d = analyze(&v).unwrap();
        let d2 = analyze(&v.scaled(2.5).unwrap()).unwrap();
        let d3 = analyze(&v.plus(&[7.0]).unwrap()).unwrap();
        assert_eq!(d.deep, d2.deep);
        assert_eq!(d.deep, d3.deep);
        assert!((d2.lambda.unwrap() - 2.5 * d.lambda.unwrap()).abs() < 1e-9);
        assert!((d3.lambda.unwrap() - d.lambda.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn laplace_constants() {
        let d = analyze(&double_well(-3.0, 3.0)).unwrap();
        let l = laplace_partition(&d, 0.3).unwrap();
        assert!((l.c - 2f64.sqrt()).abs() < 1e-8);
        assert!(l.masses.iter().all(|m| (m - 0.5).abs() < 1e-12));
        let d = analyze(&triple_well(-3.0, 3.0)).unwrap();
        let l = laplace_partition(&d, 0.3).unwrap();
        assert!((l.c - 2.0 / 24f64.sqrt()).abs() < 1e-8);
        let mut fake = d.clone();
        fake.minima[0].curvature = 2.0;
        fake.minima[2].curvature = 8.0;
        let l = laplace_partition(&fake, 0.3).unwrap();
        assert!((l.masses[0] - 2.0 / 3.0).abs() < 1e-12 && (l.masses[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((l.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_gaussian() {
        let v = Potential1D::polynomial(vec![0.0, 0.0, 0.5], 0.5, -3.0, 3.0).unwrap();
        let eps = 0.5;
        let g = gibbs_quadrature(&v, eps, (-3.0, 3.0), 2000).unwrap();
        let sd = eps / 2f64.sqrt();
        let exact: Vec<f64> = g
            .histogram
            .edges
            .windows(2)
            .map(|w| integrate(|x| (-x * x / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt()), w[0], w[1], 9))
            .collect();
        let tv: f64 = 0.5 * exact.iter().zip(&g.histogram.masses).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 1e-3, "tv = {tv}");
        assert!((g.log_partition - (PI * eps * eps).sqrt().ln()).abs() < 1e-6);
    }

    #[test]
    fn gibbs_double_well_symmetry() {
        let v = double_well(-3.0, 3.0);
        let d = analyze(&v).unwrap();
        let g = gibbs_quadrature(&v, 0.3, (-3.0, 3.0), 2000).unwrap();
        let m = g.well_masses(&d);
        assert!((m[0] - 0.5).abs() < 1e-6 && (m[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn exit_probability_instance_has_equal_saddles() {
        let d = analyze(&asymmetric_saddles(-2.5, 1.5)).unwrap();
        assert_eq!(d.minima.len(), 3);
        assert!((d.maxima[0].curvature + 6.0).abs() < 1e-6);
        assert!((d.maxima[1].curvature + 24.0).abs() < 1e-6);
        assert!((d.maxima[0].value - d.maxima[1].value).abs() < 1e-12);
    }

    #[test]
    fn quasi_potential_closed_forms() {
        let g = Grid1D::new(-2.0, 2.0, 401).unwrap();
        let q = quasi_potential_1d(&|y| -y, 1.0, g).unwrap();
        assert!((q.value_at(1.5) - 2.25).abs() < 1e-12);
        let q = quasi_potential_1d(&|y| -y * y * y, 2.0, g).unwrap();
        assert!((q.value_at(-1.2) - 1.2f64.powi(4) / 4.0).abs() < 1e-12);
        let q = quasi_potential_1d(&|y| -2.0 * y, 1.0, g).unwrap();
        assert!((q.value_at(1.0) - 2.0).abs() < 1e-12);
        assert!((q.inf_outside(1.0) - 2.0).abs() < 1e-12);
        assert!(quasi_potential_1d(&|y| y, 1.0, g).is_err());
        assert!(quasi_potential_1d(&|y| -y, 1.0, Grid1D::new(-1.0, 2.0, 8).unwrap()).is_err());
    }

    #[test]
    fn action_oracle_examples() {
        let ts = [2.0, 4.0, 6.0];
        let one = action_oracle(&|y| -y, 1.0, 1.0, &ts, 100, 3, 1).unwrap();
        assert!((one.value - 1.0).abs() < 0.02, "{one:?}");
        let two = action_oracle(&|y| -y, 1.0, 2.0, &ts, 100, 3, 1).unwrap();
        assert!((two.value - 4.0).abs() < 0.08 && (two.value / one.value - 4.0).abs() < 0.01);
        assert_eq!(action_oracle(&|y| -y, 1.0, 0.0, &ts, 100, 3, 1).unwrap().value, 0.0);
    }
}
