use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::Grid1D;

/// Compact action interval `[min, max]` discretized into sorted distinct points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    pub min: f64,
    pub max: f64,
    points: Vec<f64>,
}

impl ControlSet {
    /// `n` equally spaced points; `n = 1` with `min == max` gives the singleton `{min}`
    /// (an uncontrolled problem).
    pub fn uniform(min: f64, max: f64, n: usize) -> Result<Self> {
        if n == 1 && min == max && min.is_finite() {
            return Ok(ControlSet { min, max, points: vec![min] });
        }
        ensure(n >= 2, || Error::Config(format!("control set needs at least 2 points, got {n}")))?;
        ensure(min < max, || Error::Config(format!("empty control interval [{min}, {max}]")))?;
        let g = Grid1D::new(min, max, n)?;
        Ok(ControlSet { min, max, points: g.nodes() })
    }

    pub fn from_points(mut points: Vec<f64>) -> Result<Self> {
        points.sort_by(|a, b| a.partial_cmp(b).expect("NaN control point"));
        ensure(!points.is_empty(), || Error::Config("control set needs at least one point".into()))?;
        ensure(points.windows(2).all(|w| w[0] < w[1]), || {
            Error::Config("control points must be distinct".into())
        })?;
        Ok(ControlSet { min: points[0], max: *points.last().unwrap(), points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weight vector of the mean-preserving split of `u` between the two
    /// bracketing action points (a unit weight when `u` is an action point).
    pub fn split(&self, u: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.points.len()];
        let u = u.clamp(self.min, self.max);
        let k = self.points.partition_point(|&p| p <= u);
        if k == 0 {
            w[0] = 1.0;
        } else if k == self.points.len() || self.points[k - 1] == u {
            w[k - 1] = 1.0;
        } else {
            let (a, b) = (self.points[k - 1], self.points[k]);
            let t = (u - a) / (b - a);
            w[k - 1] = 1.0 - t;
            w[k] = t;
        }
        w
    }

    /// Index of the action point closest to `u`.
    pub fn nearest(&self, u: f64) -> usize {
        let mut best = 0;
        for (k, p) in self.points.iter().enumerate() {
            if (p - u).abs() < (self.points[best] - u).abs() {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LawValues {
    /// Point mass `δ_{u(x)}` per node; values may lie between action points.
    Precise(Vec<f64>),
    /// Row-major `n_nodes × n_actions` probability weights.
    Relaxed(Vec<f64>),
}

/// Stationary Markov control tabulated on a spatial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLaw {
    pub grid: Grid1D,
    pub set: ControlSet,
    pub values: LawValues,
}

const WEIGHT_TOL: f64 = 1e-12;

impl ControlLaw {
    pub fn constant(grid: Grid1D, set: ControlSet, u: f64) -> Result<Self> {
        Self::precise(grid, set, vec![u; grid.n])
    }

    pub fn from_fn(grid: Grid1D, set: ControlSet, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().into_iter().map(f).collect();
        Self::precise(grid, set, values)
    }

    pub fn precise(grid: Grid1D, set: ControlSet, values: Vec<f64>) -> Result<Self> {
        let law = ControlLaw { grid, set, values: LawValues::Precise(values) };
        law.validate()?;
        Ok(law)
    }

    pub fn relaxed(grid: Grid1D, set: ControlSet, weights: Vec<f64>) -> Result<Self> {
        let law = ControlLaw { grid, set, values: LawValues::Relaxed(weights) };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.n;
        match &self.values {
            LawValues::Precise(v) => {
                ensure(v.len() == n, || Error::Config("control law length mismatch".into()))?;
                for (i, u) in v.iter().enumerate() {
                    ensure(*u >= self.set.min - 1e-12 && *u <= self.set.max + 1e-12, || {
                        Error::Data(format!("control value {u} at node {i} outside the control set"))
                    })?;
                }
            }
            LawValues::Relaxed(w) => {
                let m = self.set.len();
                ensure(w.len() == n * m, || Error::Config("weight table size mismatch".into()))?;
                for (i, row) in w.chunks(m).enumerate() {
                    let s: f64 = row.iter().sum();
                    ensure(row.iter().all(|&p| p >= 0.0) && (s - 1.0).abs() <= WEIGHT_TOL, || {
                        Error::Data(format!("weights at node {i} are not a probability vector"))
                    })?;
                }
            }
        }
        Ok(())
    }

    pub fn is_precise(&self) -> bool {
        matches!(self.values, LawValues::Precise(_))
    }

    /// Mean action `Σ u_k w_k` at node `i`.
    pub fn barycenter(&self, i: usize) -> f64 {
        match &self.values {
            LawValues::Precise(v) => v[i],
            LawValues::Relaxed(w) => {
                let m = self.set.len();
                w[i * m..(i + 1) * m]
                    .iter()
                    .zip(self.set.points())
                    .map(|(p, u)| p * u)
                    .sum()
            }
        }
    }

    pub fn barycenters(&self) -> Vec<f64> {
        (0..self.grid.n).map(|i| self.barycenter(i)).collect()
    }

    /// Weight vector at node `i`; precise values are split between the
    /// bracketing action points.
    pub fn weights_at(&self, i: usize) -> Vec<f64> {
        match &self.values {
            LawValues::Precise(v) => self.set.split(v[i]),
            LawValues::Relaxed(w) => {
                let m = self.set.len();
                w[i * m..(i + 1) * m].to_vec()
            }
        }
    }

    /// Full weight table, row-major.
    pub fn weight_table(&self) -> Vec<f64> {
        (0..self.grid.n).flat_map(|i| self.weights_at(i)).collect()
    }

    /// Node used for the state `x` (nearest node, edge-extended).
    #[inline]
    pub fn node(&self, x: f64) -> usize {
        self.grid.nearest(x)
    }

    /// Barycentric control at `x` by nearest-node lookup.
    #[inline]
    pub fn value_at(&self, x: f64) -> f64 {
        self.barycenter(self.node(x))
    }

    /// ∫_a^b of the nearest-node (piecewise-constant) barycentric control, exact.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let g = self.grid;
        let h = g.step();
        // Cell k covers [x_k − h/2, x_k + h/2], outer cells extend to ±∞.
        let edge = |k: usize| g.x(k) + 0.5 * h;
        let (ia, ib) = (g.nearest(a), g.nearest(b));
        if ia == ib {
            return self.barycenter(ia) * (b - a);
        }
        let mut s = self.barycenter(ia) * (edge(ia) - a);
        for k in ia + 1..ib {
            s += self.barycenter(k) * h;
        }
        s + self.barycenter(ib) * (b - edge(ib - 1))
    }
}
