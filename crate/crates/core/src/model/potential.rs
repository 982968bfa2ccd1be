use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::Grid1D;

/// Anything that can be read as a 1-D landscape `V`, `V′`, `V″` on an interval.
pub trait Landscape1D: Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
    fn interval(&self) -> (f64, f64);
}

const MAX_DEGREE: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Piece {
    /// Left end of the piece; the first piece extends to −∞.
    start: f64,
    coeffs: Vec<f64>,
}

/// Polynomial or piecewise-polynomial potential with exact derivatives.
///
/// Coefficients are in increasing degree: `[c0, c1, c2, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential1D {
    pieces: Vec<Piece>,
    beta: f64,
    lo: f64,
    hi: f64,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| k as f64 * a)
        .collect()
}

impl Potential1D {
    /// Single polynomial on the working interval `[lo, hi]`.
    pub fn polynomial(coeffs: Vec<f64>, beta: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::piecewise(vec![(f64::NEG_INFINITY, coeffs)], beta, lo, hi)
    }

    /// Piecewise polynomial; each entry is `(left breakpoint, coefficients)`,
    /// breakpoints increasing. The first breakpoint is ignored (−∞).
    pub fn piecewise(pieces: Vec<(f64, Vec<f64>)>, beta: f64, lo: f64, hi: f64) -> Result<Self> {
        ensure(!pieces.is_empty(), || Error::Config("potential has no pieces".into()))?;
        ensure(beta > 0.0, || Error::Config(format!("growth exponent must be positive, got {beta}")))?;
        ensure(lo < hi, || Error::Config(format!("empty working interval [{lo}, {hi}]")))?;
        for (k, (_, c)) in pieces.iter().enumerate() {
            ensure(!c.is_empty() && c.len() <= MAX_DEGREE + 1, || {
                Error::Config(format!("piece {k}: degree must be between 0 and {MAX_DEGREE}"))
            })?;
            ensure(c.iter().all(|a| a.is_finite()), || {
                Error::Config(format!("piece {k}: non-finite coefficient"))
            })?;
        }
        for w in pieces.windows(2).skip(1) {
            ensure(w[0].0 < w[1].0, || Error::Config("breakpoints must increase".into()))?;
        }
        let mut pieces: Vec<Piece> = pieces
            .into_iter()
            .map(|(start, coeffs)| Piece { start, coeffs })
            .collect();
        pieces[0].start = f64::NEG_INFINITY;
        let v = Potential1D { pieces, beta, lo, hi };
        v.check_growth()?;
        Ok(v)
    }

    fn check_growth(&self) -> Result<()> {
        for p in [self.pieces.first().unwrap(), self.pieces.last().unwrap()] {
            let c = &p.coeffs;
            let deg = c.iter().rposition(|a| *a != 0.0).unwrap_or(0);
            ensure(deg % 2 == 0 && c[deg] > 0.0 && (deg as f64) > 1.0 + self.beta, || {
                Error::Config(format!(
                    "outer piece of degree {deg} does not dominate |x|^(1+{})",
                    self.beta
                ))
            })?;
        }
        Ok(())
    }

    fn piece(&self, x: f64) -> &Piece {
        let k = self.pieces.partition_point(|p| p.start <= x);
        &self.pieces[k.saturating_sub(1)]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_polynomial(&self) -> bool {
        self.pieces.len() == 1
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.start).collect()
    }

    /// `c·V`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let pieces = self
            .pieces
            .iter()
            .map(|p| (p.start, p.coeffs.iter().map(|a| a * c).collect()))
            .collect();
        Self::piecewise(pieces, self.beta, self.lo, self.hi)
    }

    /// `V + q` for a polynomial `q` (applied to every piece).
    pub fn plus(&self, q: &[f64]) -> Result<Self> {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let mut c = p.coeffs.clone();
                if c.len() < q.len() {
                    c.resize(q.len(), 0.0);
                }
                for (a, b) in c.iter_mut().zip(q) {
                    *a += b;
                }
                (p.start, c)
            })
            .collect();
        Self::piecewise(pieces, self.beta, self.lo, self.hi)
    }

    /// `x ↦ V(x / s)·s²`, which keeps curvatures at corresponding points unchanged.
    pub fn rescaled_curvature_preserving(&self, s: f64) -> Result<Self> {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let c = p
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * s * s / s.powi(k as i32))
                    .collect();
                (p.start * s, c)
            })
            .collect();
        Self::piecewise(pieces, self.beta, self.lo * s, self.hi * s)
    }

    /// Tabulate on a grid.
    pub fn tabulate(&self, grid: Grid1D) -> PotentialTable {
        let xs = grid.nodes();
        PotentialTable {
            grid,
            v: xs.iter().map(|&x| self.value(x)).collect(),
            dv: xs.iter().map(|&x| self.d1(x)).collect(),
            d2v: xs.iter().map(|&x| self.d2(x)).collect(),
        }
    }

    /// Checks the evaluator consistency and confinement invariants.
    pub fn validate(&self) -> Result<()> {
        let n = 2001;
        let h = (self.hi - self.lo) / (n - 1) as f64;
        let fd = 1e-5;
        let breaks = self.breakpoints();
        for i in 0..n {
            let x = self.lo + h * i as f64;
            if breaks.iter().any(|b| (x - b).abs() < 2.0 * fd) {
                continue;
            }
            let d1 = (self.value(x + fd) - self.value(x - fd)) / (2.0 * fd);
            let d2 = (self.d1(x + fd) - self.d1(x - fd)) / (2.0 * fd);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()));
            ensure(close(d1, self.d1(x)) && close(d2, self.d2(x)), || {
                Error::Data(format!("V, V′, V″ disagree at x = {x}"))
            })?;
        }
        let mut interior_max = f64::NEG_INFINITY;
        for i in 1..n - 1 {
            let x = self.lo + h * i as f64;
            if self.d1(x - h) * self.d1(x + h) <= 0.0 {
                interior_max = interior_max.max(self.value(x));
            }
        }
        ensure(
            self.value(self.lo) >= interior_max && self.value(self.hi) >= interior_max,
            || Error::Data("potential is not confining on the working interval".into()),
        )
    }
}

impl Landscape1D for Potential1D {
    fn value(&self, x: f64) -> f64 {
        horner(&self.piece(x).coeffs, x)
    }
    fn d1(&self, x: f64) -> f64 {
        horner(&derivative(&self.piece(x).coeffs), x)
    }
    fn d2(&self, x: f64) -> f64 {
        horner(&derivative(&derivative(&self.piece(x).coeffs)), x)
    }
    fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// A landscape known only through node values, e.g. an effective potential.
///
/// Between nodes `V′` and `V″` are linearly interpolated and `V` is the
/// matching quadratic, so the three stay consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTable {
    pub grid: Grid1D,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub d2v: Vec<f64>,
}

impl PotentialTable {
    pub fn from_values(grid: Grid1D, v: Vec<f64>, dv: Vec<f64>) -> Result<Self> {
        ensure(v.len() == grid.n && dv.len() == grid.n, || {
            Error::Config("table length does not match grid".into())
        })?;
        let d2v = central_difference(&dv, grid.step());
        Ok(PotentialTable { grid, v, dv, d2v })
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let i = self.grid.cell(x);
        let s = (x - self.grid.x(i)).clamp(0.0, self.grid.step());
        (i, s)
    }

    pub fn min_value(&self) -> f64 {
        self.v.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn central_difference(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| match i {
            0 => (f[1] - f[0]) / h,
            _ if i == n - 1 => (f[n - 1] - f[n - 2]) / h,
            _ => (f[i + 1] - f[i - 1]) / (2.0 * h),
        })
        .collect()
}

impl Landscape1D for PotentialTable {
    fn value(&self, x: f64) -> f64 {
        let (i, s) = self.locate(x);
        let h = self.grid.step();
        self.v[i] + self.dv[i] * s + 0.5 * (self.dv[i + 1] - self.dv[i]) * s * s / h
    }
    fn d1(&self, x: f64) -> f64 {
        let (i, s) = self.locate(x);
        let t = s / self.grid.step();
        self.dv[i] * (1.0 - t) + self.dv[i + 1] * t
    }
    fn d2(&self, x: f64) -> f64 {
        let (i, s) = self.locate(x);
        let t = s / self.grid.step();
        self.d2v[i] * (1.0 - t) + self.d2v[i + 1] * t
    }
    fn interval(&self) -> (f64, f64) {
        (self.grid.lo, self.grid.hi)
    }
}

/// The standard test landscapes.
pub mod library {
    use super::*;

    /// `x⁴/4 − x²/2`: minima ±1, saddle 0, depth ¼.
    pub fn double_well(lo: f64, hi: f64) -> Potential1D {
        Potential1D::polynomial(vec![0.0, 0.0, -0.5, 0.0, 0.25], 1.0, lo, hi).unwrap()
    }

    /// `x⁶/6 − 5x⁴/4 + 2x²`: minima {−2, 0, 2}, saddles ±1.
    pub fn triple_well(lo: f64, hi: f64) -> Potential1D {
        Potential1D::polynomial(
            vec![0.0, 0.0, 2.0, 0.0, -1.25, 0.0, 1.0 / 6.0],
            1.0,
            lo,
            hi,
        )
        .unwrap()
    }

    /// Triple well whose right half is compressed by two: `W(x)` for `x < 0`,
    /// `W(2x)` for `x ≥ 0`. The middle well at 0 has equal-height saddles at
    /// −1 and ½ with curvatures −6 and −24.
    pub fn asymmetric_saddles(lo: f64, hi: f64) -> Potential1D {
        let w = [0.0, 0.0, 2.0, 0.0, -1.25, 0.0, 1.0 / 6.0];
        let right: Vec<f64> = w.iter().enumerate().map(|(k, a)| a * 2f64.powi(k as i32)).collect();
        Potential1D::piecewise(vec![(f64::NEG_INFINITY, w.to_vec()), (0.0, right)], 1.0, lo, hi)
            .unwrap()
    }
}
