//! Uniform grids and the small amount of quadrature the rest of the crate needs.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Uniform grid on `[lo, hi]` with `n` nodes.
///
/// Nodes are computed as `(lo·(n−1−i) + hi·i)/(n−1)`, so a grid with
/// `lo = −hi` is exactly mirror-symmetric in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        ensure(n >= 2, || Error::Config(format!("grid needs at least 2 nodes, got {n}")))?;
        ensure(lo.is_finite() && hi.is_finite() && lo < hi, || {
            Error::Config(format!("grid interval [{lo}, {hi}] is empty or not finite"))
        })?;
        Ok(Grid1D { lo, hi, n })
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        let m = (self.n - 1) as f64;
        (self.lo * (m - i as f64) + self.hi * i as f64) / m
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the nearest node; points outside the grid clamp to the ends.
    #[inline]
    pub fn nearest(&self, x: f64) -> usize {
        let s = ((x - self.lo) / self.step()).round();
        if s <= 0.0 || s.is_nan() {
            0
        } else {
            (s as usize).min(self.n - 1)
        }
    }

    /// Index `i` such that `x(i) <= x < x(i+1)`, clamped to `[0, n−2]`.
    #[inline]
    pub fn cell(&self, x: f64) -> usize {
        let s = ((x - self.lo) / self.step()).floor();
        if s <= 0.0 || s.is_nan() {
            0
        } else {
            (s as usize).min(self.n - 2)
        }
    }

    /// Exact node index of `x` if it sits on the grid (to rounding).
    pub fn node_of(&self, x: f64) -> Option<usize> {
        let i = self.nearest(x);
        ((self.x(i) - x).abs() <= 1e-9 * self.step()).then_some(i)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Composite Simpson rule for samples on a uniform grid with spacing `h`.
/// An even sample count closes with Simpson's 3/8 rule on the last four points.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let (main, tail) = if n % 2 == 1 { (n, 0) } else { (n - 3, 3) };
            let mut s = values[0] + values[main - 1];
            for (k, v) in values[1..main - 1].iter().enumerate() {
                s += if k % 2 == 0 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = s * h / 3.0;
            if tail == 3 {
                let v = &values[n - 4..];
                total += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}

/// Simpson quadrature of `f` over `[a, b]` with `n` (odd) nodes.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n.is_multiple_of(2) { n + 1 } else { n.max(3) };
    let h = (b - a) / (n - 1) as f64;
    let values: Vec<f64> = (0..n).map(|i| f(a + h * i as f64)).collect();
    simpson(&values, h)
}

/// `ln ∫_a^b exp(g(x)) dx` evaluated with the maximum of `g` factored out.
pub fn log_integral_exp<F: Fn(f64) -> f64>(g: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n.is_multiple_of(2) { n + 1 } else { n.max(3) };
    let h = (b - a) / (n - 1) as f64;
    let logs: Vec<f64> = (0..n).map(|i| g(a + h * i as f64)).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    m + simpson(&values, h).ln()
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
