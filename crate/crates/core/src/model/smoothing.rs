//! Constructions that turn a (possibly discontinuous) control law into the
//! objects the small-noise analysis works with.

use super::control::ControlLaw;
use super::potential::{Landscape1D, PotentialTable};
use crate::error::{ensure, Error, Result};
use crate::numerics::Grid1D;

/// `V_u(x) = V(x) − ∫₀ˣ u(y) dy` tabulated on `grid`, with `V_u′ = V′ − u`.
///
/// The control term is integrated exactly as the piecewise-constant field the
/// simulator applies (nearest-node lookup), anchored at 0.
pub fn effective_potential(v: &impl Landscape1D, u: &ControlLaw, grid: Grid1D) -> Result<PotentialTable> {
    ensure(u.is_precise(), || {
        Error::Unsupported("effective potential needs a precise law; reduce to the barycenter first".into())
    })?;
    ensure(grid.contains(0.0), || Error::Config("effective-potential grid must contain 0".into()))?;
    let xs = grid.nodes();
    let values = xs.iter().map(|&x| v.value(x) - u.integral(0.0, x)).collect();
    let slopes = xs.iter().map(|&x| v.d1(x) - u.value_at(x)).collect();
    PotentialTable::from_values(grid, values, slopes)
}

/// Reduces a relaxed law to the precise law of its barycenters.
pub fn barycentric(u: &ControlLaw) -> Result<ControlLaw> {
    ControlLaw::precise(u.grid, u.set.clone(), u.barycenters())
}

/// Convolves every action-weight channel with the `N(0, δ)` density.
///
/// The kernel is truncated at ±6√δ and renormalized; the law is edge-extended
/// beyond the grid. The result is a relaxed law on the same grid.
pub fn mollify_gaussian(u: &ControlLaw, delta: f64) -> Result<ControlLaw> {
    ensure(delta > 0.0 && delta.is_finite(), || {
        Error::Parameter(format!("mollifier variance must be positive, got {delta}"))
    })?;
    let h = u.grid.step();
    let n = u.grid.n;
    let m = u.set.len();
    let half = ((6.0 * delta.sqrt()) / h).floor() as usize;
    let mut kernel: Vec<f64> = (0..=2 * half)
        .map(|k| {
            let s = (k as f64 - half as f64) * h;
            (-s * s / (2.0 * delta)).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let table = u.weight_table();
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for (k, w) in kernel.iter().enumerate() {
            let j = (i + k).saturating_sub(half).min(n - 1);
            for (r, p) in row.iter_mut().zip(&table[j * m..(j + 1) * m]) {
                *r += w * p;
            }
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|r| *r /= s);
    }
    ControlLaw::relaxed(u.grid, u.set.clone(), out)
}

/// Forward-window average `(1/δ) ∫_x^{x+δ} ū(y) dy` of the barycentric control.
pub fn moving_average(u: &ControlLaw, delta: f64) -> Result<ControlLaw> {
    ensure(delta >= u.grid.step() && delta.is_finite(), || {
        Error::Parameter(format!("window {delta} is shorter than one grid spacing"))
    })?;
    let values = u
        .grid
        .nodes()
        .into_iter()
        .map(|x| (u.integral(x, x + delta) / delta).clamp(u.set.min, u.set.max))
        .collect();
    ControlLaw::precise(u.grid, u.set.clone(), values)
}
