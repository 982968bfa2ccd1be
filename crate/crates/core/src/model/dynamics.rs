use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::control::ControlSet;
use super::potential::{Landscape1D, Potential1D};
use crate::error::{ensure, Error, Result};

pub type VectorField = dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync;
pub type MatrixField = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
pub type ScalarCost = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum DriftKind {
    /// `−V′(x) + u`
    Gradient(Potential1D),
    /// `a·x + b·u + c`
    Linear { a: f64, b: f64, c: f64 },
    Custom(Arc<VectorField>),
}

/// Controlled drift `m̄(x, u)` with its configured one-sided Lipschitz constant `K`.
#[derive(Clone)]
pub struct DriftSpec {
    dim: usize,
    kind: DriftKind,
    /// One-sided Lipschitz constant (may be negative).
    pub k: f64,
    /// Box `[lo, hi]^d` used when sampling the drift.
    pub domain: (f64, f64),
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            DriftKind::Gradient(_) => "gradient".to_string(),
            DriftKind::Linear { a, b, c } => format!("linear({a}, {b}, {c})"),
            DriftKind::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("DriftSpec")
            .field("dim", &self.dim)
            .field("kind", &kind)
            .field("k", &self.k)
            .finish()
    }
}

impl DriftSpec {
    pub fn gradient(potential: Potential1D, k: f64) -> Self {
        let domain = potential.interval();
        DriftSpec { dim: 1, kind: DriftKind::Gradient(potential), k, domain }
    }

    /// `a·x + b·u + c`; `K = a`.
    pub fn linear(a: f64, b: f64, c: f64) -> Self {
        DriftSpec { dim: 1, kind: DriftKind::Linear { a, b, c }, k: a, domain: (-3.0, 3.0) }
    }

    pub fn custom(
        dim: usize,
        k: f64,
        f: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        DriftSpec { dim, kind: DriftKind::Custom(Arc::new(f)), k, domain: (-3.0, 3.0) }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn potential(&self) -> Option<&Potential1D> {
        match &self.kind {
            DriftKind::Gradient(v) => Some(v),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], u: f64, out: &mut [f64]) {
        match &self.kind {
            DriftKind::Gradient(v) => out[0] = -v.d1(x[0]) + u,
            DriftKind::Linear { a, b, c } => out[0] = a * x[0] + b * u + c,
            DriftKind::Custom(f) => f(x, u, out),
        }
    }

    /// Scalar drift for one-dimensional problems.
    #[inline]
    pub fn eval1(&self, x: f64, u: f64) -> f64 {
        match &self.kind {
            DriftKind::Gradient(v) => -v.d1(x) + u,
            DriftKind::Linear { a, b, c } => a * x + b * u + c,
            DriftKind::Custom(f) => {
                let mut out = [0.0];
                f(&[x], u, &mut out);
                out[0]
            }
        }
    }
}

/// `Σ_k m̄(x, u_k) w_k`.
pub fn relaxed_drift(drift: &DriftSpec, x: &[f64], w: &[f64], set: &ControlSet) -> Result<Vec<f64>> {
    ensure(x.len() == drift.dim(), || {
        Error::Config(format!("state has dimension {}, drift expects {}", x.len(), drift.dim()))
    })?;
    ensure(w.len() == set.len(), || {
        Error::Config(format!("{} weights for {} actions", w.len(), set.len()))
    })?;
    let s: f64 = w.iter().sum();
    ensure(w.iter().all(|p| *p >= 0.0) && (s - 1.0).abs() <= 1e-12, || {
        Error::Data("weights are not a probability vector".into())
    })?;
    let mut acc = vec![0.0; drift.dim()];
    let mut tmp = vec![0.0; drift.dim()];
    for (p, u) in w.iter().zip(set.points()) {
        if *p == 0.0 {
            continue;
        }
        drift.eval(x, *u, &mut tmp);
        for (a, t) in acc.iter_mut().zip(&tmp) {
            *a += p * t;
        }
    }
    Ok(acc)
}

#[derive(Clone)]
enum SigmaKind {
    /// Row-major `d×d`.
    Constant(Vec<f64>),
    /// `σ(x) = a + b·x` (1-D).
    Affine { a: f64, b: f64 },
    Custom(Arc<MatrixField>),
    /// Principal square root of `σσᵀ + ε²I`.
    Root { base: Box<DiffusionSpec>, eps: f64 },
    /// `σ(x) + ε·σ̂(0)`.
    Additive { base: Box<DiffusionSpec>, hat: Vec<f64>, eps: f64 },
}

/// Diffusion matrix `σ(x)` with the Lipschitz constant `L` of its entries.
#[derive(Clone)]
pub struct DiffusionSpec {
    dim: usize,
    kind: SigmaKind,
    pub lipschitz: f64,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("dim", &self.dim)
            .field("eps", &self.eps())
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl DiffusionSpec {
    pub fn constant(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        ensure(matrix.len() == dim * dim, || {
            Error::Config(format!("σ needs {} entries, got {}", dim * dim, matrix.len()))
        })?;
        Ok(DiffusionSpec { dim, kind: SigmaKind::Constant(matrix), lipschitz: 0.0 })
    }

    pub fn scalar(s: f64) -> Self {
        DiffusionSpec { dim: 1, kind: SigmaKind::Constant(vec![s]), lipschitz: 0.0 }
    }

    pub fn zero(dim: usize) -> Self {
        DiffusionSpec { dim, kind: SigmaKind::Constant(vec![0.0; dim * dim]), lipschitz: 0.0 }
    }

    pub fn affine(a: f64, b: f64) -> Self {
        DiffusionSpec { dim: 1, kind: SigmaKind::Affine { a, b }, lipschitz: b.abs() }
    }

    pub fn custom(
        dim: usize,
        lipschitz: f64,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        DiffusionSpec { dim, kind: SigmaKind::Custom(Arc::new(f)), lipschitz }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Perturbation amplitude this spec was built with (0 for an unperturbed σ).
    pub fn eps(&self) -> f64 {
        match &self.kind {
            SigmaKind::Root { eps, .. } | SigmaKind::Additive { eps, .. } => *eps,
            _ => 0.0,
        }
    }

    /// The unperturbed σ this spec derives from.
    pub fn base(&self) -> &DiffusionSpec {
        match &self.kind {
            SigmaKind::Root { base, .. } | SigmaKind::Additive { base, .. } => base.base(),
            _ => self,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, SigmaKind::Constant(_))
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            SigmaKind::Constant(m) => out.copy_from_slice(m),
            SigmaKind::Affine { a, b } => out[0] = a + b * x[0],
            SigmaKind::Custom(f) => f(x, out),
            SigmaKind::Root { base, eps } => {
                base.eval(x, out);
                if self.dim == 1 {
                    out[0] = (out[0] * out[0] + eps * eps).sqrt();
                } else {
                    let root = sqrt_gram_plus(out, self.dim, *eps).expect("σσᵀ not symmetric");
                    out.copy_from_slice(&root);
                }
            }
            SigmaKind::Additive { base, hat, eps } => {
                base.eval(x, out);
                for (o, h) in out.iter_mut().zip(hat) {
                    *o += eps * h;
                }
            }
        }
    }

    #[inline]
    pub fn eval1(&self, x: f64) -> f64 {
        match &self.kind {
            SigmaKind::Constant(m) => m[0],
            SigmaKind::Affine { a, b } => a + b * x,
            SigmaKind::Root { base, eps } => {
                let s = base.eval1(x);
                (s * s + eps * eps).sqrt()
            }
            SigmaKind::Additive { base, hat, eps } => base.eval1(x) + eps * hat[0],
            SigmaKind::Custom(f) => {
                let mut out = [0.0];
                f(&[x], &mut out);
                out[0]
            }
        }
    }

    /// `σ_ε σ_εᵀ = σσᵀ + ε²I` with `σ_ε` the symmetric principal root.
    pub fn build_perturbation(&self, eps: f64) -> Result<DiffusionSpec> {
        ensure(eps >= 0.0 && eps.is_finite(), || {
            Error::Parameter(format!("perturbation amplitude must be ≥ 0, got {eps}"))
        })?;
        let base = self.base().clone();
        if let SigmaKind::Constant(m) = &base.kind {
            let root = if self.dim == 1 {
                vec![(m[0] * m[0] + eps * eps).sqrt()]
            } else {
                sqrt_gram_plus(m, self.dim, eps)?
            };
            let mut spec = DiffusionSpec::constant(self.dim, root)?;
            // Keep the provenance so eps()/base() still answer.
            spec.kind = SigmaKind::Root { base: Box::new(base), eps };
            if let SigmaKind::Root { base, .. } = &spec.kind {
                debug_assert!(base.is_constant());
            }
            return Ok(spec);
        }
        let lipschitz = base.lipschitz;
        Ok(DiffusionSpec { dim: self.dim, kind: SigmaKind::Root { base: Box::new(base), eps }, lipschitz })
    }

    /// `σ(x) + ε·σ̂(0)`, the additive perturbation used alongside the envelope fields.
    pub fn additive_perturbation(&self, hat: &[f64], eps: f64) -> Result<DiffusionSpec> {
        ensure(hat.len() == self.dim * self.dim, || {
            Error::Config("σ̂(0) has the wrong size".into())
        })?;
        Ok(DiffusionSpec {
            dim: self.dim,
            kind: SigmaKind::Additive { base: Box::new(self.base().clone()), hat: hat.to_vec(), eps },
            lipschitz: self.base().lipschitz,
        })
    }
}

/// Principal square root of `m mᵀ + ε² I`.
fn sqrt_gram_plus(m: &[f64], d: usize, eps: f64) -> Result<Vec<f64>> {
    let s = DMatrix::from_row_slice(d, d, m);
    let mut a = &s * s.transpose();
    let asym = (&a - a.transpose()).abs().max();
    ensure(asym <= 1e-12 * (1.0 + a.abs().max()) && asym.is_finite(), || {
        Error::Data("σσᵀ is not symmetric".into())
    })?;
    for i in 0..d {
        a[(i, i)] += eps * eps;
    }
    let eig = SymmetricEigen::new(a);
    let lam = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&lam) * eig.eigenvectors.transpose();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = 0.5 * (root[(i, j)] + root[(j, i)]);
        }
    }
    Ok(out)
}

/// Max over sampled `(x, y, u)` of
/// `[⟨m̄(x,u) − m̄(y,u), x − y⟩ + ½‖σ(x) − σ(y)‖²] / ‖x − y‖²`.
///
/// Sampling can only under-estimate the true constant.
pub fn one_sided_lipschitz_estimate(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    set: &ControlSet,
    samples: usize,
    seed: u64,
) -> f64 {
    let d = drift.dim();
    let (lo, hi) = drift.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let (mut mx, mut my) = (vec![0.0; d], vec![0.0; d]);
    let (mut sx, mut sy) = (vec![0.0; d * d], vec![0.0; d * d]);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples.max(100) {
        for i in 0..d {
            x[i] = rng.random_range(lo..hi);
            y[i] = rng.random_range(lo..hi);
        }
        let u = set.points()[rng.random_range(0..set.len())];
        let dist2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        if dist2 < 1e-24 {
            continue;
        }
        drift.eval(&x, u, &mut mx);
        drift.eval(&y, u, &mut my);
        diffusion.eval(&x, &mut sx);
        diffusion.eval(&y, &mut sy);
        let inner: f64 = (0..d).map(|i| (mx[i] - my[i]) * (x[i] - y[i])).sum();
        let frob: f64 = sx.iter().zip(&sy).map(|(a, b)| (a - b).powi(2)).sum();
        best = best.max((inner + 0.5 * frob) / dist2);
    }
    best
}

#[derive(Clone)]
enum CostKind {
    /// `min(P(x), cap) + w·(u − c)²`
    Separable { state: Vec<f64>, cap: Option<f64>, control_weight: f64, control_center: f64 },
    Custom(Arc<ScalarCost>),
}

/// Running cost `r̄(x, u)` with recorded `Lip(r)` (in x) and `‖r‖∞`.
#[derive(Clone)]
pub struct RunningCost {
    kind: CostKind,
    pub lipschitz: f64,
    pub sup: f64,
}

impl fmt::Debug for RunningCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunningCost")
            .field("lipschitz", &self.lipschitz)
            .field("sup", &self.sup)
            .finish()
    }
}

impl RunningCost {
    /// `min(P(x), cap) + w·(u − c)²`; bounds are filled in by [`RunningCost::with_bounds_on`].
    pub fn separable(state: Vec<f64>, cap: Option<f64>, control_weight: f64, control_center: f64) -> Self {
        RunningCost {
            kind: CostKind::Separable { state, cap, control_weight, control_center },
            lipschitz: f64::NAN,
            sup: f64::NAN,
        }
    }

    pub fn constant(c: f64) -> Self {
        RunningCost { lipschitz: 0.0, sup: c.abs(), ..Self::separable(vec![c], None, 0.0, 0.0) }
    }

    pub fn custom(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        RunningCost { kind: CostKind::Custom(Arc::new(f)), lipschitz: f64::NAN, sup: f64::NAN }
    }

    pub fn with_bounds(mut self, lipschitz: f64, sup: f64) -> Self {
        self.lipschitz = lipschitz;
        self.sup = sup;
        self
    }

    /// Records `Lip(r)` and `‖r‖∞` by dense evaluation over `[lo, hi] × U`.
    pub fn with_bounds_on(mut self, lo: f64, hi: f64, set: &ControlSet) -> Self {
        let n = 4001;
        let h = (hi - lo) / (n - 1) as f64;
        let (mut lip, mut sup) = (0.0f64, 0.0f64);
        for &u in set.points() {
            let mut prev = self.eval1(lo, u);
            sup = sup.max(prev.abs());
            for i in 1..n {
                let v = self.eval1(lo + h * i as f64, u);
                lip = lip.max((v - prev).abs() / h);
                sup = sup.max(v.abs());
                prev = v;
            }
        }
        self.lipschitz = lip;
        self.sup = sup;
        self
    }

    #[inline]
    pub fn eval(&self, x: &[f64], u: f64) -> f64 {
        match &self.kind {
            CostKind::Separable { .. } => self.eval1(x[0], u),
            CostKind::Custom(f) => f(x, u),
        }
    }

    #[inline]
    pub fn eval1(&self, x: f64, u: f64) -> f64 {
        match &self.kind {
            CostKind::Separable { state, cap, control_weight, control_center } => {
                let p = state.iter().rev().fold(0.0, |acc, a| acc * x + a);
                let p = cap.map_or(p, |c| p.min(c));
                p + control_weight * (u - control_center).powi(2)
            }
            CostKind::Custom(f) => f(&[x], u),
        }
    }

    /// `Σ_k r̄(x, u_k) w_k`.
    pub fn relaxed(&self, x: &[f64], w: &[f64], set: &ControlSet) -> f64 {
        w.iter().zip(set.points()).map(|(p, u)| p * self.eval(x, *u)).sum()
    }

    /// True when `r̄` does not depend on `u`.
    pub fn ignores_control(&self) -> bool {
        matches!(&self.kind, CostKind::Separable { control_weight, .. } if *control_weight == 0.0)
    }
}

/// One-dimensional envelope field `b(y)` of the form `k₊·y` for `y ≥ 0`
/// and `k₋·y` for `y < 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Envelope {
    pub slope_pos: f64,
    pub slope_neg: f64,
}

impl Envelope {
    pub fn linear(k: f64) -> Self {
        Envelope { slope_pos: k, slope_neg: k }
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        if y >= 0.0 {
            self.slope_pos * y
        } else {
            self.slope_neg * y
        }
    }

    /// `∫₀ˣ −b(s) ds`.
    pub fn potential(&self, x: f64) -> f64 {
        -0.5 * if x >= 0.0 { self.slope_pos } else { self.slope_neg } * x * x
    }
}

/// Envelope fields `b₁ ≤ m̄(x,u) − m̄(y,u) ≤ b₂` (as functions of `x − y`)
/// and the constant `σ̂(0)` of the auxiliary processes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundingFields {
    pub lower: Envelope,
    pub upper: Envelope,
    pub sigma_hat0: f64,
}

/// Outcome of sampling the envelope ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    pub samples: usize,
    /// Pairs with `m̄(x,u) − m̄(y,u) ≤ b₁(x − y)` or `> b₂(x − y)`.
    pub violations: usize,
    /// Pairs where the lower inequality holds only with equality.
    pub touching: usize,
}

impl BoundingFields {
    pub fn validate(&self) -> Result<()> {
        ensure(self.lower.eval(0.0) == 0.0 && self.upper.eval(0.0) == 0.0, || {
            Error::Data("envelope fields must vanish at 0".into())
        })?;
        for e in [self.lower, self.upper] {
            ensure(e.slope_pos < 0.0 && e.slope_neg < 0.0, || {
                Error::Data("envelope flows must be attracted to 0".into())
            })?;
        }
        Ok(())
    }

    /// Samples `(x, y, u)` triples over `[lo, hi]² × U`.
    pub fn check_ordering(
        &self,
        drift: &DriftSpec,
        set: &ControlSet,
        lo: f64,
        hi: f64,
        samples: usize,
        seed: u64,
    ) -> EnvelopeCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut check = EnvelopeCheck { samples, violations: 0, touching: 0 };
        for _ in 0..samples {
            let x = rng.random_range(lo..hi);
            let y = rng.random_range(lo..hi);
            let u = set.points()[rng.random_range(0..set.len())];
            let gap = drift.eval1(x, u) - drift.eval1(y, u);
            let (b1, b2) = (self.lower.eval(x - y), self.upper.eval(x - y));
            let tol = 1e-12 * (1.0 + gap.abs());
            if gap < b1 - tol || gap > b2 + tol {
                check.violations += 1;
            } else if (gap - b1).abs() <= tol && x != y {
                check.touching += 1;
            }
        }
        check
    }
}

#[cfg(test)]
mod tests {
    use super::super::potential::library::double_well;
    use super::*;

    fn set01() -> ControlSet {
        ControlSet::from_points(vec![-1.0, 0.0, 0.3, 1.0]).unwrap()
    }

    #[test]
    fn relaxed_drift_examples() {
        let drift = DriftSpec::gradient(double_well(-3.0, 3.0), 1.0);
        let set = set01();
        assert_eq!(relaxed_drift(&drift, &[1.0], &set.split(0.0), &set).unwrap(), vec![0.0]);
        let uniform = ControlSet::from_points(vec![-1.0, 1.0]).unwrap();
        assert_eq!(relaxed_drift(&drift, &[0.0], &[0.5, 0.5], &uniform).unwrap(), vec![0.0]);
        let m = relaxed_drift(&drift, &[0.5], &set.split(0.3), &set).unwrap();
        assert!((m[0] - 0.675).abs() < 1e-15);
        assert!(matches!(
            relaxed_drift(&drift, &[0.5, 1.0], &set.split(0.3), &set),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn gradient_form_matches_potential() {
        let v = double_well(-3.0, 3.0);
        let drift = DriftSpec::gradient(v.clone(), 1.0);
        for x in [-2.0, -0.3, 0.0, 1.7] {
            assert!((drift.eval1(x, 0.4) - (-v.d1(x) + 0.4)).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_examples() {
        let s = DiffusionSpec::zero(1).build_perturbation(0.2).unwrap();
        assert!((s.eval1(3.0) - 0.2).abs() < 1e-15);
        let id = DiffusionSpec::constant(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut out = [0.0; 4];
        id.build_perturbation(0.0).unwrap().eval(&[0.0, 0.0], &mut out);
        for (a, b) in out.iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = DiffusionSpec::scalar(0.3).build_perturbation(0.4).unwrap();
        assert!((s.eval1(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(s.eps(), 0.4);
        assert!(DiffusionSpec::scalar(0.3).build_perturbation(-0.1).is_err());
    }

    #[test]
    fn perturbation_adds_eps_squared_identity() {
        let sigma = DiffusionSpec::custom(2, 1.0, |x, out| {
            out[0] = x[0].sin();
            out[1] = 0.3 * x[1];
            out[2] = 0.0;
            out[3] = x[0] * x[1];
        });
        let eps = 0.37;
        let pert = sigma.build_perturbation(eps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let (mut s, mut p) = ([0.0; 4], [0.0; 4]);
            sigma.eval(&x, &mut s);
            pert.eval(&x, &mut p);
            let g = |m: &[f64; 4], i: usize, j: usize| m[i * 2] * m[j * 2] + m[i * 2 + 1] * m[j * 2 + 1];
            for i in 0..2 {
                for j in 0..2 {
                    let want = g(&s, i, j) + if i == j { eps * eps } else { 0.0 };
                    assert!((g(&p, i, j) - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn lipschitz_estimates() {
        let set = ControlSet::uniform(-1.0, 1.0, 5).unwrap();
        let k = one_sided_lipschitz_estimate(&DriftSpec::linear(-1.0, 1.0, 0.0), &DiffusionSpec::scalar(0.5), &set, 1000, 1);
        assert!((k + 1.0).abs() < 1e-12);
        let dw = DriftSpec::gradient(double_well(-3.0, 3.0), 1.0);
        let k = one_sided_lipschitz_estimate(&dw, &DiffusionSpec::zero(1), &set, 20_000, 2);
        assert!((k - 1.0).abs() < 0.05 && k <= 1.0, "k = {k}");
        let k = one_sided_lipschitz_estimate(&DriftSpec::linear(-2.0, 0.0, 0.0), &DiffusionSpec::affine(0.0, 0.1), &set, 500, 3);
        assert!((k - (-2.0 + 0.005)).abs() < 1e-12);
    }

    #[test]
    fn cost_bounds() {
        let set = ControlSet::uniform(-1.0, 1.0, 3).unwrap();
        let r = RunningCost::separable(vec![0.25, -1.0, 1.0], Some(1.0), 0.1, 0.0).with_bounds_on(-3.0, 3.0, &set);
        assert!((r.sup - 1.1).abs() < 1e-12);
        assert!((r.lipschitz - 2.0).abs() < 1e-2);
        assert_eq!(RunningCost::constant(2.0).eval1(5.0, 1.0), 2.0);
    }

    #[test]
    fn envelope_ordering_sampling() {
        let set = ControlSet::uniform(-1.0, 1.0, 3).unwrap();
        let drift = DriftSpec::linear(-2.0, 1.0, 0.0);
        let odd = BoundingFields { lower: Envelope::linear(-3.0), upper: Envelope::linear(-1.0), sigma_hat0: 1.0 };
        odd.validate().unwrap();
        // −3s < −2s only holds for s > 0, so odd linear envelopes fail on half the pairs.
        let c = odd.check_ordering(&drift, &set, -2.0, 2.0, 1000, 7);
        assert!(c.violations > 300);
        let signed = BoundingFields {
            lower: Envelope { slope_pos: -3.0, slope_neg: -1.0 },
            upper: Envelope { slope_pos: -1.0, slope_neg: -3.0 },
            sigma_hat0: 1.0,
        };
        assert_eq!(signed.check_ordering(&drift, &set, -2.0, 2.0, 1000, 7).violations, 0);
        let same = BoundingFields { lower: Envelope::linear(-2.0), upper: Envelope::linear(-2.0), sigma_hat0: 1.0 };
        let c = same.check_ordering(&drift, &set, -2.0, 2.0, 1000, 7);
        assert_eq!(c.violations, 0);
        assert!(c.touching > 900);
    }
}
