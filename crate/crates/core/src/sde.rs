//! Euler–Maruyama simulation of controlled diffusions with a reproducible
//! per-trajectory seed ladder.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::model::{BoundingFields, ControlLaw, DiffusionSpec, DriftSpec, LawValues};

/// Width of the padding beyond the working interval before a trajectory is
/// declared diverged.
pub const DIVERGENCE_PAD: f64 = 5.0;
/// Largest tolerated diverged fraction before a statistic refuses to report.
pub const MAX_DIVERGED_FRACTION: f64 = 1e-3;

/// Salt separating the second system's stream in an independent-noise coupled run.
const PAIR_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Paired systems draw from separate streams.
    #[default]
    Independent,
    /// Paired systems consume identical Gaussian increments.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub batch: usize,
    pub seed: u64,
    /// Initial points; trajectory `j` starts at `x0[j % x0.len()]`.
    pub x0: Vec<Vec<f64>>,
    #[serde(default)]
    pub noise: NoiseMode,
    /// Keep every `record_every`-th step (the last step is always kept).
    #[serde(default = "one")]
    pub record_every: usize,
    /// Working interval; leaving it by more than [`DIVERGENCE_PAD`] flags divergence.
    #[serde(default = "default_domain")]
    pub domain: (f64, f64),
}

fn one() -> usize {
    1
}

fn default_domain() -> (f64, f64) {
    (-100.0, 100.0)
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, batch: usize, seed: u64, x0: f64) -> Self {
        SimConfig {
            dt,
            horizon,
            batch,
            seed,
            x0: vec![vec![x0]],
            noise: NoiseMode::Independent,
            record_every: 1,
            domain: default_domain(),
        }
    }

    pub fn with_starts(mut self, starts: Vec<Vec<f64>>) -> Self {
        self.x0 = starts;
        self
    }

    pub fn with_noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_record_every(mut self, r: usize) -> Self {
        self.record_every = r;
        self
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        ensure(self.dt > 0.0 && self.dt.is_finite(), || Error::Config(format!("dt must be positive, got {}", self.dt)))?;
        ensure(self.horizon >= self.dt, || Error::Config("horizon must be at least one step".into()))?;
        ensure(self.batch >= 1, || Error::Config("batch must be at least 1".into()))?;
        ensure(self.record_every >= 1, || Error::Config("record_every must be at least 1".into()))?;
        ensure(!self.x0.is_empty() && self.x0.iter().all(|p| p.len() == dim), || {
            Error::Config(format!("initial points must be {dim}-dimensional"))
        })
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Seed of trajectory `j`.
    pub fn seed_of(&self, j: usize) -> u64 {
        self.seed ^ j as u64
    }

    fn start(&self, j: usize) -> &[f64] {
        &self.x0[j % self.x0.len()]
    }

    fn recorded_steps(&self) -> Vec<usize> {
        let n = self.steps();
        let mut ks: Vec<usize> = (0..=n).step_by(self.record_every).collect();
        if *ks.last().unwrap() != n {
            ks.push(n);
        }
        ks
    }

    fn outside(&self, x: &[f64]) -> bool {
        let (lo, hi) = self.domain;
        x.iter().any(|v| !(lo - DIVERGENCE_PAD..=hi + DIVERGENCE_PAD).contains(v))
    }
}

/// How the control is supplied to the simulator.
#[derive(Clone, Copy)]
pub enum ControlInput<'a> {
    Constant(f64),
    /// Stationary Markov law, looked up at the nearest grid node of the first coordinate.
    Markov(&'a ControlLaw),
    /// Value per Euler step; the last value is held beyond the end.
    Stream(&'a [f64]),
    /// Deterministic function of time.
    Schedule(&'a (dyn Fn(f64) -> f64 + Sync)),
}

/// An action resolved for one step.
enum Action<'b> {
    Point(f64),
    Mix(&'b [(f64, f64)]),
}

/// Control input with relaxed laws pre-expanded into sparse `(u, w)` lists.
enum Prepared<'a> {
    Constant(f64),
    Precise(&'a ControlLaw, &'a [f64]),
    Relaxed(&'a ControlLaw, Vec<Vec<(f64, f64)>>),
    Stream(&'a [f64]),
    Schedule(&'a (dyn Fn(f64) -> f64 + Sync)),
}

impl<'a> Prepared<'a> {
    fn new(input: ControlInput<'a>) -> Self {
        match input {
            ControlInput::Constant(u) => Prepared::Constant(u),
            ControlInput::Stream(s) => Prepared::Stream(s),
            ControlInput::Schedule(f) => Prepared::Schedule(f),
            ControlInput::Markov(law) => match &law.values {
                LawValues::Precise(v) => Prepared::Precise(law, v),
                LawValues::Relaxed(_) => {
                    let table = (0..law.grid.n)
                        .map(|i| {
                            law.weights_at(i)
                                .into_iter()
                                .zip(law.set.points())
                                .filter(|(w, _)| *w > 0.0)
                                .map(|(w, u)| (*u, w))
                                .collect()
                        })
                        .collect();
                    Prepared::Relaxed(law, table)
                }
            },
        }
    }

    #[inline]
    fn action(&self, x0: f64, k: usize, t: f64) -> Action<'_> {
        match self {
            Prepared::Constant(u) => Action::Point(*u),
            Prepared::Precise(law, v) => Action::Point(v[law.node(x0)]),
            Prepared::Relaxed(law, table) => Action::Mix(&table[law.node(x0)]),
            Prepared::Stream(s) => Action::Point(s[k.min(s.len() - 1)]),
            Prepared::Schedule(f) => Action::Point(f(t)),
        }
    }
}

impl Action<'_> {
    #[inline]
    fn mean(&self) -> f64 {
        match self {
            Action::Point(u) => *u,
            Action::Mix(m) => m.iter().map(|(u, w)| u * w).sum(),
        }
    }

    #[inline]
    fn drift1(&self, drift: &DriftSpec, x: f64) -> f64 {
        match self {
            Action::Point(u) => drift.eval1(x, *u),
            Action::Mix(m) => m.iter().map(|(u, w)| w * drift.eval1(x, *u)).sum(),
        }
    }

    fn drift(&self, drift: &DriftSpec, x: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        match self {
            Action::Point(u) => drift.eval(x, *u, out),
            Action::Mix(m) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (u, w) in m.iter() {
                    drift.eval(x, *u, tmp);
                    for (o, t) in out.iter_mut().zip(tmp.iter()) {
                        *o += w * t;
                    }
                }
            }
        }
    }
}

/// A seeded ensemble of recorded trajectories sharing one time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBatch {
    pub dim: usize,
    pub dt: f64,
    pub record_every: usize,
    /// Recorded times.
    pub times: Vec<f64>,
    /// Per trajectory, recorded states flattened as `[record][dim]`.
    pub states: Vec<Vec<f64>>,
    /// Per trajectory, mean applied action at each recorded step.
    pub controls: Vec<Vec<f64>>,
    /// Seed used for each trajectory.
    pub seeds: Vec<u64>,
    pub diverged: Vec<bool>,
}

impl PathBatch {
    pub fn n_traj(&self) -> usize {
        self.states.len()
    }

    pub fn n_records(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, j: usize, r: usize) -> &[f64] {
        &self.states[j][r * self.dim..(r + 1) * self.dim]
    }

    /// First coordinate of trajectory `j` at record `r`.
    pub fn value(&self, j: usize, r: usize) -> f64 {
        self.states[j][r * self.dim]
    }

    pub fn final_values(&self) -> Vec<f64> {
        let r = self.n_records() - 1;
        self.valid().map(|j| self.value(j, r)).collect()
    }

    /// Indices of trajectories that stayed in the padded domain.
    pub fn valid(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_traj()).filter(|&j| !self.diverged[j])
    }

    pub fn diverged_count(&self) -> usize {
        self.diverged.iter().filter(|d| **d).count()
    }

    /// Refuses statistics when more than 0.1% of trajectories diverged.
    pub fn check_divergence(&self) -> Result<()> {
        let d = self.diverged_count();
        ensure(d as f64 <= MAX_DIVERGED_FRACTION * self.n_traj() as f64, || Error::Diverged {
            diverged: d,
            total: self.n_traj(),
        })
    }

    /// CSV with header `time,traj,dim,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,traj,dim,value")?;
        for j in 0..self.n_traj() {
            for (r, t) in self.times.iter().enumerate() {
                for (d, v) in self.state(j, r).iter().enumerate() {
                    writeln!(w, "{t},{j},{d},{v}")?;
                }
            }
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// The Gaussian increments consumed by one trajectory (`steps × dim`).
pub fn replay_increments(seed: u64, steps: usize, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps * dim).map(|_| normal(&mut rng)).collect()
}

struct Track {
    states: Vec<f64>,
    controls: Vec<f64>,
    diverged: bool,
}

impl Track {
    fn with_capacity(records: usize, dim: usize) -> Self {
        Track { states: Vec::with_capacity(records * dim), controls: Vec::with_capacity(records), diverged: false }
    }

    /// Pads a stopped trajectory with its last state so all tracks share the time grid.
    fn fill(&mut self, records: usize, dim: usize) {
        while self.controls.len() < records {
            let last = self.states[self.states.len() - dim..].to_vec();
            self.states.extend(last);
            self.controls.push(f64::NAN);
        }
    }
}

fn assemble(cfg: &SimConfig, dim: usize, tracks: Vec<Track>) -> PathBatch {
    let ks = cfg.recorded_steps();
    let mut batch = PathBatch {
        dim,
        dt: cfg.dt,
        record_every: cfg.record_every,
        times: ks.iter().map(|&k| k as f64 * cfg.dt).collect(),
        states: Vec::with_capacity(tracks.len()),
        controls: Vec::with_capacity(tracks.len()),
        seeds: (0..cfg.batch).map(|j| cfg.seed_of(j)).collect(),
        diverged: Vec::with_capacity(tracks.len()),
    };
    for t in tracks {
        batch.states.push(t.states);
        batch.controls.push(t.controls);
        batch.diverged.push(t.diverged);
    }
    batch
}

fn check_dims(drift: &DriftSpec, diffusion: &DiffusionSpec) -> Result<()> {
    ensure(drift.dim() == diffusion.dim(), || {
        Error::Config(format!("drift is {}-dimensional, diffusion {}-dimensional", drift.dim(), diffusion.dim()))
    })
}

/// One trajectory; the closure supplies the increments so coupled runs can share them.
struct System<'a> {
    drift: &'a DriftSpec,
    sigma: &'a DiffusionSpec,
    dim: usize,
    x: Vec<f64>,
    m: Vec<f64>,
    s: Vec<f64>,
    tmp: Vec<f64>,
    alive: bool,
}

impl<'a> System<'a> {
    fn new(drift: &'a DriftSpec, sigma: &'a DiffusionSpec, x0: &[f64]) -> Self {
        let d = drift.dim();
        System {
            drift,
            sigma,
            dim: d,
            x: x0.to_vec(),
            m: vec![0.0; d],
            s: vec![0.0; d * d],
            tmp: vec![0.0; d],
            alive: true,
        }
    }

    #[inline]
    fn step(&mut self, action: &Action, dt: f64, xi: &[f64]) {
        let sq = dt.sqrt();
        if self.dim == 1 {
            let x = self.x[0];
            self.x[0] = x + action.drift1(self.drift, x) * dt + self.sigma.eval1(x) * sq * xi[0];
            return;
        }
        action.drift(self.drift, &self.x, &mut self.m, &mut self.tmp);
        self.sigma.eval(&self.x, &mut self.s);
        let d = self.dim;
        for i in 0..d {
            let noise: f64 = (0..d).map(|k| self.s[i * d + k] * xi[k]).sum();
            self.tmp[i] = self.x[i] + self.m[i] * dt + noise * sq;
        }
        self.x.copy_from_slice(&self.tmp);
    }
}

/// Euler–Maruyama: `X_{k+1} = X_k + m(X_k, U_k)·dt + σ(X_k)·√dt·ξ_k`.
pub fn simulate(drift: &DriftSpec, diffusion: &DiffusionSpec, control: ControlInput, cfg: &SimConfig) -> Result<PathBatch> {
    check_dims(drift, diffusion)?;
    cfg.validate(drift.dim())?;
    let prepared = Prepared::new(control);
    let dim = drift.dim();
    let n = cfg.steps();
    let records = cfg.recorded_steps().len();
    let tracks: Vec<Track> = (0..cfg.batch)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed_of(j));
            let mut sys = System::new(drift, diffusion, cfg.start(j));
            let mut track = Track::with_capacity(records, dim);
            let mut xi = vec![0.0; dim];
            for k in 0..=n {
                let t = k as f64 * cfg.dt;
                let action = prepared.action(sys.x[0], k, t);
                if k % cfg.record_every == 0 || k == n {
                    track.states.extend_from_slice(&sys.x);
                    track.controls.push(action.mean());
                }
                if k == n {
                    break;
                }
                xi.iter_mut().for_each(|v| *v = normal(&mut rng));
                sys.step(&action, cfg.dt, &xi);
                if cfg.outside(&sys.x) {
                    track.diverged = true;
                    break;
                }
            }
            track.fill(records, dim);
            track
        })
        .collect();
    Ok(assemble(cfg, dim, tracks))
}

/// Steps two systems side by side under the same control.
///
/// With [`NoiseMode::Shared`] both consume identical increments; Markov laws
/// are evaluated on system A's state and the resulting action is applied to both.
pub fn simulate_coupled(
    drift_a: &DriftSpec,
    diff_a: &DiffusionSpec,
    drift_b: &DriftSpec,
    diff_b: &DiffusionSpec,
    control: ControlInput,
    cfg: &SimConfig,
) -> Result<(PathBatch, PathBatch)> {
    check_dims(drift_a, diff_a)?;
    check_dims(drift_b, diff_b)?;
    ensure(drift_a.dim() == drift_b.dim(), || Error::Config("coupled systems differ in dimension".into()))?;
    cfg.validate(drift_a.dim())?;
    let prepared = Prepared::new(control);
    let dim = drift_a.dim();
    let n = cfg.steps();
    let records = cfg.recorded_steps().len();
    let pairs: Vec<(Track, Track)> = (0..cfg.batch)
        .into_par_iter()
        .map(|j| {
            let mut rng_a = ChaCha8Rng::seed_from_u64(cfg.seed_of(j));
            let mut rng_b = ChaCha8Rng::seed_from_u64(cfg.seed_of(j) ^ PAIR_SALT);
            let mut a = System::new(drift_a, diff_a, cfg.start(j));
            let mut b = System::new(drift_b, diff_b, cfg.start(j));
            let (mut ta, mut tb) = (Track::with_capacity(records, dim), Track::with_capacity(records, dim));
            let (mut xa, mut xb) = (vec![0.0; dim], vec![0.0; dim]);
            for k in 0..=n {
                let t = k as f64 * cfg.dt;
                let action = prepared.action(a.x[0], k, t);
                if k % cfg.record_every == 0 || k == n {
                    let u = action.mean();
                    ta.states.extend_from_slice(&a.x);
                    ta.controls.push(u);
                    tb.states.extend_from_slice(&b.x);
                    tb.controls.push(u);
                }
                if k == n {
                    break;
                }
                xa.iter_mut().for_each(|v| *v = normal(&mut rng_a));
                match cfg.noise {
                    NoiseMode::Shared => xb.copy_from_slice(&xa),
                    NoiseMode::Independent => xb.iter_mut().for_each(|v| *v = normal(&mut rng_b)),
                }
                if a.alive {
                    a.step(&action, cfg.dt, &xa);
                    a.alive = !cfg.outside(&a.x);
                }
                if b.alive {
                    b.step(&action, cfg.dt, &xb);
                    b.alive = !cfg.outside(&b.x);
                }
            }
            ta.diverged = !a.alive;
            tb.diverged = !b.alive;
            (ta, tb)
        })
        .collect();
    let (ta, tb): (Vec<Track>, Vec<Track>) = pairs.into_iter().unzip();
    Ok((assemble(cfg, dim, ta), assemble(cfg, dim, tb)))
}

/// The envelope processes `dY_i = b_i(Y_i)dt + (σ(X^ε) − σ(X) + ε·σ̂(0))dW`,
/// driven by the increments of a shared-noise coupled run (replayed from its seeds).
pub fn simulate_auxiliary(
    bounds: &BoundingFields,
    path_eps: &PathBatch,
    path: &PathBatch,
    sigma: &DiffusionSpec,
    eps: f64,
    cfg: &SimConfig,
) -> Result<(PathBatch, PathBatch)> {
    ensure(path_eps.dim == 1 && path.dim == 1, || Error::Unsupported("envelope processes are one-dimensional".into()))?;
    ensure(
        path_eps.times == path.times && path_eps.dt == path.dt && path_eps.seeds == path.seeds,
        || Error::Config("auxiliary processes need two paths from one coupled run".into()),
    )?;
    ensure(cfg.noise == NoiseMode::Shared, || Error::Config("auxiliary processes need a shared-noise run".into()))?;
    ensure(sigma.is_constant() || path.record_every == 1, || {
        Error::Config("state-dependent σ needs every step recorded".into())
    })?;
    let n = cfg.steps();
    let dt = path.dt;
    let sq = dt.sqrt();
    let every = path.record_every;
    let records = path.n_records();
    let run = |env: crate::model::Envelope| -> Vec<Track> {
        (0..path.n_traj())
            .into_par_iter()
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(path.seeds[j]);
                let mut y = path_eps.value(j, 0) - path.value(j, 0);
                let mut track = Track::with_capacity(records, 1);
                for k in 0..=n {
                    if k % every == 0 || k == n {
                        track.states.push(y);
                        track.controls.push(f64::NAN);
                    }
                    if k == n {
                        break;
                    }
                    let xi = normal(&mut rng);
                    let gap = if sigma.is_constant() {
                        0.0
                    } else {
                        sigma.eval1(path_eps.value(j, k)) - sigma.eval1(path.value(j, k))
                    };
                    y += env.eval(y) * dt + (gap + eps * bounds.sigma_hat0) * sq * xi;
                }
                track.diverged = path.diverged[j] || path_eps.diverged[j];
                track
            })
            .collect()
    };
    let mut aux_cfg = cfg.clone();
    aux_cfg.batch = path.n_traj();
    Ok((assemble(&aux_cfg, 1, run(bounds.lower)), assemble(&aux_cfg, 1, run(bounds.upper))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitSide {
    Left,
    Right,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitSample {
    pub traj: usize,
    pub tau: f64,
    pub side: ExitSide,
    pub location: f64,
}

impl ExitSample {
    pub fn censored(&self) -> bool {
        self.side == ExitSide::Censored
    }
}

/// First step at which the path leaves `(a, b)`; paths still inside at the
/// horizon are censored. One-dimensional.
pub fn first_exit(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    control: ControlInput,
    interval: (f64, f64),
    cfg: &SimConfig,
) -> Result<Vec<ExitSample>> {
    ensure(drift.dim() == 1, || Error::Unsupported("exit times are computed for 1-D problems".into()))?;
    check_dims(drift, diffusion)?;
    cfg.validate(1)?;
    let (a, b) = interval;
    ensure(cfg.x0.iter().all(|p| p[0] > a && p[0] < b), || {
        Error::Config("initial points must lie strictly inside the exit interval".into())
    })?;
    let prepared = Prepared::new(control);
    let n = cfg.steps();
    let sq = cfg.dt.sqrt();
    Ok((0..cfg.batch)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed_of(j));
            let mut x = cfg.start(j)[0];
            for k in 0..n {
                let t = k as f64 * cfg.dt;
                let action = prepared.action(x, k, t);
                x += action.drift1(drift, x) * cfg.dt + diffusion.eval1(x) * sq * normal(&mut rng);
                let side = if x <= a {
                    ExitSide::Left
                } else if x >= b {
                    ExitSide::Right
                } else {
                    continue;
                };
                return ExitSample { traj: j, tau: (k + 1) as f64 * cfg.dt, side, location: x };
            }
            ExitSample { traj: j, tau: n as f64 * cfg.dt, side: ExitSide::Censored, location: x }
        })
        .collect())
}

/// CSV with header `traj,tau,side,location,censored`.
pub fn write_exits_csv<W: Write>(samples: &[ExitSample], mut w: W) -> Result<()> {
    writeln!(w, "traj,tau,side,location,censored")?;
    for s in samples {
        let side = match s.side {
            ExitSide::Left => "left",
            ExitSide::Right => "right",
            ExitSide::Censored => "censored",
        };
        writeln!(w, "{},{},{},{},{}", s.traj, s.tau, side, s.location, s.censored())?;
    }
    Ok(())
}
