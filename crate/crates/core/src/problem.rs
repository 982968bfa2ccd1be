//! JSON problem definitions.
//!
//! ```json
//! {"potential": {"coeffs": [0, 0, -0.5, 0, 0.25], "beta": 1},
//!  "control": {"min": -1, "max": 1, "points": 21},
//!  "cost": {"state": [1, -2, 1], "control_weight": 0},
//!  "drift": {"kind": "gradient"},
//!  "sigma": {"kind": "constant", "value": 0},
//!  "grid": {"lo": -3, "hi": 3, "n": 1201}}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundingFields, ControlSet, DiffusionSpec, DriftSpec, Potential1D, RunningCost};
use crate::numerics::Grid1D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// Ascending coefficients of a single polynomial.
    #[serde(default)]
    pub coeffs: Vec<f64>,
    /// Alternative piecewise form: `[[start, [c0, c1, ...]], ...]`.
    #[serde(default)]
    pub pieces: Vec<(f64, Vec<f64>)>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Ascending polynomial coefficients of the state part.
    pub state: Vec<f64>,
    #[serde(default)]
    pub cap: Option<f64>,
    #[serde(default)]
    pub control_weight: f64,
    #[serde(default)]
    pub control_center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    /// `−V′(x) + u`; `k` defaults to `max(−V″)` on the grid.
    Gradient {
        #[serde(default)]
        k: Option<f64>,
    },
    /// `a·x + b·u + c`.
    Linear {
        a: f64,
        #[serde(default = "one")]
        b: f64,
        #[serde(default)]
        c: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaConfig {
    Constant { value: f64 },
    Affine { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    pub control: ControlConfig,
    pub cost: CostConfig,
    pub drift: DriftConfig,
    pub sigma: SigmaConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub bounds: Option<BoundingFields>,
}

/// A validated problem ready for the numerical modules.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub potential: Option<Potential1D>,
    pub drift: DriftSpec,
    pub sigma: DiffusionSpec,
    pub cost: RunningCost,
    pub set: ControlSet,
    pub grid: Grid1D,
    pub bounds: Option<BoundingFields>,
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Problem> {
        let g = &self.grid;
        let grid = Grid1D::new(g.lo, g.hi, g.n)?;
        let set = ControlSet::uniform(self.control.min, self.control.max, self.control.points)?;
        let potential = match &self.potential {
            None => None,
            Some(p) => {
                let v = match (p.coeffs.is_empty(), p.pieces.is_empty()) {
                    (false, true) => Potential1D::polynomial(p.coeffs.clone(), p.beta, g.lo, g.hi)?,
                    (true, false) => Potential1D::piecewise(p.pieces.clone(), p.beta, g.lo, g.hi)?,
                    _ => return Err(Error::Config("potential: give exactly one of `coeffs` or `pieces`".into())),
                };
                v.validate()?;
                Some(v)
            }
        };
        let drift = match (&self.drift, &potential) {
            (DriftConfig::Gradient { k }, Some(v)) => {
                let k = k.unwrap_or_else(|| {
                    grid.nodes().iter().map(|&x| -crate::model::Landscape1D::d2(v, x)).fold(f64::MIN, f64::max)
                });
                DriftSpec::gradient(v.clone(), k)
            }
            (DriftConfig::Gradient { .. }, None) => {
                return Err(Error::Config("drift: gradient drift needs a `potential` block".into()))
            }
            (DriftConfig::Linear { a, b, c }, _) => DriftSpec::linear(*a, *b, *c).with_domain(g.lo, g.hi),
        };
        let sigma = match self.sigma {
            SigmaConfig::Constant { value } => DiffusionSpec::scalar(value),
            SigmaConfig::Affine { a, b } => DiffusionSpec::affine(a, b),
        };
        let c = &self.cost;
        let cost = RunningCost::separable(c.state.clone(), c.cap, c.control_weight, c.control_center)
            .with_bounds_on(g.lo, g.hi, &set);
        if let Some(b) = &self.bounds {
            b.validate()?;
        }
        Ok(Problem { name: self.name.clone(), potential, drift, sigma, cost, set, grid, bounds: self.bounds.clone() })
    }
}

/// Deserializes with field-path diagnostics (`cost.state[2]: invalid type ...`).
pub fn from_json_str<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Self> {
        from_json_str::<ProblemConfig>(text)?.build()
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_json::<ProblemConfig>(path)?.build()
    }
}
