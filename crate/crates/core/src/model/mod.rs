//! Problem data: landscapes, controls, drift, diffusion and cost.

pub mod control;
pub mod dynamics;
pub mod potential;
pub mod smoothing;

pub use control::{ControlLaw, ControlSet, LawValues};
pub use dynamics::{
    one_sided_lipschitz_estimate, relaxed_drift, BoundingFields, DiffusionSpec, DriftSpec, Envelope,
    EnvelopeCheck, RunningCost,
};
pub use potential::{library, Landscape1D, Potential1D, PotentialTable};
pub use smoothing::{barycentric, effective_potential, mollify_gaussian, moving_average};
