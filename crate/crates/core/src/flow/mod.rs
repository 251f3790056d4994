//! Particle flows of derivations and the superposition, compressibility,
//! speed, dissipation and no-branching checks built on them.

mod checks;
mod ensemble;

pub use checks::*;
pub use ensemble::{integrate_flow, sample_initial, AxisGeometry, FlowConfig, Initial, PathEnsemble, CLAMP_TOLERANCE};
