//! Viscous continuity equation: solver, entropy and a-priori monitors,
//! vanishing viscosity and uniqueness probes.

mod entropy;
mod export;
mod solver;
mod studies;

pub use solver::{solve_viscous_ce, CESolution, CeConfig, COURANT_LIMIT};
pub use entropy::{apriori_check, entropy_trace, weak_residual, AprioriReport, Entropy, EntropyFamily, EntropyReport, WeakResidual};
pub use export::{read_fields, write_fields, write_trace_csv};
pub use studies::{fitted_order, uniqueness_probe, vanishing_viscosity, vanishing_viscosity_with, LadderSpec, ProbeLevel, SchemeSetting, UniquenessReport, UniquenessRow, VanishingViscosityReport};
