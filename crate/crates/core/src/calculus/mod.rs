//! Γ-calculus on a discretised space: carré du champ, derivations,
//! divergence, deformation, Hessian and probe families.

mod deformation;
mod derivation;
mod families;
mod gamma;
mod locality;
mod probes;

pub use derivation::{CoefficientFn, Derivation};
pub use probes::{ProbeFamily, ProbeRecipe, NOISE_TIME};
pub use gamma::{cauchy_schwarz_defect, dirichlet_energy, gamma, sqrt_gamma};
pub use deformation::{deformation_norm_estimate, deformation_pairing, hessian, DeformationReport};
pub use locality::{chain_rule_defect, leibniz_defect, modulus, MODULUS_GRADIENT_FLOOR};
pub use families::{centered_difference, read_coefficients, write_coefficients, DerivationSpec};
