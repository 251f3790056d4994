pub mod calculus;
pub mod commutator;
pub mod continuity;
pub mod curvature;
pub mod error;
pub mod flow;
pub mod numeric;
pub mod scalar;
pub mod scenarios;
pub mod space;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double precision instantiations.
pub mod f64 {
    pub type Space = crate::space::Space<f64>;
    pub type ScalarField = crate::space::ScalarField<f64>;
    pub type Derivation = crate::calculus::Derivation<f64>;
    pub type ProbeFamily = crate::calculus::ProbeFamily<f64>;
    pub type CESolution = crate::continuity::CESolution<f64>;
}

/// Single precision instantiations.
pub mod f32 {
    pub type Space = crate::space::Space<f32>;
    pub type ScalarField = crate::space::ScalarField<f32>;
    pub type Derivation = crate::calculus::Derivation<f32>;
    pub type ProbeFamily = crate::calculus::ProbeFamily<f32>;
    pub type CESolution = crate::continuity::CESolution<f32>;
}

pub type Space64 = space::Space<f64>;
pub type Space32 = space::Space<f32>;
pub type Field64 = space::ScalarField<f64>;
pub type Field32 = space::ScalarField<f32>;
