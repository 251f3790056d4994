//! Named analytic potential families V, applied coordinate-wise in 2D.

use serde::{Deserialize, Serialize};

use super::{Domain, GridSpec, Space};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// V ≡ 0.
    Flat,
    /// V = c x²/2.
    Quadratic { c: f64 },
    /// V = c x⁴/4.
    Quartic { c: f64 },
    /// V = a cos x.
    Cosine { a: f64 },
    /// V = c x.
    Linear { c: f64 },
}

impl Potential {
    /// Value on one coordinate.
    pub fn eval1(&self, x: f64) -> f64 {
        match *self {
            Potential::Flat => 0.0,
            Potential::Quadratic { c } => 0.5 * c * x * x,
            Potential::Quartic { c } => 0.25 * c * x.powi(4),
            Potential::Cosine { a } => a * x.cos(),
            Potential::Linear { c } => c * x,
        }
    }

    pub fn derivative1(&self, x: f64) -> f64 {
        match *self {
            Potential::Flat => 0.0,
            Potential::Quadratic { c } => c * x,
            Potential::Quartic { c } => c * x.powi(3),
            Potential::Cosine { a } => -a * x.sin(),
            Potential::Linear { c } => c,
        }
    }

    pub fn second_derivative1(&self, x: f64) -> f64 {
        match *self {
            Potential::Flat | Potential::Linear { .. } => 0.0,
            Potential::Quadratic { c } => c,
            Potential::Quartic { c } => 3.0 * c * x * x,
            Potential::Cosine { a } => -a * x.cos(),
        }
    }

    /// V(x) = Σ_a V₁(x_a).
    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.eval1(v)).sum()
    }

    /// Whether V is compatible with periodic axes of the given period.
    pub fn is_periodic_on(&self, period: f64) -> bool {
        match *self {
            Potential::Flat => true,
            Potential::Cosine { a } => a == 0.0 || ((period / (2.0 * std::f64::consts::PI)).round() * 2.0 * std::f64::consts::PI - period).abs() < 1e-9 * period,
            Potential::Quadratic { c } | Potential::Quartic { c } | Potential::Linear { c } => c == 0.0,
        }
    }

    /// inf of V'' over the domain: the largest K for which the weighted
    /// space satisfies BE(K, ∞).
    pub fn curvature_lower_bound(&self, spec: &GridSpec) -> f64 {
        spec.domain
            .iter()
            .map(|d| {
                let (lo, hi) = match *d {
                    Domain::Interval { a, b } => (a, b),
                    Domain::Torus { period, origin } => (origin, origin + period),
                };
                match *self {
                    Potential::Flat | Potential::Linear { .. } => 0.0,
                    Potential::Quadratic { c } => c,
                    Potential::Quartic { c } => {
                        let max_sq = lo.abs().max(hi.abs()).powi(2);
                        let min_sq = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()).powi(2) };
                        (3.0 * c * min_sq).min(3.0 * c * max_sq)
                    }
                    Potential::Cosine { a } => -a.abs(),
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Builds the weighted space for this potential, checking periodicity.
    pub fn build_space<T: Real>(&self, spec: &GridSpec) -> Result<Space<T>> {
        for d in &spec.domain {
            if let Domain::Torus { period, .. } = *d {
                if !self.is_periodic_on(period) {
                    return Err(Error::Construction(format!("potential {self:?} is not periodic with period {period}")));
                }
            }
        }
        Space::from_fn(spec, |x: &[T]| {
            let xs: Vec<f64> = x.iter().map(|v| v.to64()).collect();
            T::of(self.eval(&xs))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn curvature_bounds() {
        let ou = GridSpec::interval_1d(-6.0, 6.0, 64);
        assert_eq!(Potential::Quadratic { c: 1.0 }.curvature_lower_bound(&ou), 1.0);
        assert_eq!(Potential::Quartic { c: 1.0 }.curvature_lower_bound(&ou), 0.0);
        let t = GridSpec::torus_1d(2.0 * PI, 16);
        assert_eq!(Potential::Cosine { a: 0.5 }.curvature_lower_bound(&t), -0.5);
    }

    #[test]
    fn periodicity_is_enforced() {
        let t = GridSpec::torus_1d(2.0 * PI, 16);
        assert!(Potential::Quadratic { c: 1.0 }.build_space::<f64>(&t).is_err());
        assert!(Potential::Cosine { a: 1.0 }.build_space::<f64>(&t).is_ok());
        assert!(Potential::Cosine { a: 1.0 }.build_space::<f64>(&GridSpec::torus_1d(3.0, 16)).is_err());
    }

    #[test]
    fn json_shape() {
        let p: Potential = serde_json::from_str(r#"{"family":"quadratic","c":1.0}"#).unwrap();
        assert_eq!(p, Potential::Quadratic { c: 1.0 });
        assert!(serde_json::from_str::<Potential>(r#"{"family":"quadratic","c":1.0,"x":2}"#).is_err());
    }
}
