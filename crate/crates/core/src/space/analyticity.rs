//! Empirical analyticity constant of the heat semigroup on L².

use super::{ScalarField, Space};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Outcome of [`analyticity_constant`].
#[derive(Clone, Debug, serde::Serialize)]
pub struct AnalyticityReport {
    /// sup over probes and t of t‖ΔP_t f‖₂ / ‖f‖₂.
    pub estimate: f64,
    /// Time at which the supremum was attained.
    pub argmax_t: f64,
    /// Largest value of ‖P_t f − P_{t−t'} f‖₂ − min{c log(1 + t'/(t−t')), 2}‖f‖₂, relative to ‖f‖₂.
    pub log_bound_excess: f64,
    pub log_bound_holds: bool,
    pub probes: usize,
    pub times: usize,
}

/// Fractions t'/t used for the logarithmic increment bound.
const INCREMENT_FRACTIONS: [f64; 4] = [0.1, 0.25, 0.5, 0.9];

/// Estimates c^Δ₂ = sup t‖ΔP_t f‖₂/‖f‖₂ over the given probes and every
/// eigenvector of the generator, for t on `ladder` ⊂ (0, 1).
///
/// All norms are taken in spectral coordinates, where P_t and Δ are diagonal.
/// The log bound ‖P_t f − P_{t−t'}f‖₂ ≤ min{c log(1 + t'/(t−t')), 2}‖f‖₂ is
/// checked with the returned estimate on the same family.
pub fn analyticity_constant<T: Real>(
    space: &Space<T>,
    p: u32,
    ladder: &[T],
    probes: &[ScalarField<T>],
) -> Result<AnalyticityReport> {
    if p != 2 {
        return Err(Error::domain(format!("analyticity constant is only implemented for p = 2, got {p}")));
    }
    if ladder.is_empty() {
        return Err(Error::domain("empty time ladder"));
    }
    if let Some(t) = ladder.iter().find(|t| !(**t > T::zero() && **t < T::one())) {
        return Err(Error::domain(format!("ladder time {t} outside (0, 1)")));
    }
    for f in probes {
        space.check(f)?;
    }
    let lambdas: Vec<f64> = space.eigenvalues().iter().map(|l| l.to64()).collect();
    let coeffs: Vec<Vec<f64>> = probes
        .iter()
        .map(|f| space.spectral_coefficients(f).iter().map(|c| c.to64()).collect())
        .collect();
    // Eigenvector k has the k-th unit coefficient vector.
    let n = lambdas.len();
    let times: Vec<f64> = ladder.iter().map(|t| t.to64()).collect();

    let norm_with = |c: &[f64], g: &dyn Fn(f64) -> f64| -> f64 {
        let mut acc = crate::numeric::Accumulator::new();
        for (ck, &l) in c.iter().zip(&lambdas) {
            let v = ck * g(l);
            acc.add(v * v);
        }
        acc.value().sqrt()
    };

    let mut estimate = 0.0_f64;
    let mut argmax_t = times[0];
    for c in &coeffs {
        let f2 = norm_with(c, &|_| 1.0);
        if f2 == 0.0 {
            continue;
        }
        for &t in &times {
            let r = t * norm_with(c, &|l| l * (l * t).exp()) / f2;
            if r > estimate {
                estimate = r;
                argmax_t = t;
            }
        }
    }
    for &l in &lambdas {
        for &t in &times {
            let r = t * l.abs() * (l * t).exp();
            if r > estimate {
                estimate = r;
                argmax_t = t;
            }
        }
    }

    let mut excess = f64::NEG_INFINITY;
    let mut check = |c: &[f64]| {
        let f2 = norm_with(c, &|_| 1.0);
        if f2 == 0.0 {
            return;
        }
        for &t in &times {
            for frac in INCREMENT_FRACTIONS {
                let tp = frac * t;
                let s = t - tp;
                let lhs = norm_with(c, &|l| (l * t).exp() - (l * s).exp()) / f2;
                let rhs = (estimate * (1.0 + tp / s).ln()).min(2.0);
                excess = excess.max(lhs - rhs);
            }
        }
    };
    for c in &coeffs {
        check(c);
    }
    let mut unit = vec![0.0; n];
    for k in 0..n {
        unit[k] = 1.0;
        check(&unit);
        unit[k] = 0.0;
    }
    let tol = 1e-12_f64.max(T::eps64() * 64.0);
    Ok(AnalyticityReport {
        estimate,
        argmax_t,
        log_bound_excess: excess,
        log_bound_holds: excess <= tol,
        probes: probes.len() + n,
        times: times.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, GridSpec};

    #[test]
    fn eigenvector_ratio_is_exact() {
        let spec = GridSpec::interval_1d(-2.0, 2.0, 24);
        let s = Space::<f64>::from_fn(&spec, |x| 0.5 * x[0] * x[0]).unwrap();
        let order = s.eigen_order();
        let k = order[3];
        let lam = s.eigenvalues()[k];
        let e = s.eigenvector(k);
        let t = 0.2;
        let single = analyticity_constant(&s, 2, &[t], &[e.clone()]).unwrap();
        let want = t * lam.abs() * (lam * t).exp();
        assert!(single.estimate >= want - 1e-12);
        let ladder: Vec<f64> = (0..40).map(|k| 0.005 * 1.14f64.powi(k)).filter(|t| *t < 1.0).collect();
        let r = analyticity_constant(&s, 2, &ladder, &[e]).unwrap();
        assert!(r.estimate <= 1.0 / std::f64::consts::E + 1e-12);
        assert!(r.log_bound_holds, "{r:?}");
    }

    #[test]
    fn bad_inputs() {
        let s = build_space(&GridSpec::torus_1d(1.0, 8), &[0.0; 8]).unwrap();
        assert!(matches!(analyticity_constant(&s, 2, &[], &[]), Err(Error::Domain(_))));
        assert!(analyticity_constant(&s, 1, &[0.1], &[]).is_err());
        assert!(analyticity_constant(&s, 2, &[1.5], &[]).is_err());
    }

    #[test]
    fn constant_probe_contributes_nothing() {
        let s = build_space(&GridSpec::torus_1d(1.0, 8), &[0.0; 8]).unwrap();
        let c = s.constant(3.0);
        let coeffs = s.spectral_coefficients(&c);
        let lam = s.eigenvalues();
        let t: f64 = 0.3;
        let v: f64 = coeffs.iter().zip(&lam).map(|(c, l)| (c * l * (l * t).exp()).powi(2)).sum();
        assert!(v.sqrt() < 1e-10);
    }
}
