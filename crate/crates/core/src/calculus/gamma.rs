//! Carré du champ Γ(f, g) = ½(Δ(fg) − fΔg − gΔf).
//!
//! With zero row sums this equals ½ Σ_j L_ij (f_j − f_i)(g_j − g_i), which is
//! how it is evaluated: bilinear, symmetric and nonnegative on the diagonal
//! without cancellation.

use crate::space::{ScalarField, Space};
use crate::error::Result;
use crate::numeric::Accumulator;
use crate::scalar::Real;

pub(crate) fn gamma_raw<T: Real>(space: &Space<T>, f: &[T], g: &[T]) -> Vec<T> {
    let l = space.generator();
    let half = T::of(0.5);
    (0..f.len())
        .map(|i| {
            let mut acc = Accumulator::new();
            for (j, lij) in l.row(i) {
                if j != i {
                    acc.add(lij * ((f[j] - f[i]) * (g[j] - g[i])));
                }
            }
            half * acc.value()
        })
        .collect()
}

/// Γ(f, g).
pub fn gamma<T: Real>(space: &Space<T>, f: &ScalarField<T>, g: &ScalarField<T>) -> Result<ScalarField<T>> {
    space.check(f)?;
    space.check(g)?;
    Ok(space.wrap(gamma_raw(space, f.values(), g.values())))
}

/// √Γ(f), the minimal weak gradient of f.
pub fn sqrt_gamma<T: Real>(space: &Space<T>, f: &ScalarField<T>) -> Result<ScalarField<T>> {
    Ok(gamma(space, f, f)?.map(|v| v.max(T::zero()).sqrt()))
}

/// Largest pointwise excess of |Γ(f,g)| over √Γ(f)√Γ(g).
pub fn cauchy_schwarz_defect<T: Real>(space: &Space<T>, f: &ScalarField<T>, g: &ScalarField<T>) -> Result<T> {
    let fg = gamma(space, f, g)?;
    let ff = gamma(space, f, f)?;
    let gg = gamma(space, g, g)?;
    let mut worst = T::zero();
    for i in 0..fg.len() {
        let e = fg.values()[i].abs() - (ff.values()[i] * gg.values()[i]).max(T::zero()).sqrt();
        worst = worst.max(e);
    }
    Ok(worst)
}

/// Dirichlet energy ℰ(f) = ∫Γ(f) dm.
pub fn dirichlet_energy<T: Real>(space: &Space<T>, f: &ScalarField<T>) -> Result<T> {
    Ok(space.integrate(&gamma(space, f, f)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, GridSpec};
    use std::f64::consts::PI;

    #[test]
    fn definition_matches_edge_form() {
        let spec = GridSpec::interval_1d(-2.0, 3.0, 30);
        let s = Space::<f64>::from_fn(&spec, |x| 0.3 * x[0] * x[0] + x[0].sin()).unwrap();
        let f = s.field_fn(|x| (1.3 * x[0]).cos() + x[0]);
        let g = s.field_fn(|x| x[0] * x[0] - 0.5 * x[0].sin());
        let def = s.laplacian(&f.mul(&g)).sub(&f.mul(&s.laplacian(&g))).sub(&g.mul(&s.laplacian(&f))).scale(0.5);
        let edge = gamma(&s, &f, &g).unwrap();
        let scale = def.max_abs();
        for (a, b) in def.values().iter().zip(edge.values()) {
            assert!((a - b).abs() < 1e-10 * scale, "{a} {b}");
        }
    }

    #[test]
    fn constants_have_no_gradient_and_energy_integrates_by_parts() {
        let s: Space<f64> = build_space(&GridSpec::torus_1d(2.0 * PI, 64), &[0.0; 64]).unwrap();
        let f = s.field_fn(|x| x[0].sin() + 0.2 * (2.0 * x[0]).cos());
        let g = s.field_fn(|x| (3.0 * x[0]).sin());
        assert!(gamma(&s, &f, &s.constant(4.0)).unwrap().max_abs() == 0.0);
        let lhs = s.integrate(&gamma(&s, &f, &g).unwrap());
        let rhs = -s.inner(&f, &s.laplacian(&g));
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn sine_gradient_on_flat_torus() {
        let n = 256;
        let s: Space<f64> = build_space(&GridSpec::torus_1d(2.0 * PI, n), &vec![0.0; n]).unwrap();
        let f = s.field_fn(|x| x[0].sin());
        let g = gamma(&s, &f, &f).unwrap();
        let h = 2.0 * PI / n as f64;
        let err = g.values().iter().enumerate().map(|(i, v)| (v - (i as f64 * h).cos().powi(2)).abs()).fold(0.0, f64::max);
        assert!(err < h * h, "{err}");
        assert!(cauchy_schwarz_defect(&s, &f, &s.field_fn(|x| x[0].cos())).unwrap() <= 1e-15);
    }
}
