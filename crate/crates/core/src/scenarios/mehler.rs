use crate::error::{Error, Result};
use crate::numeric::quadrature::gauss_hermite_probabilists;
use crate::space::{ScalarField, Space};

/// P_t f(x) = ∫ f(e^{−t}x + √(1 − e^{−2t}) y) dγ(y) at the nodes of a 1D OU space,
/// by Gauss–Hermite quadrature with `nodes` points.
pub fn mehler_reference(space: &Space<f64>, f: impl Fn(f64) -> f64, t: f64, nodes: usize) -> Result<ScalarField<f64>> {
    if nodes < 8 {
        return Err(Error::domain(format!("Mehler reference needs at least 8 nodes, got {nodes}")));
    }
    if !(t >= 0.0) || space.dimension() != 1 {
        return Err(Error::domain("Mehler reference needs t ≥ 0 on a 1D space"));
    }
    let rule = gauss_hermite_probabilists(nodes)?;
    let a = (-t).exp();
    let s = (-(-2.0 * t).exp_m1()).sqrt();
    Ok(space.field_fn(|x| rule.integrate::<f64>(|y| f(a * x[0] + s * y))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{GridSpec, Potential};

    #[test]
    fn moments() {
        let s = Potential::Quadratic { c: 1.0 }.build_space::<f64>(&GridSpec::interval_1d(-6.0, 6.0, 64)).unwrap();
        let id = mehler_reference(&s, |x| x, 0.0, 8).unwrap();
        assert!(id.values().iter().enumerate().all(|(i, v)| (v - s.coords(i)[0]).abs() < 1e-13));
        let t = 0.7;
        let lin = mehler_reference(&s, |x| x, t, 8).unwrap();
        let sq = mehler_reference(&s, |x| x * x, t, 8).unwrap();
        for i in 0..s.len() {
            let x = s.coords(i)[0];
            assert!((lin.values()[i] - (-t).exp() * x).abs() < 1e-13);
            let e = (-2.0 * t).exp();
            assert!((sq.values()[i] - (e * x * x + 1.0 - e)).abs() < 1e-12);
        }
        assert!(mehler_reference(&s, |x| x, t, 4).is_err());
    }
}
