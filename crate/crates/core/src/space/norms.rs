//! Weighted L^p norms and the L^p + L^q sum norm.

use super::{ScalarField, Space};
use crate::error::{Error, Result};
use crate::numeric::Accumulator;
use crate::scalar::Real;

fn check_exponent<T: Real>(p: T) -> Result<()> {
    if p.is_nan() || p < T::one() {
        return Err(Error::domain(format!("exponent must lie in [1, ∞], got {p}")));
    }
    Ok(())
}

/// ‖f‖_{L^p(m)}; `p = T::infinity()` gives the sup norm.
pub fn lp_norm<T: Real>(space: &Space<T>, f: &ScalarField<T>, p: T) -> Result<T> {
    check_exponent(p)?;
    space.check(f)?;
    Ok(lp_raw(space.measure(), f.values(), p))
}

pub(crate) fn lp_raw<T: Real>(m: &[T], f: &[T], p: T) -> T {
    if p.is_infinite() {
        return f.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    }
    let scale = f.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    if scale == T::zero() {
        return T::zero();
    }
    // Normalise by the sup to avoid overflow for large p.
    let mut acc = Accumulator::new();
    for (&mi, &fi) in m.iter().zip(f) {
        acc.add(mi * (fi.abs() / scale).powf(p));
    }
    scale * acc.value().powf(T::one() / p)
}

/// ‖f‖_{L^p + L^q} = inf over threshold splits f = f·1_{|f|>λ} + f·1_{|f|≤λ}
/// of ‖large‖_a + ‖small‖_b, with {a, b} = {p, q} in either order.
///
/// The cost is piecewise constant in λ with jumps only at the values |f_i|,
/// so the infimum is found exactly by enumerating those breakpoints.
pub fn lp_sum_norm<T: Real>(space: &Space<T>, f: &ScalarField<T>, p: T, q: T) -> Result<T> {
    check_exponent(p)?;
    check_exponent(q)?;
    space.check(f)?;
    let m = space.measure();
    let mut order: Vec<usize> = (0..f.len()).collect();
    let vals = f.values();
    order.sort_by(|&a, &b| vals[a].abs().partial_cmp(&vals[b].abs()).unwrap_or(std::cmp::Ordering::Equal));
    let a = split_costs(m, vals, &order, p, q);
    let b = split_costs(m, vals, &order, q, p);
    Ok(a.min(b))
}

/// min over k of ‖f on the top n−k entries‖_large + ‖f on the bottom k entries‖_small,
/// only splitting between distinct magnitudes.
fn split_costs<T: Real>(m: &[T], f: &[T], order: &[usize], large: T, small: T) -> T {
    let n = order.len();
    let mag = |k: usize| f[order[k]].abs();
    // Prefix over the small part (ascending) and suffix over the large part.
    let small_prefix = partial_norms(m, f, order.iter().copied(), small);
    let large_suffix = {
        let mut s = partial_norms(m, f, order.iter().rev().copied(), large);
        s.reverse();
        s
    };
    // small_prefix[k] = norm of the k smallest, large_suffix[k] = norm of entries k..n.
    let mut best = T::infinity();
    for k in 0..=n {
        if k > 0 && k < n && mag(k - 1) == mag(k) {
            continue;
        }
        let c = small_prefix[k] + large_suffix[k];
        if c < best {
            best = c;
        }
    }
    best
}

/// Norms of the running unions of entries in `iter` order; entry k covers the first k.
fn partial_norms<T: Real>(m: &[T], f: &[T], iter: impl Iterator<Item = usize>, p: T) -> Vec<T> {
    let mut out = vec![T::zero()];
    if p.is_infinite() {
        let mut cur = T::zero();
        for i in iter {
            cur = cur.max(f[i].abs());
            out.push(cur);
        }
    } else {
        let mut acc = Accumulator::new();
        for i in iter {
            acc.add(m[i] * f[i].abs().powf(p));
            out.push(acc.value().max(T::zero()).powf(T::one() / p));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, GridSpec};
    use std::f64::consts::PI;

    fn torus() -> Space<f64> {
        build_space(&GridSpec::torus_1d(2.0 * PI, 32), &[0.0; 32]).unwrap()
    }

    #[test]
    fn constant_norms() {
        let s = torus();
        let one = s.constant(1.0);
        for p in [1.0, 2.0, 3.5] {
            let want = (2.0 * PI).powf(1.0 / p);
            assert!((lp_norm(&s, &one, p).unwrap() - want).abs() < 1e-12);
        }
        assert_eq!(lp_norm(&s, &one, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(lp_norm(&s, &s.zeros(), 2.0).unwrap(), 0.0);
        assert_eq!(lp_sum_norm(&s, &s.zeros(), 2.0, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_small_exponent() {
        let s = torus();
        assert!(matches!(lp_norm(&s, &s.constant(1.0), 0.5), Err(Error::Domain(_))));
        assert!(lp_sum_norm(&s, &s.constant(1.0), 2.0, 0.9).is_err());
    }

    #[test]
    fn sum_norm_matches_brute_force_over_thresholds() {
        let s = torus();
        let f = s.field_fn(|x| (3.0 * x[0]).sin() * 4.0 + x[0].cos().powi(3));
        for (p, q) in [(1.0, 2.0), (2.0, 4.0), (4.0 / 3.0, f64::INFINITY)] {
            let fast = lp_sum_norm(&s, &f, p, q).unwrap();
            let mut brute = f64::INFINITY;
            let mut lambdas: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
            lambdas.push(0.0);
            lambdas.push(f64::INFINITY);
            for &l in &lambdas {
                let big = f.map(|v| if v.abs() > l { v } else { 0.0 });
                let small = f.map(|v| if v.abs() <= l { v } else { 0.0 });
                for (a, b) in [(p, q), (q, p)] {
                    let c = lp_norm(&s, &big, a).unwrap() + lp_norm(&s, &small, b).unwrap();
                    brute = brute.min(c);
                }
            }
            assert!((fast - brute).abs() < 1e-12 * brute.max(1.0), "{p} {q}: {fast} vs {brute}");
            let np = lp_norm(&s, &f, p).unwrap();
            let nq = lp_norm(&s, &f, q).unwrap();
            assert!(fast <= np.min(nq) + 1e-12);
        }
    }
}
