//! Distributional deformation D^sym b and the Hessian H[V].

use rayon::prelude::*;
use serde::Serialize;

use super::gamma::gamma_raw;
use super::{Derivation, ProbeFamily};
use crate::error::{Error, Result};
use crate::numeric::weighted_dot;
use crate::scalar::Real;
use crate::space::{lp_norm, ScalarField, Space};

/// −½ ∫ [df(b) Δg + dg(b) Δf − (div b) Γ(f, g)] dm.
pub fn deformation_pairing<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    t: T,
) -> Result<T> {
    let pf = PairingData::new(space, b, f, t)?;
    let pg = PairingData::new(space, b, g, t)?;
    let div = b.divergence(space, t)?;
    Ok(pair(space, &pf, &pg, div.values()))
}

struct PairingData<T> {
    values: Vec<T>,
    action: Vec<T>,
    laplacian: Vec<T>,
}

impl<T: Real> PairingData<T> {
    fn new(space: &Space<T>, b: &Derivation<T>, f: &ScalarField<T>, t: T) -> Result<Self> {
        Ok(PairingData {
            values: f.values().to_vec(),
            action: b.apply(space, f, t)?.into_values(),
            laplacian: space.laplacian(f).into_values(),
        })
    }
}

fn pair<T: Real>(space: &Space<T>, f: &PairingData<T>, g: &PairingData<T>, div: &[T]) -> T {
    let gam = gamma_raw(space, &f.values, &g.values);
    // Each term is symmetric under f ↔ g as written, so the result is too.
    let integrand: Vec<T> = (0..gam.len())
        .map(|k| f.action[k] * g.laplacian[k] + g.action[k] * f.laplacian[k] - div[k] * gam[k])
        .collect();
    let ones = vec![T::one(); integrand.len()];
    -T::of(0.5) * weighted_dot(space.measure(), &integrand, &ones)
}

/// Lower-bound estimate of ‖D^sym b‖_{r,s}.
#[derive(Clone, Debug, Serialize)]
pub struct DeformationReport {
    /// (i, j, pairing) over probe pairs i ≤ j.
    pub pairings: Vec<(usize, usize, f64)>,
    pub estimate: f64,
    pub argmax: Option<(usize, usize)>,
    pub r: f64,
    pub s: f64,
    pub q: f64,
    pub probes: usize,
}

/// sup over probe pairs of |pairing(f, g)| / (‖√Γf‖_r ‖√Γg‖_s), with q
/// determined by 1/q + 1/r + 1/s = 1. Both orderings of each pair are tried.
pub fn deformation_norm_estimate<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    r: f64,
    s: f64,
    probes: &ProbeFamily<T>,
    t: T,
) -> Result<DeformationReport> {
    if !(r >= 1.0 && s >= 1.0) {
        return Err(Error::domain(format!("exponents must be ≥ 1, got r = {r}, s = {s}")));
    }
    let inv_q = 1.0 - 1.0 / r - 1.0 / s;
    if !(inv_q >= 0.0 && inv_q < 1.0) {
        return Err(Error::domain(format!("1/r + 1/s = {} leaves no q in (1, ∞]", 1.0 / r + 1.0 / s)));
    }
    let q = if inv_q == 0.0 { f64::INFINITY } else { 1.0 / inv_q };
    let div = b.divergence(space, t)?;
    let data: Vec<PairingData<T>> = probes.fields().iter().map(|f| PairingData::new(space, b, f, t)).collect::<Result<_>>()?;
    let grads: Vec<(f64, f64)> = probes
        .fields()
        .iter()
        .map(|f| {
            let sg = space.wrap(gamma_raw(space, f.values(), f.values()).into_iter().map(|v| v.max(T::zero()).sqrt()).collect());
            Ok((lp_norm(space, &sg, T::of(r))?.to64(), lp_norm(space, &sg, T::of(s))?.to64()))
        })
        .collect::<Result<_>>()?;
    let n = data.len();
    let index: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let pairings: Vec<(usize, usize, f64)> =
        index.par_iter().map(|&(i, j)| (i, j, pair(space, &data[i], &data[j], div.values()).to64())).collect();
    let mut estimate = 0.0;
    let mut argmax = None;
    for &(i, j, p) in &pairings {
        let denom = (grads[i].0 * grads[j].1).min(grads[j].0 * grads[i].1);
        if denom > 0.0 {
            let ratio = p.abs() / denom;
            if ratio > estimate {
                estimate = ratio;
                argmax = Some((i, j));
            }
        }
    }
    Ok(DeformationReport { pairings, estimate, argmax, r, s, q, probes: n })
}

/// H[V](f, g) = ½ [Γ(f, Γ(V,g)) + Γ(g, Γ(V,f)) − Γ(V, Γ(f,g))].
pub fn hessian<T: Real>(space: &Space<T>, v: &ScalarField<T>, f: &ScalarField<T>, g: &ScalarField<T>) -> Result<ScalarField<T>> {
    for x in [v, f, g] {
        space.check(x)?;
    }
    let (v, f, g) = (v.values(), f.values(), g.values());
    let vg = gamma_raw(space, v, g);
    let vf = gamma_raw(space, v, f);
    let fg = gamma_raw(space, f, g);
    let a = gamma_raw(space, f, &vg);
    let b = gamma_raw(space, g, &vf);
    let c = gamma_raw(space, v, &fg);
    let half = T::of(0.5);
    Ok(space.wrap((0..a.len()).map(|k| half * ((a[k] + b[k]) - c[k])).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, GridSpec, Potential};
    use std::f64::consts::PI;

    #[test]
    fn pairing_is_symmetric_and_vanishes_for_zero() {
        let s = Potential::Quadratic { c: 1.0 }.build_space::<f64>(&GridSpec::interval_1d(-4.0, 4.0, 80)).unwrap();
        let b = Derivation::from_fn(&s, |x| vec![x[0].sin() + 0.2 * x[0]]).unwrap();
        let f = s.field_fn(|x| (0.7 * x[0]).cos());
        let g = s.field_fn(|x| x[0] * x[0] * 0.1 + x[0].sin());
        assert_eq!(deformation_pairing(&s, &b, &f, &g, 0.0).unwrap(), deformation_pairing(&s, &b, &g, &f, 0.0).unwrap());
        assert_eq!(deformation_pairing(&s, &Derivation::zero(&s), &f, &g, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn estimate_scales_linearly_and_checks_exponents() {
        let s: Space<f64> = build_space(&GridSpec::torus_1d(2.0 * PI, 64), &[0.0; 64]).unwrap();
        let probes = ProbeFamily::standard(&s, 3).unwrap();
        let b = Derivation::from_fn(&s, |x| vec![x[0].cos()]).unwrap();
        let e1 = deformation_norm_estimate(&s, &b, 4.0, 4.0, &probes, 0.0).unwrap();
        let e2 = deformation_norm_estimate(&s, &b.times(2.0), 4.0, 4.0, &probes, 0.0).unwrap();
        assert!((e2.estimate - 2.0 * e1.estimate).abs() <= 1e-10 * e1.estimate);
        assert_eq!(e1.q, 2.0);
        assert_eq!(deformation_norm_estimate(&s, &b, 2.0, 2.0, &probes, 0.0).unwrap().q, f64::INFINITY);
        assert!(deformation_norm_estimate(&s, &b, 1.5, 2.0, &probes, 0.0).is_err());
        assert_eq!(deformation_norm_estimate(&s, &Derivation::zero(&s), 4.0, 4.0, &probes, 0.0).unwrap().estimate, 0.0);
    }

    #[test]
    fn hessian_is_symmetric_and_vanishes_for_constant_v() {
        let s = Potential::Cosine { a: 0.3 }.build_space::<f64>(&GridSpec::torus_1d(2.0 * PI, 48)).unwrap();
        let v = s.field_fn(|x| x[0].sin());
        let f = s.field_fn(|x| x[0].cos() + 0.5 * (2.0 * x[0]).sin());
        let g = s.field_fn(|x| (3.0 * x[0]).cos());
        let h1 = hessian(&s, &v, &f, &g).unwrap();
        let h2 = hessian(&s, &v, &g, &f).unwrap();
        assert_eq!(h1, h2);
        assert!(hessian(&s, &s.constant(2.0), &f, &g).unwrap().max_abs() == 0.0);
    }
}
