//! Pointwise modulus of derivations and the locality defects (chain rule,
//! Leibniz rule) that vanish only in the continuum limit.

use rayon::prelude::*;

use super::gamma::gamma_raw;
use super::{Derivation, ProbeFamily};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{ScalarField, Space};

/// Probes whose local gradient √Γ(f) falls below this fraction of their
/// (unit) maximum are ignored when forming |b|_* at a node.
pub const MODULUS_GRADIENT_FLOOR: f64 = 0.1;

/// Returns (|b|, |b|_*), where |b|_* is the node-wise sup of |df(b)|/√Γ(f)
/// over the probes with √Γ(f) ≥ [`MODULUS_GRADIENT_FLOOR`] at that node.
pub fn modulus<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    probes: &ProbeFamily<T>,
    t: T,
) -> Result<(ScalarField<T>, ScalarField<T>)> {
    if probes.is_empty() {
        return Err(Error::domain("empty probe family"));
    }
    let norm = b.pointwise_norm(space, t)?;
    let floor = T::of(MODULUS_GRADIENT_FLOOR);
    let per_probe: Vec<Vec<T>> = probes
        .fields()
        .par_iter()
        .map(|f| -> Result<Vec<T>> {
            let act = b.apply(space, f, t)?;
            let g = gamma_raw(space, f.values(), f.values());
            Ok(act
                .values()
                .iter()
                .zip(&g)
                .map(|(&a, &gi)| {
                    let s = gi.max(T::zero()).sqrt();
                    if s >= floor {
                        a.abs() / s
                    } else {
                        T::zero()
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let star = (0..space.len()).map(|k| per_probe.iter().fold(T::zero(), |m, p| m.max(p[k]))).collect();
    Ok((norm, space.wrap(star)))
}

/// ‖dΦ(f⃗)(b) − Σ_i ∂_iΦ(f⃗) df_i(b)‖₂ for a node-wise map Φ with gradient `grad_phi`.
pub fn chain_rule_defect<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    phi: impl Fn(&[T]) -> T,
    grad_phi: impl Fn(&[T]) -> Vec<T>,
    fields: &[ScalarField<T>],
    t: T,
) -> Result<T> {
    if fields.is_empty() {
        return Err(Error::domain("chain rule needs at least one field"));
    }
    for f in fields {
        space.check(f)?;
    }
    let n = space.len();
    let point = |k: usize| -> Vec<T> { fields.iter().map(|f| f.values()[k]).collect() };
    let composed = space.wrap((0..n).map(|k| phi(&point(k))).collect());
    let lhs = b.apply(space, &composed, t)?;
    let actions: Vec<ScalarField<T>> = fields.iter().map(|f| b.apply(space, f, t)).collect::<Result<_>>()?;
    let mut diff = Vec::with_capacity(n);
    for k in 0..n {
        let g = grad_phi(&point(k));
        if g.len() != fields.len() {
            return Err(Error::domain("gradient of Φ has the wrong length"));
        }
        let rhs = g.iter().zip(&actions).fold(T::zero(), |s, (&gi, a)| s + gi * a.values()[k]);
        diff.push(lhs.values()[k] - rhs);
    }
    Ok(crate::space::lp_norm(space, &space.wrap(diff), T::of(2.0))?)
}

/// ‖d(fg)(b) − f dg(b) − g df(b)‖₂.
pub fn leibniz_defect<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    t: T,
) -> Result<T> {
    chain_rule_defect(space, b, |x| x[0] * x[1], |x| vec![x[1], x[0]], &[f.clone(), g.clone()], t)
}
