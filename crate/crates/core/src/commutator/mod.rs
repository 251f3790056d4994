//! Commutator C^α(u, b) = div((P_α u) b) − P_α div(u b) between the heat
//! semigroup and transport, its decay as α ↓ 0 and the interpolation identity
//!
//! ```text
//! ∫ f C^α(u, b) dm = 2 ∫₀^α ∫ D^sym b(P_{α−s} f, P_s u) dm ds    (div b = 0).
//! ```

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{deformation_norm_estimate, deformation_pairing, Derivation, ProbeFamily};
use crate::error::{Error, Result};
use crate::numeric::quadrature::{arcsine_rule, gauss_legendre};
use crate::scalar::Real;
use crate::space::{lp_norm, lp_sum_norm, ScalarField, Space};

/// C^α(u, b) = P_α(A*u) − A*(P_α u), using div(u b) = −A*u for the derivation u·b.
pub fn commutator<T: Real>(space: &Space<T>, b: &Derivation<T>, u: &ScalarField<T>, alpha: T) -> Result<ScalarField<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::domain(format!("α must be positive, got {alpha}")));
    }
    space.check(u)?;
    let adj = b.operator(space, T::zero())?.weighted_adjoint(space.measure());
    let transported = space.wrap(adj.mul_vec(u.values()));
    let a = space.apply_semigroup(&transported, alpha)?;
    let pu = space.apply_semigroup(u, alpha)?;
    let c = space.wrap(adj.mul_vec(pu.values()));
    Ok(a.sub(&c))
}

/// |∫₀^α dσ/√(σ(α−σ)) − π| for the arcsine rule, plus the largest disagreement
/// with Gauss–Legendre on the substituted integral for g(σ) = e^{−σ/α}.
pub fn quadrature_self_test(alpha: f64) -> Result<(f64, f64)> {
    let rule = arcsine_rule(16, alpha)?;
    let pi_err = (rule.integrate::<f64>(|_| 1.0) - std::f64::consts::PI).abs();
    // σ = α(1 − cos φ)/2 turns the weight into dφ on [0, π].
    let gl = gauss_legendre(32, 0.0, std::f64::consts::PI)?;
    let g = |s: f64| (-s / alpha).exp();
    let a = rule.integrate::<f64>(g);
    let b = gl.integrate::<f64>(|phi| g(0.5 * alpha * (1.0 - phi.cos())));
    Ok((pi_err, (a - b).abs()))
}

/// Exponents of the commutator estimate: 1/q + 1/r + 1/s = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Exponents {
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl Exponents {
    pub fn new(q: f64, r: f64, s: f64) -> Result<Self> {
        let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
        if !(q > 1.0 && r >= 1.0 && s > 1.0) || (inv(q) + inv(r) + inv(s) - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("need 1/q + 1/r + 1/s = 1 with q ∈ (1, ∞], got ({q}, {r}, {s})")));
        }
        Ok(Exponents { q, r, s })
    }

    /// Conjugate exponent s' = s/(s − 1).
    pub fn s_conjugate(&self) -> f64 {
        if self.s.is_infinite() {
            1.0
        } else {
            self.s / (self.s - 1.0)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutatorStudy {
    pub alphas: Vec<f64>,
    pub exponents: Exponents,
    /// ‖C^α‖ in L^{s'} + L².
    pub norm_sum: Vec<f64>,
    pub norm_2: Vec<f64>,
    /// Lower-bound estimate of ‖D^sym b‖_{r,s} over the probe family.
    pub deformation: f64,
    pub probes: usize,
    /// ‖div b‖_{L^q + L^∞}.
    pub divergence: f64,
    /// ‖u‖_{L^r ∩ L²} = max(‖u‖_r, ‖u‖₂).
    pub u_norm: f64,
    /// ‖u‖_{L^r∩L²}(‖D^sym b‖_{r,s} + ‖div b‖_{L^q+L^∞}).
    pub bound_rhs: f64,
    /// max over the ladder of norm_sum / bound_rhs.
    pub calibrated_c: f64,
    /// α below which the discrete Γ is no longer local (≈ h²).
    pub mesh_floor: f64,
    /// last / first of norm_sum over the ladder above the floor.
    pub decay_ratio: f64,
    pub monotone: bool,
    pub continuous: bool,
    pub quadrature_error: f64,
    pub notes: Vec<String>,
}

impl CommutatorStudy {
    /// CSV with columns alpha, norm_s2, norm_2, bound_rhs.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "alpha,norm_s2,norm_2,bound_rhs")?;
        for i in 0..self.alphas.len() {
            writeln!(out, "{:.10e},{:.10e},{:.10e},{:.10e}", self.alphas[i], self.norm_sum[i], self.norm_2[i], self.bound_rhs)?;
        }
        Ok(())
    }
}

/// Computes ‖C^α(u, b)‖ along a strictly decreasing α ladder together with
/// the components of the uniform bound.
pub fn decay_study<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    u: &ScalarField<T>,
    alphas: &[f64],
    exponents: Exponents,
    probes: &ProbeFamily<T>,
) -> Result<CommutatorStudy> {
    if alphas.is_empty() || alphas.windows(2).any(|w| !(w[1] < w[0])) || alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::domain("α ladder must be positive and strictly decreasing"));
    }
    let s_conj = T::of(exponents.s_conjugate());
    let two = T::of(2.0);
    let norms: Vec<(f64, f64)> = alphas
        .par_iter()
        .map(|&a| {
            let c = commutator(space, b, u, T::of(a))?;
            Ok((lp_sum_norm(space, &c, s_conj, two)?.to64(), lp_norm(space, &c, two)?.to64()))
        })
        .collect::<Result<_>>()?;
    let (norm_sum, norm_2): (Vec<f64>, Vec<f64>) = norms.into_iter().unzip();
    if norm_sum.iter().chain(&norm_2).any(|v| !v.is_finite()) {
        return Err(Error::numerical("commutator study", "non-finite norm"));
    }
    let deformation = deformation_norm_estimate(space, b, exponents.r, exponents.s, probes, T::zero())?.estimate;
    let div = b.divergence(space, T::zero())?;
    let divergence = lp_sum_norm(space, &div, T::of(exponents.q), T::infinity())?.to64();
    let u_norm = lp_norm(space, u, T::of(exponents.r))?.to64().max(lp_norm(space, u, two)?.to64());
    let bound_rhs = u_norm * (deformation + divergence);
    let calibrated_c = if bound_rhs > 0.0 { norm_sum.iter().fold(0.0_f64, |m, v| m.max(v / bound_rhs)) } else { 0.0 };
    let h = space.max_spacing().to64();
    let mesh_floor = h * h;
    let above: Vec<usize> = (0..alphas.len()).filter(|&i| alphas[i] >= mesh_floor).collect();
    let decay_ratio = match (above.first(), above.last()) {
        (Some(&i), Some(&j)) if norm_sum[i] > 0.0 => norm_sum[j] / norm_sum[i],
        _ => 0.0,
    };
    let monotone = above.windows(2).all(|w| norm_sum[w[1]] <= 1.05 * norm_sum[w[0]]);
    let continuous = norm_2.windows(2).all(|w| w[0] == 0.0 && w[1] == 0.0 || (w[1] <= 10.0 * w[0] && w[0] <= 10.0 * w[1]));
    let quadrature_error = quadrature_self_test(alphas[0])?.0;
    let mut notes = vec![format!(
        "‖D^sym b‖ is a lower bound over {} probes; the bound's right-hand side may be under-resolved",
        probes.len()
    )];
    if above.len() < alphas.len() {
        notes.push(format!("{} ladder points below the mesh floor α ≈ h² = {:.3e} excluded from the decay check", alphas.len() - above.len(), mesh_floor));
    }
    Ok(CommutatorStudy {
        alphas: alphas.to_vec(),
        exponents,
        norm_sum,
        norm_2,
        deformation,
        probes: probes.len(),
        divergence,
        u_norm,
        bound_rhs,
        calibrated_c,
        mesh_floor,
        decay_ratio,
        monotone,
        continuous,
        quadrature_error,
        notes,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InterpolationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// max(|lhs|, ‖f‖₂‖C^α‖₂, α · max_s |2∫D^sym b(P_{α−s}f, P_s u)|).
    pub scale: f64,
    pub nodes: usize,
}

/// Compares ∫ f C^α dm with 2∫₀^α ∫D^sym b(P_{α−s}f, P_s u) ds by Gauss–Legendre
/// quadrature with `nodes` points. Requires ‖div b‖_∞ ≤ 1e−8.
pub fn interpolation_identity_check<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    u: &ScalarField<T>,
    f: &ScalarField<T>,
    alpha: T,
    nodes: usize,
) -> Result<InterpolationCheck> {
    let div = b.divergence(space, T::zero())?.max_abs().to64();
    if div > 1e-8 {
        return Err(Error::Precondition(format!("interpolation identity needs a divergence-free field, ‖div b‖_∞ = {div:.3e}")));
    }
    space.check(f)?;
    let c = commutator(space, b, u, alpha)?;
    let lhs = space.inner(f, &c).to64();
    let a = alpha.to64();
    let rule = gauss_legendre(nodes, 0.0, a)?;
    let values: Vec<f64> = rule
        .nodes
        .par_iter()
        .map(|&s| {
            let g = space.apply_semigroup(f, T::of(a - s))?;
            let h = space.apply_semigroup(u, T::of(s))?;
            Ok(2.0 * deformation_pairing(space, b, &g, &h, T::zero())?.to64())
        })
        .collect::<Result<_>>()?;
    let rhs = crate::numeric::compensated_sum(values.iter().zip(&rule.weights).map(|(v, w)| v * w));
    // ‖f‖₂‖C^α‖₂ keeps the scale honest when symmetry makes both sides vanish.
    let cs = (space.inner(f, f) * space.inner(&c, &c)).sqrt().to64();
    let scale = lhs.abs().max(cs).max(a * values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    Ok(InterpolationCheck { lhs, rhs, residual: (lhs - rhs).abs(), scale, nodes })
}
