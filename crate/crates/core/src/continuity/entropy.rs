//! Convex entropies β, their defect ℒ_β(z) = zβ'(z) − β(z), the entropy
//! inequality d/dt ∫β(u_t) ≤ ∫ℒ_β(u_t)(div b_t)⁻ and the L^r a-priori bound.

use serde::Serialize;

use super::CESolution;
use crate::calculus::Derivation;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{lp_norm, Space};

/// Convex β with β(0) = 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Entropy {
    /// β(z) = z.
    Identity,
    /// β(z) = z².
    Square,
    /// β(z) = (z⁺)^r, r ≥ 1.
    PositivePower(f64),
    /// β(z) = (z⁻)^r, r ≥ 1.
    NegativePower(f64),
    /// β(z) = |z|^r, r ≥ 1.
    AbsPower(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyFamily {
    pub entropy: Entropy,
    /// Truncation level n: β_n is β on [−n, n], extended linearly outside.
    pub truncation: Option<f64>,
}

impl EntropyFamily {
    pub fn new(entropy: Entropy) -> Result<Self> {
        match entropy {
            Entropy::PositivePower(r) | Entropy::NegativePower(r) | Entropy::AbsPower(r) if !(r >= 1.0) => {
                Err(Error::domain(format!("entropy exponent must be ≥ 1, got {r}")))
            }
            _ => Ok(EntropyFamily { entropy, truncation: None }),
        }
    }

    pub fn truncated(mut self, n: f64) -> Result<Self> {
        if !(n > 0.0) {
            return Err(Error::domain(format!("truncation level must be positive, got {n}")));
        }
        self.truncation = Some(n);
        Ok(self)
    }

    fn base(&self, z: f64) -> f64 {
        match self.entropy {
            Entropy::Identity => z,
            Entropy::Square => z * z,
            Entropy::PositivePower(r) => z.max(0.0).powf(r),
            Entropy::NegativePower(r) => (-z).max(0.0).powf(r),
            Entropy::AbsPower(r) => z.abs().powf(r),
        }
    }

    /// One-sided derivatives (β'_−(z), β'_+(z)) of the untruncated β.
    fn base_derivatives(&self, z: f64) -> (f64, f64) {
        let pow_d = |r: f64, x: f64| if x > 0.0 { r * x.powf(r - 1.0) } else { 0.0 };
        match self.entropy {
            Entropy::Identity => (1.0, 1.0),
            Entropy::Square => (2.0 * z, 2.0 * z),
            Entropy::PositivePower(r) => {
                if z == 0.0 && r == 1.0 {
                    (0.0, 1.0)
                } else {
                    let d = pow_d(r, z);
                    (d, d)
                }
            }
            Entropy::NegativePower(r) => {
                if z == 0.0 && r == 1.0 {
                    (-1.0, 0.0)
                } else {
                    let d = -pow_d(r, -z);
                    (d, d)
                }
            }
            Entropy::AbsPower(r) => {
                if z == 0.0 && r == 1.0 {
                    (-1.0, 1.0)
                } else {
                    let d = z.signum() * pow_d(r, z.abs());
                    (d, d)
                }
            }
        }
    }

    pub fn beta(&self, z: f64) -> f64 {
        match self.truncation {
            Some(n) if z > n => self.base(n) + self.base_derivatives(n).1 * (z - n),
            Some(n) if z < -n => self.base(-n) + self.base_derivatives(-n).0 * (z + n),
            _ => self.base(z),
        }
    }

    /// One-sided derivatives of β (or β_n).
    pub fn derivatives(&self, z: f64) -> (f64, f64) {
        match self.truncation {
            Some(n) if z > n => {
                let d = self.base_derivatives(n).1;
                (d, d)
            }
            Some(n) if z < -n => {
                let d = self.base_derivatives(-n).0;
                (d, d)
            }
            Some(n) if z == n => (self.base_derivatives(n).0, self.base_derivatives(n).1),
            _ => self.base_derivatives(z),
        }
    }

    /// ℒ_β(z) = zβ'_+(z) − β(z) for z ≥ 0 and zβ'_−(z) − β(z) for z ≤ 0.
    pub fn legendre(&self, z: f64) -> f64 {
        let (dm, dp) = self.derivatives(z);
        let d = if z >= 0.0 { dp } else { dm };
        z * d - self.beta(z)
    }
}

/// Output of [`entropy_trace`].
#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub times: Vec<f64>,
    /// ∫β(u_t) dm.
    pub values: Vec<f64>,
    /// Centred difference of `values` at interior times (first and last are one-sided).
    pub rates: Vec<f64>,
    /// ∫ℒ_β(u_t)(div b_t)⁻ dm.
    pub bounds: Vec<f64>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Monitors d/dt ∫β(u_t) ≤ ∫ℒ_β(u_t)(div b_t)⁻ on the stored fields, with
/// tolerance 5(dt + h²)·scale, scale = max of |values| and |bounds|.
pub fn entropy_trace<T: Real>(
    space: &Space<T>,
    sol: &CESolution<T>,
    family: &EntropyFamily,
    b: &Derivation<T>,
) -> Result<EntropyReport> {
    let m: Vec<f64> = space.measure().iter().map(|v| v.to64()).collect();
    let integrate = |g: &dyn Fn(f64) -> f64, u: &[T]| -> f64 {
        crate::numeric::compensated_sum(u.iter().zip(&m).map(|(x, mi)| mi * g(x.to64())))
    };
    let mut values = Vec::with_capacity(sol.times.len());
    let mut bounds = Vec::with_capacity(sol.times.len());
    for (t, u) in sol.times.iter().zip(&sol.fields) {
        space.check(u)?;
        values.push(integrate(&|z| family.beta(z), u.values()));
        let div = b.divergence(space, T::of(*t))?;
        let weight: Vec<f64> = div.values().iter().map(|d| (-d.to64()).max(0.0)).collect();
        let v = crate::numeric::compensated_sum(
            u.values().iter().zip(&m).zip(&weight).map(|((x, mi), w)| mi * w * family.legendre(x.to64())),
        );
        bounds.push(v);
    }
    let n = values.len();
    let rates: Vec<f64> = (0..n)
        .map(|i| {
            if n < 2 {
                return 0.0;
            }
            let (a, c) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (values[c] - values[a]) / (sol.times[c] - sol.times[a])
        })
        .collect();
    let scale = values.iter().chain(&bounds).fold(0.0_f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let tolerance = 5.0 * (sol.dt + sol.h * sol.h) * scale;
    let max_residual = rates.iter().zip(&bounds).map(|(r, b)| r - b).fold(f64::NEG_INFINITY, f64::max);
    Ok(EntropyReport { times: sol.times.clone(), values, rates, bounds, max_residual, tolerance, holds: max_residual <= tolerance })
}

/// Output of [`apriori_check`].
#[derive(Clone, Debug, Serialize)]
pub struct AprioriReport {
    pub r: f64,
    pub tolerance_factor: f64,
    /// Per stored time: (t, ‖u_t⁺‖_r, ‖u_t⁻‖_r, bound factor exp((1 − 1/r)∫‖(div b)⁻‖_∞)).
    pub rows: Vec<(f64, f64, f64, f64)>,
    /// Largest ratio ‖u_t^±‖_r / ((1 + tol)‖ū^±‖_r · factor).
    pub worst_ratio: f64,
    pub worst_time: f64,
    pub holds: bool,
}

/// Checks sup_t ‖u_t^±‖_r ≤ (1 + 10(dt + h²))‖ū^±‖_r exp((1 − 1/r)∫₀^t‖(div b_s)⁻‖_∞ ds).
pub fn apriori_check<T: Real>(space: &Space<T>, sol: &CESolution<T>, r: f64) -> Result<AprioriReport> {
    if !(r >= 1.0) {
        return Err(Error::domain(format!("exponent must be ≥ 1, got {r}")));
    }
    let rt = T::of(r);
    let norms = |u: &crate::space::ScalarField<T>| -> Result<(f64, f64)> {
        Ok((lp_norm(space, &u.positive_part(), rt)?.to64(), lp_norm(space, &u.negative_part(), rt)?.to64()))
    };
    let exponent = if r.is_infinite() { 1.0 } else { 1.0 - 1.0 / r };
    // Trapezoid integral of ‖(div b)⁻‖_∞ on the step grid.
    let mut cumulative = vec![0.0; sol.step_times.len()];
    for k in 1..cumulative.len() {
        let dt = sol.step_times[k] - sol.step_times[k - 1];
        cumulative[k] = cumulative[k - 1] + 0.5 * dt * (sol.div_negative_sup[k] + sol.div_negative_sup[k - 1]);
    }
    let integral_at = |t: f64| -> f64 {
        let k = ((t / sol.dt).round() as usize).min(cumulative.len() - 1);
        cumulative[k]
    };
    let tolerance_factor = 1.0 + 10.0 * (sol.dt + sol.h * sol.h);
    let (p0, n0) = norms(sol.initial())?;
    let mut rows = Vec::with_capacity(sol.times.len());
    let mut worst_ratio = 0.0_f64;
    let mut worst_time = 0.0;
    for (t, u) in sol.times.iter().zip(&sol.fields) {
        let (p, n) = norms(u)?;
        let factor = (exponent * integral_at(*t)).exp();
        rows.push((*t, p, n, factor));
        for (now, init) in [(p, p0), (n, n0)] {
            let ratio = if init > 0.0 {
                now / (tolerance_factor * init * factor)
            } else if now > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_time = *t;
            }
        }
    }
    Ok(AprioriReport { r, tolerance_factor, rows, worst_ratio, worst_time, holds: worst_ratio <= 1.0 })
}

/// Output of [`weak_residual`].
#[derive(Clone, Debug, Serialize)]
pub struct WeakResidual {
    pub residual: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Residual of the weak formulation for the test function ψ(t)φ(x), ψ(T) = 0:
///
/// ∫₀^T ∫[−ψ'φ − ψ dφ(b_t)] u_t + σψ Γ(φ, u_t) dm dt − ψ(0)∫φū dm,
///
/// with the trapezoid rule over the stored times.
pub fn weak_residual<T: Real>(
    space: &Space<T>,
    sol: &CESolution<T>,
    b: &Derivation<T>,
    phi: &crate::space::ScalarField<T>,
    psi: impl Fn(f64) -> f64,
    dpsi: impl Fn(f64) -> f64,
) -> Result<WeakResidual> {
    space.check(phi)?;
    let t_end = *sol.times.last().unwrap_or(&0.0);
    if psi(t_end).abs() > 1e-12 {
        return Err(Error::domain("test profile must vanish at the final time"));
    }
    let sigma = sol.config.sigma;
    let mut integrand = Vec::with_capacity(sol.times.len());
    let mut scale = 0.0_f64;
    for (t, u) in sol.times.iter().zip(&sol.fields) {
        let pu = space.inner(phi, u).to64();
        let act = space.inner(&b.apply(space, phi, T::of(*t))?, u).to64();
        let gam = space.integrate(&crate::calculus::gamma(space, phi, u)?).to64();
        let value = -dpsi(*t) * pu - psi(*t) * act + sigma * psi(*t) * gam;
        scale = scale.max(pu.abs()).max(t_end * (act.abs() + sigma * gam.abs()));
        integrand.push(value);
    }
    let mut total = 0.0;
    for k in 1..integrand.len() {
        total += 0.5 * (sol.times[k] - sol.times[k - 1]) * (integrand[k] + integrand[k - 1]);
    }
    let residual = (total - psi(0.0) * space.inner(phi, sol.initial()).to64()).abs();
    let tolerance = 5.0 * (sol.dt + sol.h * sol.h) * scale.max(f64::MIN_POSITIVE);
    Ok(WeakResidual { residual, scale, tolerance, holds: residual <= tolerance })
}
