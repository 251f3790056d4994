//! θ-scheme for the viscous continuity equation ∂_t u + div(u b_t) = σΔu.
//!
//! The transport term is −div(u b) = A*u, the m-adjoint of the derivation
//! matrix A applied to u, so ∫A*u dm = ⟨u, A1⟩ = 0 and mass is conserved by
//! construction. Each step solves
//!
//! ```text
//! (I − θ dt F) u^{n+1} = (I + (1 − θ) dt F) u^n,   F = A*(t_{n+½}) + σΔ [+ G]
//! ```
//!
//! where the optional positivity guard G is the self-adjoint graph Laplacian
//! with conductances c_ij = max(0, −m_i A*_ij, −m_j A*_ji). With θ = 1 and the
//! guard on, I − dt F is an M-matrix: the scheme is positive, monotone and
//! contracts every L^r norm up to the divergence factor.

use serde::{Deserialize, Serialize};

use crate::calculus::Derivation;
use crate::error::{Error, Result};
use crate::numeric::{Csr, SparseSolver};
use crate::scalar::Real;
use crate::space::{lp_norm, ScalarField, Space};

/// Time-dependent systems above this size use the iterative solver.
const TIME_DEPENDENT_DIRECT_LIMIT: usize = 256;

/// Explicit transport must satisfy dt·max|b|/h ≤ this Courant number.
pub const COURANT_LIMIT: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeConfig {
    /// Viscosity σ ≥ 0.
    pub sigma: f64,
    /// Final time T.
    pub t_end: f64,
    /// Requested time step; rounded down so that T is a whole number of steps.
    pub dt: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub positivity_guard: bool,
    /// Keep every k-th field (the final field is always kept).
    #[serde(default = "default_store")]
    pub store_every: usize,
}

fn default_theta() -> f64 {
    0.5
}

fn default_store() -> usize {
    1
}

impl CeConfig {
    pub fn new(sigma: f64, t_end: f64, dt: f64) -> Self {
        CeConfig { sigma, t_end, dt, theta: default_theta(), positivity_guard: false, store_every: 1 }
    }

    pub fn theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    /// Implicit Euler with the positivity guard: the monotone scheme.
    pub fn monotone(mut self) -> Self {
        self.theta = 1.0;
        self.positivity_guard = true;
        self
    }

    pub fn store_every(mut self, k: usize) -> Self {
        self.store_every = k;
        self
    }

    fn validate(&self) -> Result<usize> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::domain(format!("viscosity must be ≥ 0, got {}", self.sigma)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::domain(format!("final time must be positive, got {}", self.t_end)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::domain(format!("time step must be positive, got {}", self.dt)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::domain(format!("θ must lie in [0, 1], got {}", self.theta)));
        }
        if self.store_every == 0 {
            return Err(Error::domain("store_every must be ≥ 1"));
        }
        Ok(((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize)
    }
}

/// Output of [`solve_viscous_ce`].
#[derive(Clone, Debug)]
pub struct CESolution<T> {
    pub config: CeConfig,
    /// Effective time step T / steps.
    pub dt: f64,
    pub steps: usize,
    /// Times of the stored fields.
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField<T>>,
    /// Per-step monitors at t_n = n·dt, n = 0..=steps.
    pub step_times: Vec<f64>,
    pub mass: Vec<f64>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub linf: Vec<f64>,
    /// ‖(div b_t)⁻‖_∞ at each step time.
    pub div_negative_sup: Vec<f64>,
    /// Mesh width used in tolerance budgets.
    pub h: f64,
}

impl<T: Real> CESolution<T> {
    pub fn initial(&self) -> &ScalarField<T> {
        &self.fields[0]
    }

    pub fn last(&self) -> &ScalarField<T> {
        self.fields.last().expect("solution holds at least the initial field")
    }

    /// Largest relative mass drift |∫u_t − ∫ū| / ∫|ū|.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        let scale = self.l1[0].max(f64::MIN_POSITIVE);
        self.mass.iter().map(|m| (m - m0).abs() / scale).fold(0.0, f64::max)
    }
}

/// Guard conductances from the transport part: the smallest symmetric
/// diffusion that makes every off-diagonal entry of A* + G nonnegative.
pub(crate) fn positivity_guard<T: Real>(space: &Space<T>, transport: &Csr<T>) -> Csr<T> {
    let m = space.measure();
    let mut cond = std::collections::BTreeMap::new();
    for (i, j, v) in transport.triplets() {
        if i == j {
            continue;
        }
        let c = -m[i] * v;
        if c > T::zero() {
            let key = (i.min(j), i.max(j));
            let e = cond.entry(key).or_insert(T::zero());
            *e = (*e).max(c);
        }
    }
    let mut triplets = Vec::with_capacity(4 * cond.len());
    for ((i, j), c) in cond {
        triplets.push((i, j, c / m[i]));
        triplets.push((j, i, c / m[j]));
        triplets.push((i, i, -c / m[i]));
        triplets.push((j, j, -c / m[j]));
    }
    Csr::from_triplets(space.len(), space.len(), triplets)
}

struct StepOperator<T> {
    f: Csr<T>,
    transport_velocity: f64,
}

fn step_operator<T: Real>(space: &Space<T>, b: &Derivation<T>, t: T, cfg: &CeConfig) -> Result<StepOperator<T>> {
    let a = b.operator(space, t)?;
    let transport = a.weighted_adjoint(space.measure());
    let mut f = transport.clone();
    if cfg.sigma > 0.0 {
        f = f.add_scaled(space.generator(), T::of(cfg.sigma));
    }
    if cfg.positivity_guard {
        f = f.add_scaled(&positivity_guard(space, &transport), T::one());
    }
    let vel = b.velocity(space, t)?;
    let mut vmax = 0.0_f64;
    for (ax, comp) in space.axes().iter().zip(&vel) {
        let h = ax.spacing.to64();
        for v in comp {
            vmax = vmax.max(v.to64().abs() / h);
        }
    }
    Ok(StepOperator { f, transport_velocity: vmax })
}

fn check_cfl<T: Real>(space: &Space<T>, cfg: &CeConfig, dt: f64, op: &StepOperator<T>) -> Result<()> {
    if cfg.theta >= 1.0 {
        return Ok(());
    }
    if op.transport_velocity > 0.0 && dt * op.transport_velocity > COURANT_LIMIT {
        let limit = COURANT_LIMIT / op.transport_velocity;
        return Err(Error::Cfl { dt, limit, suggested: 0.9 * limit });
    }
    if cfg.theta == 0.0 && cfg.sigma > 0.0 {
        let stiff: f64 = space.axes().iter().map(|a| 2.0 / a.spacing.to64().powi(2)).sum::<f64>() * cfg.sigma;
        if dt * stiff > 1.0 {
            let limit = 1.0 / stiff;
            return Err(Error::Cfl { dt, limit, suggested: 0.9 * limit });
        }
    }
    Ok(())
}

fn system<T: Real>(f: &Csr<T>, theta: T, dt: T, n: usize) -> Csr<T> {
    Csr::identity(n).add_scaled(f, -theta * dt)
}

/// Solves the viscous continuity equation with initial datum `u0`.
pub fn solve_viscous_ce<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    u0: &ScalarField<T>,
    cfg: &CeConfig,
) -> Result<CESolution<T>> {
    space.check(u0)?;
    let steps = cfg.validate()?;
    let dt = cfg.t_end / steps as f64;
    let (dt_t, theta) = (T::of(dt), T::of(cfg.theta));
    let n = space.len();
    let dependent = b.is_time_dependent();
    let limit = if dependent { TIME_DEPENDENT_DIRECT_LIMIT } else { crate::numeric::DIRECT_SOLVE_LIMIT };

    let frozen: Option<(StepOperator<T>, Option<SparseSolver<T>>)> = if dependent {
        None
    } else {
        let op = step_operator(space, b, T::zero(), cfg)?;
        check_cfl(space, cfg, dt, &op)?;
        let solver = if cfg.theta > 0.0 {
            Some(SparseSolver::with_direct_limit(system(&op.f, theta, dt_t, n), limit)?)
        } else {
            None
        };
        Some((op, solver))
    };

    let div_sup = |t: T| -> Result<f64> {
        let d = b.divergence(space, t)?;
        Ok(d.values().iter().fold(0.0_f64, |m, v| m.max((-v.to64()).max(0.0))))
    };
    let mut sol = CESolution {
        config: cfg.clone(),
        dt,
        steps,
        times: vec![0.0],
        fields: vec![u0.clone()],
        step_times: Vec::with_capacity(steps + 1),
        mass: Vec::with_capacity(steps + 1),
        l1: Vec::with_capacity(steps + 1),
        l2: Vec::with_capacity(steps + 1),
        linf: Vec::with_capacity(steps + 1),
        div_negative_sup: Vec::with_capacity(steps + 1),
        h: space.max_spacing().to64(),
    };
    let constant_div = if dependent { None } else { Some(div_sup(T::zero())?) };
    let record = |sol: &mut CESolution<T>, t: f64, u: &ScalarField<T>| -> Result<()> {
        if !u.is_finite() {
            return Err(Error::numerical("continuity solve", format!("non-finite field at t = {t:.6}")));
        }
        sol.step_times.push(t);
        sol.mass.push(space.integrate(u).to64());
        sol.l1.push(lp_norm(space, u, T::one())?.to64());
        sol.l2.push(lp_norm(space, u, T::of(2.0))?.to64());
        sol.linf.push(u.max_abs().to64());
        sol.div_negative_sup.push(match constant_div {
            Some(d) => d,
            None => div_sup(T::of(t))?,
        });
        Ok(())
    };
    record(&mut sol, 0.0, u0)?;

    let mut u = u0.values().to_vec();
    for k in 0..steps {
        let t_mid = T::of((k as f64 + 0.5) * dt);
        let owned;
        let (op, solver) = match &frozen {
            Some((op, s)) => (op, s.as_ref()),
            None => {
                let op = step_operator(space, b, t_mid, cfg)?;
                check_cfl(space, cfg, dt, &op)?;
                let s = if cfg.theta > 0.0 {
                    Some(SparseSolver::with_direct_limit(system(&op.f, theta, dt_t, n), limit)?)
                } else {
                    None
                };
                owned = (op, s);
                (&owned.0, owned.1.as_ref())
            }
        };
        let fu = op.f.mul_vec(&u);
        let explicit = (T::one() - theta) * dt_t;
        let rhs: Vec<T> = u.iter().zip(&fu).map(|(&x, &y)| x + explicit * y).collect();
        u = match solver {
            Some(s) => s.solve(&rhs)?,
            None => rhs,
        };
        let t = (k + 1) as f64 * dt;
        let field = space.wrap(u.clone());
        record(&mut sol, t, &field)?;
        if (k + 1) % cfg.store_every == 0 || k + 1 == steps {
            sol.times.push(t);
            sol.fields.push(field);
        }
    }
    Ok(sol)
}
