//! Derivations b: linear first-order operators f ↦ df(b) with zero action on
//! constants, and their divergence defined by discrete m-adjointness.
//!
//! Vector derivations act through the skew-symmetrised centred form
//!
//! ```text
//! A = ½ (A_c − A_c* − diag(div_c b)),   A_c = Σ_a diag(b^a) D_a
//! ```
//!
//! which is a second-order approximation of b·∇ with the same divergence as
//! A_c and satisfies A* = −A − diag(div b) exactly. The plain centred action
//! is available through [`Derivation::apply_centered`].

use std::borrow::Cow;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::numeric::Csr;
use crate::scalar::Real;
use crate::space::{ScalarField, Space, SpaceId};

use super::gamma::gamma_raw;

/// Coefficients b^a(t) indexed as `[axis][node]`.
pub type CoefficientFn<T> = Arc<dyn Fn(T) -> Vec<Vec<T>> + Send + Sync>;

#[derive(Clone)]
enum Kind<T> {
    Vector(Vec<Vec<T>>),
    TimeDependent(CoefficientFn<T>),
    Gradient(Vec<T>),
    Scaled { factor: Vec<T>, inner: Box<Derivation<T>> },
}

#[derive(Clone)]
pub struct Derivation<T> {
    space: SpaceId,
    kind: Kind<T>,
    operator: OnceLock<Csr<T>>,
    divergence: OnceLock<Vec<T>>,
}

impl<T> fmt::Debug for Derivation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Vector(_) => "vector",
            Kind::TimeDependent(_) => "time-dependent",
            Kind::Gradient(_) => "gradient",
            Kind::Scaled { .. } => "scaled",
        };
        f.debug_struct("Derivation").field("space", &self.space).field("kind", &kind).finish()
    }
}

impl<T: Real> Derivation<T> {
    fn new(space: SpaceId, kind: Kind<T>) -> Self {
        Derivation { space, kind, operator: OnceLock::new(), divergence: OnceLock::new() }
    }

    /// Derivation with the given coefficient field per axis.
    pub fn vector(space: &Space<T>, coeffs: Vec<ScalarField<T>>) -> Result<Self> {
        if coeffs.len() != space.dimension() {
            return Err(Error::domain(format!("{} coefficient fields for a {}-dimensional space", coeffs.len(), space.dimension())));
        }
        for c in &coeffs {
            space.check(c)?;
        }
        Ok(Self::new(space.id(), Kind::Vector(coeffs.into_iter().map(|c| c.into_values()).collect())))
    }

    /// Vector derivation from a coefficient function of the node coordinates.
    pub fn from_fn(space: &Space<T>, b: impl Fn(&[T]) -> Vec<T>) -> Result<Self> {
        let d = space.dimension();
        let mut coeffs = vec![Vec::with_capacity(space.len()); d];
        for k in 0..space.len() {
            let v = b(&space.coords(k));
            if v.len() != d {
                return Err(Error::domain(format!("coefficient function returned {} components, expected {d}", v.len())));
            }
            for (a, x) in v.into_iter().enumerate() {
                coeffs[a].push(x);
            }
        }
        if coeffs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite derivation coefficients"));
        }
        Ok(Self::new(space.id(), Kind::Vector(coeffs)))
    }

    /// Time-dependent vector derivation; `b(t)` returns coefficients `[axis][node]`.
    pub fn time_dependent(space: &Space<T>, b: impl Fn(T) -> Vec<Vec<T>> + Send + Sync + 'static) -> Self {
        Self::new(space.id(), Kind::TimeDependent(Arc::new(b)))
    }

    /// Gradient derivation b_V: df(b_V) = Γ(V, f).
    pub fn gradient(space: &Space<T>, v: &ScalarField<T>) -> Result<Self> {
        space.check(v)?;
        Ok(Self::new(space.id(), Kind::Gradient(v.values().to_vec())))
    }

    pub fn zero(space: &Space<T>) -> Self {
        Self::new(space.id(), Kind::Vector(vec![vec![T::zero(); space.len()]; space.dimension()]))
    }

    /// The derivation u·b: d f(u b) = u df(b).
    pub fn scaled(&self, space: &Space<T>, u: &ScalarField<T>) -> Result<Self> {
        space.check(u)?;
        self.ensure_space(space)?;
        Ok(Self::new(space.id(), Kind::Scaled { factor: u.values().to_vec(), inner: Box::new(self.clone()) }))
    }

    /// Constant multiple c·b.
    pub fn times(&self, c: T) -> Self {
        let kind = match &self.kind {
            Kind::Vector(v) => Kind::Vector(v.iter().map(|a| a.iter().map(|&x| c * x).collect()).collect()),
            Kind::Gradient(v) => {
                let n = v.len();
                Kind::Scaled { factor: vec![c; n], inner: Box::new(self.clone()) }
            }
            Kind::TimeDependent(f) => {
                let f = f.clone();
                Kind::TimeDependent(Arc::new(move |t| f(t).into_iter().map(|a| a.into_iter().map(|x| c * x).collect()).collect()))
            }
            Kind::Scaled { factor, inner } => Kind::Scaled { factor: factor.iter().map(|&x| c * x).collect(), inner: inner.clone() },
        };
        Self::new(self.space, kind)
    }

    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn is_time_dependent(&self) -> bool {
        match &self.kind {
            Kind::TimeDependent(_) => true,
            Kind::Scaled { inner, .. } => inner.is_time_dependent(),
            _ => false,
        }
    }

    pub fn is_gradient(&self) -> bool {
        matches!(self.kind, Kind::Gradient(_))
    }

    fn ensure_space(&self, space: &Space<T>) -> Result<()> {
        if space.id() != self.space {
            return Err(Error::domain("derivation belongs to a different space"));
        }
        Ok(())
    }

    fn time_coefficients(&self, space: &Space<T>, f: &CoefficientFn<T>, t: T) -> Result<Vec<Vec<T>>> {
        let c = f(t);
        if c.len() != space.dimension() || c.iter().any(|a| a.len() != space.len()) {
            return Err(Error::domain("time-dependent coefficients have the wrong shape"));
        }
        if c.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::numerical("derivation coefficients", format!("non-finite value at t = {t}")));
        }
        Ok(c)
    }

    /// Sparse matrix A of f ↦ df(b) at time t.
    pub fn operator(&self, space: &Space<T>, t: T) -> Result<Cow<'_, Csr<T>>> {
        self.ensure_space(space)?;
        if !self.is_time_dependent() {
            if let Some(op) = self.operator.get() {
                return Ok(Cow::Borrowed(op));
            }
            let op = self.build_operator(space, t)?;
            return Ok(Cow::Borrowed(self.operator.get_or_init(|| op)));
        }
        Ok(Cow::Owned(self.build_operator(space, t)?))
    }

    fn build_operator(&self, space: &Space<T>, t: T) -> Result<Csr<T>> {
        Ok(match &self.kind {
            Kind::Vector(c) => split_operator(space, c),
            Kind::TimeDependent(f) => split_operator(space, &self.time_coefficients(space, f, t)?),
            Kind::Gradient(v) => gradient_operator(space, v),
            Kind::Scaled { factor, inner } => inner.operator(space, t)?.scale_rows(factor),
        })
    }

    /// df(b) at time t.
    pub fn apply(&self, space: &Space<T>, f: &ScalarField<T>, t: T) -> Result<ScalarField<T>> {
        space.check(f)?;
        if let Kind::Gradient(v) = &self.kind {
            self.ensure_space(space)?;
            return Ok(space.wrap(gamma_raw(space, v, f.values())));
        }
        Ok(space.wrap(self.operator(space, t)?.mul_vec(f.values())))
    }

    /// Plain centred-difference action Σ_a b^a D_a f using the velocity field.
    pub fn apply_centered(&self, space: &Space<T>, f: &ScalarField<T>, t: T) -> Result<ScalarField<T>> {
        space.check(f)?;
        let v = self.velocity(space, t)?;
        Ok(space.wrap(centered_operator(space, &v).mul_vec(f.values())))
    }

    /// div b: the unique field with ∫df(b) dm = −∫f div b dm, i.e. −A*1.
    pub fn divergence(&self, space: &Space<T>, t: T) -> Result<ScalarField<T>> {
        self.ensure_space(space)?;
        if !self.is_time_dependent() {
            if let Some(d) = self.divergence.get() {
                return Ok(space.wrap(d.clone()));
            }
        }
        let d = match &self.kind {
            Kind::Gradient(v) => space.generator().mul_vec(v),
            _ => adjoint_divergence(space, self.operator(space, t)?.as_ref()),
        };
        if !self.is_time_dependent() {
            let _ = self.divergence.set(d.clone());
        }
        Ok(space.wrap(d))
    }

    /// Coefficient vector field per axis, in velocity units.
    ///
    /// For gradient derivations this is ½ Σ_± L_{i,i±}(V_{i±} − V_i)(±h), the
    /// centred reconstruction of ∇V from the Γ(V, ·) stencil.
    pub fn velocity(&self, space: &Space<T>, t: T) -> Result<Vec<Vec<T>>> {
        self.ensure_space(space)?;
        Ok(match &self.kind {
            Kind::Vector(c) => c.clone(),
            Kind::TimeDependent(f) => self.time_coefficients(space, f, t)?,
            Kind::Gradient(v) => {
                let l = space.generator();
                let half = T::of(0.5);
                (0..space.dimension())
                    .map(|a| {
                        let h = space.axes()[a].spacing;
                        (0..space.len())
                            .map(|k| {
                                let mut s = T::zero();
                                if let Some(j) = space.neighbor(k, a, true) {
                                    s = s + l.get(k, j) * (v[j] - v[k]) * h;
                                }
                                if let Some(j) = space.neighbor(k, a, false) {
                                    s = s - l.get(k, j) * (v[j] - v[k]) * h;
                                }
                                half * s
                            })
                            .collect()
                    })
                    .collect()
            }
            Kind::Scaled { factor, inner } => inner
                .velocity(space, t)?
                .into_iter()
                .map(|a| a.into_iter().zip(factor).map(|(x, &u)| x * u).collect())
                .collect(),
        })
    }

    /// Pointwise |b|: Euclidean norm of the coefficients, √Γ(V) for b_V.
    pub fn pointwise_norm(&self, space: &Space<T>, t: T) -> Result<ScalarField<T>> {
        self.ensure_space(space)?;
        Ok(match &self.kind {
            Kind::Gradient(v) => space.wrap(gamma_raw(space, v, v).into_iter().map(|g| g.max(T::zero()).sqrt()).collect()),
            Kind::Scaled { factor, inner } => {
                inner.pointwise_norm(space, t)?.zip_map(&space.wrap(factor.clone()), |a, u| a * u.abs())
            }
            _ => {
                let v = self.velocity(space, t)?;
                space.wrap((0..space.len()).map(|k| v.iter().map(|a| a[k] * a[k]).fold(T::zero(), |s, x| s + x).sqrt()).collect())
            }
        })
    }
}

/// A_c = Σ_a diag(b^a) D_a with centred differences; a missing Neumann
/// neighbour is replaced by the node itself (zero-flux ghost).
pub(crate) fn centered_operator<T: Real>(space: &Space<T>, coeffs: &[Vec<T>]) -> Csr<T> {
    let mut triplets = Vec::with_capacity(space.len() * 2 * space.dimension());
    for (a, b) in coeffs.iter().enumerate() {
        let h2 = T::of(2.0) * space.axes()[a].spacing;
        for k in 0..space.len() {
            let c = b[k] / h2;
            if c == T::zero() {
                continue;
            }
            let jp = space.neighbor(k, a, true).unwrap_or(k);
            let jm = space.neighbor(k, a, false).unwrap_or(k);
            triplets.push((k, jp, c));
            triplets.push((k, jm, -c));
        }
    }
    Csr::from_triplets(space.len(), space.len(), triplets)
}

fn split_operator<T: Real>(space: &Space<T>, coeffs: &[Vec<T>]) -> Csr<T> {
    let ac = centered_operator(space, coeffs);
    let adj = ac.weighted_adjoint(space.measure());
    let div: Vec<T> = adj.row_sums().into_iter().map(|s| -s).collect();
    ac.add_scaled(&adj, -T::one()).add_scaled(&Csr::diagonal(&div), -T::one()).scale(T::of(0.5))
}

fn gradient_operator<T: Real>(space: &Space<T>, v: &[T]) -> Csr<T> {
    let l = space.generator();
    let half = T::of(0.5);
    let mut triplets = Vec::with_capacity(l.nnz());
    for i in 0..space.len() {
        let mut diag = T::zero();
        for (j, lij) in l.row(i) {
            if j != i {
                let c = half * lij * (v[j] - v[i]);
                triplets.push((i, j, c));
                diag = diag - c;
            }
        }
        triplets.push((i, i, diag));
    }
    Csr::from_triplets(space.len(), space.len(), triplets)
}

/// −A*1 with A* = M⁻¹AᵀM.
pub(crate) fn adjoint_divergence<T: Real>(space: &Space<T>, a: &Csr<T>) -> Vec<T> {
    a.weighted_adjoint(space.measure()).row_sums().into_iter().map(|s| -s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, GridSpec, Potential};
    use std::f64::consts::PI;

    fn torus(n: usize) -> Space<f64> {
        build_space(&GridSpec::torus_1d(2.0 * PI, n), &vec![0.0; n]).unwrap()
    }

    fn ou(n: usize) -> Space<f64> {
        Potential::Quadratic { c: 1.0 }.build_space(&GridSpec::interval_1d(-6.0, 6.0, n)).unwrap()
    }

    fn max_err(a: &ScalarField<f64>, s: &Space<f64>, f: impl Fn(f64) -> f64, core: f64) -> f64 {
        a.values()
            .iter()
            .enumerate()
            .filter(|(k, _)| s.coords(*k)[0].abs() <= core)
            .map(|(k, v)| (v - f(s.coords(k)[0])).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constants_are_annihilated_and_adjointness_is_exact() {
        let s = ou(128);
        let b = Derivation::from_fn(&s, |x| vec![x[0].sin() + 0.3]).unwrap();
        assert!(b.apply(&s, &s.constant(2.0), 0.0).unwrap().max_abs() < 1e-12);
        let div = b.divergence(&s, 0.0).unwrap();
        let f = s.field_fn(|x| (0.7 * x[0]).cos() + x[0]);
        let lhs = s.integrate(&b.apply(&s, &f, 0.0).unwrap());
        let rhs = -s.inner(&f, &div);
        assert!((lhs - rhs).abs() < 1e-10 * (lhs.abs() + 1.0), "{lhs} {rhs}");
    }

    #[test]
    fn split_form_adjoint_identity() {
        let s = Potential::Cosine { a: 0.4 }.build_space::<f64>(&GridSpec::torus_1d(2.0 * PI, 40)).unwrap();
        let b = Derivation::from_fn(&s, |x| vec![x[0].cos() + 0.5]).unwrap();
        let a = b.operator(&s, 0.0).unwrap().into_owned();
        let adj = a.weighted_adjoint(s.measure());
        let div = b.divergence(&s, 0.0).unwrap();
        let rhs = a.scale(-1.0).add_scaled(&Csr::diagonal(div.values()), -1.0);
        for (i, j, v) in adj.triplets() {
            assert!((v - rhs.get(i, j)).abs() < 1e-12, "{i} {j}");
        }
    }

    #[test]
    fn sine_coefficient_action_and_divergence_on_torus() {
        let n = 256;
        let s = torus(n);
        let b = Derivation::from_fn(&s, |x| vec![x[0].sin()]).unwrap();
        let f = s.field_fn(|x| x[0].cos());
        let h = 2.0 * PI / n as f64;
        let act = b.apply(&s, &f, 0.0).unwrap();
        assert!(max_err(&act, &s, |x| -x.sin().powi(2), 10.0) < 2.0 * h * h);
        let div = b.divergence(&s, 0.0).unwrap();
        assert!(max_err(&div, &s, |x| x.cos(), 10.0) < h * h);
        let c = Derivation::from_fn(&s, |_| vec![1.7]).unwrap();
        assert!(c.divergence(&s, 0.0).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn unit_coefficient_divergence_on_ou() {
        let s = ou(512);
        let b = Derivation::from_fn(&s, |_| vec![1.0]).unwrap();
        let div = b.divergence(&s, 0.0).unwrap();
        let h = 12.0 / 512.0;
        assert!(max_err(&div, &s, |x| -x, 3.0) < 4.0 * h * h);
    }

    #[test]
    fn gradient_derivation_properties() {
        let s = ou(512);
        let v = s.field_fn(|x| 0.5 * x[0] * x[0]);
        let b = Derivation::gradient(&s, &v).unwrap();
        let div = b.divergence(&s, 0.0).unwrap();
        let lap = s.laplacian(&v);
        assert_eq!(div, lap);
        // Also via adjointness.
        let op = b.operator(&s, 0.0).unwrap();
        let via_adj = adjoint_divergence(&s, &op);
        for (a, c) in via_adj.iter().zip(lap.values()) {
            assert!((a - c).abs() < 1e-9 * (1.0 + c.abs()));
        }
        let f = s.field_fn(|x| (0.8 * x[0]).sin());
        let act = b.apply(&s, &f, 0.0).unwrap();
        let h = 12.0 / 512.0;
        assert!(max_err(&act, &s, |x| x * 0.8 * (0.8 * x).cos(), 3.0) < 2.0 * h * h * 3.0);
        let self_act = b.apply(&s, &v, 0.0).unwrap();
        assert!(self_act.min() >= -1e-12);
        let zero = Derivation::gradient(&s, &s.constant(3.0)).unwrap();
        assert_eq!(zero.apply(&s, &f, 0.0).unwrap().max_abs(), 0.0);
        let vel = b.velocity(&s, 0.0).unwrap();
        let e = max_err(&s.wrap(vel[0].clone()), &s, |x| x, 3.0);
        assert!(e < 4.0 * h * h, "{e}");
    }

    #[test]
    fn scaled_divergence_identity() {
        let s = ou(96);
        let b = Derivation::from_fn(&s, |x| vec![x[0].cos()]).unwrap();
        let u = s.field_fn(|x| 1.0 + 0.5 * x[0].sin());
        let ub = b.scaled(&s, &u).unwrap();
        let want = b.apply(&s, &u, 0.0).unwrap().add(&u.mul(&b.divergence(&s, 0.0).unwrap()));
        let got = ub.divergence(&s, 0.0).unwrap();
        for (a, c) in got.values().iter().zip(want.values()) {
            assert!((a - c).abs() < 1e-10 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn mismatched_space_is_rejected() {
        let a = torus(8);
        let c = torus(8);
        let b = Derivation::zero(&a);
        assert!(matches!(b.apply(&c, &c.constant(1.0), 0.0), Err(Error::Domain(_))));
        assert!(b.apply(&a, &c.constant(1.0), 0.0).is_err());
    }
}
