//! Discretised weighted spaces (X, d, m): grid geometry, node measure, the
//! flux-form weighted Laplacian and its spectral heat semigroup.
//!
//! On an axis with spacing h the generator reads
//!
//! ```text
//! (Δf)_i = 1/(w_i h²) Σ_{j~i} w_{ij} (f_j − f_i),   w_i = e^{-V_i},  w_{ij} = e^{-(V_i+V_j)/2}
//! ```
//!
//! which is self-adjoint for m_i = w_i · cellvolume and has zero row sums.
//! The semigroup is evaluated exactly through the eigenpairs of
//! S = M^{1/2} Δ M^{-1/2}.

mod analyticity;
mod field;
mod grid;
pub mod manifest;
mod norms;
mod potential;
mod spectrum;

use std::sync::atomic::{AtomicU64, Ordering};

pub use analyticity::{analyticity_constant, AnalyticityReport};
pub use field::{ScalarField, SpaceId};
pub use grid::{Boundary, Domain, GridSpec};
pub use norms::{lp_norm, lp_sum_norm};
pub use potential::Potential;
pub use spectrum::{DenseSpectrum, Spectrum};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, symmetric_eigen, Csr};
use crate::scalar::Real;

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

/// Largest node count for which a dense eigendecomposition is attempted.
pub const DENSE_SPECTRUM_LIMIT: usize = 4096;

/// One grid axis.
#[derive(Clone, Debug)]
pub struct Axis<T> {
    pub nodes: usize,
    pub spacing: T,
    pub periodic: bool,
    /// Left end of the interval, or the torus origin.
    pub start: T,
    pub length: T,
}

impl<T: Real> Axis<T> {
    fn new(domain: &Domain, nodes: usize) -> Self {
        match *domain {
            Domain::Interval { a, b } => Axis {
                nodes,
                spacing: T::of((b - a) / nodes as f64),
                periodic: false,
                start: T::of(a),
                length: T::of(b - a),
            },
            Domain::Torus { period, origin } => Axis {
                nodes,
                spacing: T::of(period / nodes as f64),
                periodic: true,
                start: T::of(origin),
                length: T::of(period),
            },
        }
    }

    pub fn coord(&self, i: usize) -> T {
        let i = T::of_usize(i);
        if self.periodic {
            self.start + i * self.spacing
        } else {
            self.start + (i + T::of(0.5)) * self.spacing
        }
    }

    pub fn coords(&self) -> Vec<T> {
        (0..self.nodes).map(|i| self.coord(i)).collect()
    }

    /// Index of the neighbour in direction `+1`/`-1`, wrapping on tori.
    pub fn neighbor(&self, i: usize, forward: bool) -> Option<usize> {
        match (forward, self.periodic) {
            (true, true) => Some((i + 1) % self.nodes),
            (false, true) => Some((i + self.nodes - 1) % self.nodes),
            (true, false) => (i + 1 < self.nodes).then_some(i + 1),
            (false, false) => i.checked_sub(1),
        }
    }

    pub fn end(&self) -> T {
        self.start + self.length
    }
}

/// A discretised weighted metric measure space. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Space<T> {
    id: SpaceId,
    spec: GridSpec,
    axes: Vec<Axis<T>>,
    potential: Vec<T>,
    density: Vec<T>,
    measure: Vec<T>,
    generator: Csr<T>,
    spectrum: Spectrum<T>,
}

/// Builds the space for node-wise potential values (x fastest in 2D).
pub fn build_space<T: Real>(spec: &GridSpec, potential: &[T]) -> Result<Space<T>> {
    Space::build(spec, potential)
}

impl<T: Real> Space<T> {
    pub fn build(spec: &GridSpec, potential: &[T]) -> Result<Self> {
        let parts = Parts::assemble(spec, potential)?;
        let spectrum = compute_spectrum(&parts.axes, potential, &parts.generator, &parts.measure)?;
        Ok(parts.finish(spec, potential, spectrum))
    }

    /// Builds with the potential given as a function of node coordinates.
    pub fn from_fn(spec: &GridSpec, potential: impl Fn(&[T]) -> T) -> Result<Self> {
        spec.validate()?;
        let axes: Vec<Axis<T>> = spec.domain.iter().map(|d| Axis::new(d, spec.nodes_per_axis)).collect();
        let values: Vec<T> = (0..spec.node_count()).map(|k| potential(&coords_of(&axes, k))).collect();
        Self::build(spec, &values)
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    pub fn potential(&self) -> &[T] {
        &self.potential
    }

    /// e^{-V} at nodes.
    pub fn density(&self) -> &[T] {
        &self.density
    }

    pub fn measure(&self) -> &[T] {
        &self.measure
    }

    pub fn total_mass(&self) -> T {
        compensated_sum(self.measure.iter().copied())
    }

    pub fn generator(&self) -> &Csr<T> {
        &self.generator
    }

    pub fn spectrum(&self) -> &Spectrum<T> {
        &self.spectrum
    }

    pub fn max_spacing(&self) -> T {
        self.axes.iter().fold(T::zero(), |m, a| m.max(a.spacing))
    }

    pub fn min_spacing(&self) -> T {
        self.axes.iter().fold(T::infinity(), |m, a| m.min(a.spacing))
    }

    /// Coordinates of node `k` (length = dimension).
    pub fn coords(&self, k: usize) -> Vec<T> {
        coords_of(&self.axes, k)
    }

    /// Multi-index of node `k`.
    pub fn index(&self, k: usize) -> Vec<usize> {
        let n = self.spec.nodes_per_axis;
        (0..self.dimension()).map(|a| (k / n.pow(a as u32)) % n).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.spec.nodes_per_axis;
        idx.iter().enumerate().map(|(a, &i)| i * n.pow(a as u32)).sum()
    }

    /// Neighbour of node `k` along `axis` in direction `forward`.
    pub fn neighbor(&self, k: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut idx = self.index(k);
        idx[axis] = self.axes[axis].neighbor(idx[axis], forward)?;
        Some(self.flat_index(&idx))
    }

    pub fn field(&self, values: Vec<T>) -> Result<ScalarField<T>> {
        if values.len() != self.len() {
            return Err(Error::domain(format!("field has {} values, space has {} nodes", values.len(), self.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("field has non-finite values"));
        }
        Ok(ScalarField::from_raw(self.id, values))
    }

    pub fn field_fn(&self, f: impl Fn(&[T]) -> T) -> ScalarField<T> {
        ScalarField::from_raw(self.id, (0..self.len()).map(|k| f(&self.coords(k))).collect())
    }

    pub fn constant(&self, c: T) -> ScalarField<T> {
        ScalarField::from_raw(self.id, vec![c; self.len()])
    }

    pub fn zeros(&self) -> ScalarField<T> {
        self.constant(T::zero())
    }

    pub(crate) fn wrap(&self, values: Vec<T>) -> ScalarField<T> {
        debug_assert_eq!(values.len(), self.len());
        ScalarField::from_raw(self.id, values)
    }

    pub fn check(&self, f: &ScalarField<T>) -> Result<()> {
        f.ensure_same_space(self.id)
    }

    /// ∫ f dm.
    pub fn integrate(&self, f: &ScalarField<T>) -> T {
        compensated_sum(self.measure.iter().zip(&f.values).map(|(&m, &v)| m * v))
    }

    /// ⟨f, g⟩_m.
    pub fn inner(&self, f: &ScalarField<T>, g: &ScalarField<T>) -> T {
        crate::numeric::weighted_dot(&self.measure, &f.values, &g.values)
    }

    /// Δf as a matrix-vector product with the generator.
    pub fn laplacian(&self, f: &ScalarField<T>) -> ScalarField<T> {
        self.wrap(self.generator.mul_vec(&f.values))
    }

    /// P_t f = Σ_k e^{λ_k t} ⟨f, e_k⟩_m e_k.
    pub fn apply_semigroup(&self, f: &ScalarField<T>, t: T) -> Result<ScalarField<T>> {
        if !(t >= T::zero()) {
            return Err(Error::domain(format!("semigroup time must be ≥ 0, got {}", t)));
        }
        self.check(f)?;
        if t == T::zero() {
            return Ok(f.clone());
        }
        Ok(self.spectral_apply(f, |lambda| (lambda * t).exp()))
    }

    /// g(Δ) f for a scalar multiplier g evaluated on the spectrum.
    pub fn spectral_apply(&self, f: &ScalarField<T>, g: impl Fn(T) -> T) -> ScalarField<T> {
        let coeffs = self.spectrum.forward(&f.values);
        self.apply_to_coefficients(&coeffs, g)
    }

    pub fn spectral_coefficients(&self, f: &ScalarField<T>) -> Vec<T> {
        self.spectrum.forward(&f.values)
    }

    pub fn apply_to_coefficients(&self, coeffs: &[T], g: impl Fn(T) -> T) -> ScalarField<T> {
        let lambdas = self.spectrum.eigenvalues();
        let scaled: Vec<T> = coeffs.iter().zip(&lambdas).map(|(&c, &l)| c * g(l)).collect();
        self.wrap(self.spectrum.backward(&scaled))
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        self.spectrum.eigenvalues()
    }

    /// Indices of the eigenvalues sorted by decreasing value (0 first).
    pub fn eigen_order(&self) -> Vec<usize> {
        let vals = self.eigenvalues();
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(std::cmp::Ordering::Equal));
        idx
    }

    pub fn eigenvector(&self, k: usize) -> ScalarField<T> {
        self.wrap(self.spectrum.eigenvector(k))
    }

    /// Structural diagnostics of the generator and spectrum.
    pub fn diagnostics(&self) -> SpaceDiagnostics {
        let l = &self.generator;
        let scale = self.spectral_radius().to64().max(f64::MIN_POSITIVE);
        let mut row_sum_defect: f64 = 0.0;
        for (i, s) in l.row_sums().iter().enumerate() {
            let diag = l.get(i, i).abs().to64().max(f64::MIN_POSITIVE);
            row_sum_defect = row_sum_defect.max(s.abs().to64() / diag);
        }
        let mut symmetry_defect: f64 = 0.0;
        for (i, j, v) in l.triplets() {
            if i == j {
                continue;
            }
            let a = (self.measure[i] * v).to64();
            let b = (self.measure[j] * l.get(j, i)).to64();
            let denom = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
            symmetry_defect = symmetry_defect.max((a - b).abs() / denom);
        }
        let vals = self.eigenvalues();
        let max_eigenvalue = vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.to64()));
        let zero_tol = 1e-10_f64.max(scale * T::eps64() * 64.0);
        let zero_modes = vals.iter().filter(|v| v.to64().abs() <= zero_tol).count();
        SpaceDiagnostics { row_sum_defect, symmetry_defect, max_eigenvalue, zero_modes, spectral_radius: scale }
    }

    pub fn spectral_radius(&self) -> T {
        self.eigenvalues().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

struct Parts<T> {
    axes: Vec<Axis<T>>,
    density: Vec<T>,
    measure: Vec<T>,
    generator: Csr<T>,
}

impl<T: Real> Parts<T> {
    fn assemble(spec: &GridSpec, potential: &[T]) -> Result<Self> {
        spec.validate()?;
        let n = spec.node_count();
        if potential.len() != n {
            return Err(Error::Construction(format!("potential has {} values, grid has {} nodes", potential.len(), n)));
        }
        if let Some(i) = potential.iter().position(|v| !v.is_finite()) {
            return Err(Error::Construction(format!("potential is not finite at node {i}")));
        }
        let axes: Vec<Axis<T>> = spec.domain.iter().map(|d| Axis::new(d, spec.nodes_per_axis)).collect();
        let cell: T = axes.iter().fold(T::one(), |v, a| v * a.spacing);
        let density: Vec<T> = potential.iter().map(|&v| (-v).exp()).collect();
        let measure: Vec<T> = density.iter().map(|&w| w * cell).collect();
        if let Some(i) = measure.iter().position(|m| !(*m > T::zero()) || !m.is_finite()) {
            return Err(Error::Construction(format!("measure underflows or overflows at node {i}")));
        }
        let generator = assemble_generator(&axes, potential, &measure, cell);
        Ok(Parts { axes, density, measure, generator })
    }

    fn finish(self, spec: &GridSpec, potential: &[T], spectrum: Spectrum<T>) -> Space<T> {
        Space {
            id: SpaceId(NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed)),
            spec: spec.clone(),
            axes: self.axes,
            potential: potential.to_vec(),
            density: self.density,
            measure: self.measure,
            generator: self.generator,
            spectrum,
        }
    }
}

/// Results of [`Space::diagnostics`].
#[derive(Clone, Debug, serde::Serialize)]
pub struct SpaceDiagnostics {
    /// max_i |Σ_j L_ij| / |L_ii|.
    pub row_sum_defect: f64,
    /// max relative defect of m_i L_ij = m_j L_ji.
    pub symmetry_defect: f64,
    pub max_eigenvalue: f64,
    pub zero_modes: usize,
    pub spectral_radius: f64,
}

fn coords_of<T: Real>(axes: &[Axis<T>], k: usize) -> Vec<T> {
    let n = axes[0].nodes;
    axes.iter().enumerate().map(|(a, ax)| ax.coord((k / n.pow(a as u32)) % n)).collect()
}

/// Symmetric conductance of the edge (i, j) along an axis of spacing h:
/// e^{-(V_i+V_j)/2} · cell / h².
fn conductance<T: Real>(vi: T, vj: T, cell: T, h: T) -> T {
    (-(vi + vj) * T::of(0.5)).exp() * cell / (h * h)
}

fn assemble_generator<T: Real>(axes: &[Axis<T>], potential: &[T], measure: &[T], cell: T) -> Csr<T> {
    let n_axis = axes[0].nodes;
    let n = measure.len();
    let mut triplets = Vec::with_capacity(n * (1 + 2 * axes.len()));
    for k in 0..n {
        let mut diag = T::zero();
        for (a, ax) in axes.iter().enumerate() {
            let stride = n_axis.pow(a as u32);
            let i = (k / stride) % n_axis;
            for forward in [true, false] {
                if let Some(j) = ax.neighbor(i, forward) {
                    let nb = k - i * stride + j * stride;
                    let c = conductance(potential[k], potential[nb], cell, ax.spacing);
                    let lij = c / measure[k];
                    triplets.push((k, nb, lij));
                    diag = diag - lij;
                }
            }
        }
        triplets.push((k, k, diag));
    }
    Csr::from_triplets(n, n, triplets)
}

fn dense_factor<T: Real>(generator: &Csr<T>, measure: &[T]) -> Result<DenseSpectrum<T>> {
    let n = measure.len();
    if n > DENSE_SPECTRUM_LIMIT {
        return Err(Error::numerical(
            "spectral decomposition",
            format!("{n} nodes exceeds the dense limit {DENSE_SPECTRUM_LIMIT}"),
        ));
    }
    let sqrt_m: Vec<T> = measure.iter().map(|m| m.sqrt()).collect();
    let mut s = vec![T::zero(); n * n];
    for (i, j, v) in generator.triplets() {
        if i == j {
            s[i * n + i] = v;
        } else if i < j {
            // Symmetrise through the conductance to keep S exactly symmetric.
            let cij = measure[i] * v;
            let cji = measure[j] * generator.get(j, i);
            let c = (cij + cji) * T::of(0.5) / (sqrt_m[i] * sqrt_m[j]);
            s[i * n + j] = c;
            s[j * n + i] = c;
        }
    }
    let eig = symmetric_eigen(n, &s).map_err(|e| match e {
        Error::Numerical { context, diagnostics } => {
            let (mn, mx) = measure.iter().fold((T::infinity(), T::zero()), |(a, b), &m| (a.min(m), b.max(m)));
            Error::numerical(
                context,
                format!("{diagnostics}; measure range [{:.3e}, {:.3e}] (ratio {:.3e})", mn.to64(), mx.to64(), (mx / mn).to64()),
            )
        }
        other => other,
    })?;
    Ok(DenseSpectrum { eig, sqrt_m })
}

fn compute_spectrum<T: Real>(
    axes: &[Axis<T>],
    potential: &[T],
    generator: &Csr<T>,
    measure: &[T],
) -> Result<Spectrum<T>> {
    if axes.len() == 2 {
        if let Some((vx, vy)) = separable_split(potential, axes[0].nodes) {
            let mut factors = Vec::with_capacity(2);
            for (a, pot) in [vx, vy].into_iter().enumerate() {
                let ax = vec![axes[a].clone()];
                let cell = ax[0].spacing;
                let m1: Vec<T> = pot.iter().map(|&v| (-v).exp() * cell).collect();
                let g1 = assemble_generator(&ax, &pot, &m1, cell);
                factors.push(dense_factor(&g1, &m1)?);
            }
            return Ok(Spectrum::Tensor(factors));
        }
    }
    Ok(Spectrum::Dense(dense_factor(generator, measure)?))
}

/// Splits V(x, y) = V_x(x) + V_y(y) when the potential is separable.
fn separable_split<T: Real>(potential: &[T], n: usize) -> Option<(Vec<T>, Vec<T>)> {
    let scale = potential.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let tol = scale * T::epsilon() * T::of(64.0);
    let v00 = potential[0];
    for j in 0..n {
        for i in 0..n {
            let d = potential[j * n + i] - potential[i] - potential[j * n] + v00;
            if d.abs() > tol {
                return None;
            }
        }
    }
    let vx: Vec<T> = (0..n).map(|i| potential[i]).collect();
    let vy: Vec<T> = (0..n).map(|j| potential[j * n] - v00).collect();
    Some((vx, vy))
}
