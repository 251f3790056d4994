//! Probe families: finite stand-ins for the algebra of test functions,
//! normalised so that ‖√Γ(f)‖_∞ = 1.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::gamma::gamma_raw;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{ScalarField, Space};

/// Heat time used to regularise white noise probes.
pub const NOISE_TIME: f64 = 0.05;

/// How a family was generated.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ProbeRecipe {
    pub modes: usize,
    pub noise_fields: usize,
    pub noise_time: f64,
    pub eigenvectors: usize,
    pub custom: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ProbeFamily<T> {
    fields: Vec<ScalarField<T>>,
    recipe: ProbeRecipe,
}

/// Probabilists' Hermite polynomial He_k(z).
fn hermite(k: usize, z: f64) -> f64 {
    let (mut a, mut b) = (1.0, z);
    if k == 0 {
        return a;
    }
    for j in 1..k {
        let c = z * b - j as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// Rescales f so that max √Γ(f) = 1; `None` when f has no gradient.
fn normalise<T: Real>(space: &Space<T>, f: Vec<T>) -> Option<ScalarField<T>> {
    let g = gamma_raw(space, &f, &f);
    let top = g.iter().fold(T::zero(), |m, v| m.max(*v)).sqrt();
    if !(top > T::zero()) || !top.is_finite() {
        return None;
    }
    Some(space.wrap(f.into_iter().map(|v| v / top).collect()))
}

impl<T: Real> ProbeFamily<T> {
    /// 16 trigonometric / Hermite modes and 16 heat-regularised noise fields
    /// P_{0.05}(white noise) drawn from a ChaCha8 stream seeded with `seed`.
    pub fn standard(space: &Space<T>, seed: u64) -> Result<Self> {
        Self::generate(space, seed, 16)
    }

    pub fn generate(space: &Space<T>, seed: u64, noise_fields: usize) -> Result<Self> {
        let mut fields = Vec::new();
        for f in modes(space) {
            if let Some(p) = normalise(space, f) {
                fields.push(p);
            }
        }
        let modes = fields.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..noise_fields {
            let white: Vec<T> = (0..space.len()).map(|_| T::of(StandardNormal.sample(&mut rng))).collect();
            let smooth = space.apply_semigroup(&space.wrap(white), T::of(NOISE_TIME))?;
            if let Some(p) = normalise(space, smooth.into_values()) {
                fields.push(p);
            }
        }
        let recipe = ProbeRecipe { modes, noise_fields: fields.len() - modes, noise_time: NOISE_TIME, seed, ..Default::default() };
        Ok(ProbeFamily { fields, recipe })
    }

    /// Normalises user-provided fields; fields without gradient are dropped.
    pub fn from_fields(space: &Space<T>, fields: Vec<ScalarField<T>>) -> Result<Self> {
        let mut out = Vec::with_capacity(fields.len());
        for f in fields {
            space.check(&f)?;
            if let Some(p) = normalise(space, f.into_values()) {
                out.push(p);
            }
        }
        if out.is_empty() {
            return Err(Error::domain("probe family is empty after removing constant fields"));
        }
        let recipe = ProbeRecipe { custom: out.len(), ..Default::default() };
        Ok(ProbeFamily { fields: out, recipe })
    }

    /// Adds the `count` slowest non-constant eigenvectors of the generator.
    pub fn with_eigenvectors(mut self, space: &Space<T>, count: usize) -> Self {
        let vals = space.eigenvalues();
        let scale = space.spectral_radius().to64().max(1.0);
        let mut added = 0;
        for k in space.eigen_order() {
            if added == count {
                break;
            }
            if vals[k].to64().abs() <= 1e-9 * scale {
                continue;
            }
            if let Some(p) = normalise(space, space.eigenvector(k).into_values()) {
                self.fields.push(p);
                added += 1;
            }
        }
        self.recipe.eigenvectors += added;
        self
    }

    pub fn fields(&self) -> &[ScalarField<T>] {
        &self.fields
    }

    pub fn recipe(&self) -> &ProbeRecipe {
        &self.recipe
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

fn modes<T: Real>(space: &Space<T>) -> Vec<Vec<T>> {
    let axes = space.axes();
    let coords: Vec<Vec<f64>> = (0..space.len()).map(|k| space.coords(k).iter().map(|v| v.to64()).collect()).collect();
    let eval = |f: &dyn Fn(&[f64]) -> f64| -> Vec<T> { coords.iter().map(|x| T::of(f(x))).collect() };
    // Phase variable per axis: 2π-periodic on tori, [0, π] on intervals.
    let phase: Vec<(f64, f64, bool)> = axes
        .iter()
        .map(|a| {
            let (s, l) = (a.start.to64(), a.length.to64());
            if a.periodic {
                (s, 2.0 * std::f64::consts::PI / l, true)
            } else {
                (s, std::f64::consts::PI / l, false)
            }
        })
        .collect();
    let theta = |x: &[f64], a: usize| (x[a] - phase[a].0) * phase[a].1;
    // Hermite variable: the interval mapped onto [−6, 6].
    let z = |x: &[f64], a: usize| (x[a] - axes[a].start.to64()) / axes[a].length.to64() * 12.0 - 6.0;
    let mut out = Vec::new();
    if axes.len() == 1 {
        if phase[0].2 {
            for k in 1..=8 {
                let k = k as f64;
                out.push(eval(&|x| (k * theta(x, 0)).sin()));
                out.push(eval(&|x| (k * theta(x, 0)).cos()));
            }
        } else {
            for k in 1..=8 {
                let kf = k as f64;
                out.push(eval(&|x| (kf * theta(x, 0)).cos()));
                out.push(eval(&|x| hermite(k, z(x, 0))));
            }
        }
    } else {
        let pairs: [(i32, i32); 8] = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 0), (0, 2), (2, 1), (1, 2)];
        let hermite_pairs: [(usize, usize); 8] = [(1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (2, 2)];
        for ((k1, k2), (i, j)) in pairs.into_iter().zip(hermite_pairs) {
            let (k1, k2) = (k1 as f64, k2 as f64);
            if phase[0].2 && phase[1].2 {
                out.push(eval(&|x| (k1 * theta(x, 0) + k2 * theta(x, 1)).sin()));
                out.push(eval(&|x| (k1 * theta(x, 0) + k2 * theta(x, 1)).cos()));
            } else {
                let (a, b) = (i as f64, j as f64);
                out.push(eval(&|x| (a * theta(x, 0)).cos() * (b * theta(x, 1)).cos()));
                out.push(eval(&|x| hermite(i, z(x, 0)) * hermite(j, z(x, 1))));
            }
        }
    }
    out
}
