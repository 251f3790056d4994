//! Particle ensembles driven by RK4 on the linearly interpolated velocity of a derivation.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::Derivation;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{ScalarField, Space};

/// Excursion past an interval end that is reflected without flagging the particle.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Number of particles used for the Richardson estimate of the integrator error.
const TOLERANCE_SAMPLE: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub t_end: f64,
    /// RK4 step; the effective step is t_end / ceil(t_end / step).
    pub step: f64,
    /// Steps between stored samples; the final time is always stored.
    #[serde(default = "one")]
    pub sample_every: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl FlowConfig {
    pub fn new(t_end: f64, step: f64) -> Self {
        FlowConfig { t_end, step, sample_every: 1, seed: 0 }
    }

    pub fn sample_every(mut self, k: usize) -> Self {
        self.sample_every = k;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<usize> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::domain(format!("flow horizon must be finite and ≥ 0, got {}", self.t_end)));
        }
        if !(self.step > 0.0) {
            return Err(Error::domain(format!("ODE step must be positive, got {}", self.step)));
        }
        if self.sample_every == 0 {
            return Err(Error::domain("sample_every must be ≥ 1"));
        }
        Ok(((self.t_end / self.step) - 1e-9).ceil().max(if self.t_end > 0.0 { 1.0 } else { 0.0 }) as usize)
    }
}

/// Initial law of an ensemble.
#[derive(Clone, Debug)]
pub enum Initial<'a, T> {
    /// n points sampled from density·m.
    Density(&'a ScalarField<T>, usize),
    Points(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Serialize)]
pub struct PathEnsemble {
    pub dimension: usize,
    pub particles: usize,
    /// Positions at each sample time, `[particle][sample][axis]` flattened.
    pub samples: Vec<f64>,
    pub times: Vec<f64>,
    /// ChaCha8 stream index used to draw each particle's initial point.
    pub streams: Vec<u64>,
    /// Set when a particle was reflected beyond `CLAMP_TOLERANCE`.
    pub flagged: Vec<bool>,
    pub method: String,
    pub step: f64,
    /// Richardson estimate of the single-trajectory error at the final time.
    pub tolerance: f64,
    pub config: FlowConfig,
    /// Initial density normalised to unit mass, when sampled from one.
    pub initial_density: Option<Vec<f64>>,
}

impl PathEnsemble {
    pub fn position(&self, particle: usize, sample: usize) -> &[f64] {
        let d = self.dimension;
        let base = (particle * self.times.len() + sample) * d;
        &self.samples[base..base + d]
    }

    pub fn initial(&self, particle: usize) -> &[f64] {
        self.position(particle, 0)
    }

    /// Index of the stored sample at time `t` (within 1e−9).
    pub fn sample_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// Positions of all particles at sample `k`.
    pub fn marginal(&self, k: usize) -> Vec<&[f64]> {
        (0..self.particles).map(|p| self.position(p, k)).collect()
    }

    pub fn flagged_fraction(&self) -> f64 {
        if self.particles == 0 {
            0.0
        } else {
            self.flagged.iter().filter(|f| **f).count() as f64 / self.particles as f64
        }
    }

    /// CSV with columns particle, t, x0[, x1, ...].
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let axes: Vec<String> = (0..self.dimension).map(|a| format!("x{a}")).collect();
        writeln!(out, "particle,t,{}", axes.join(","))?;
        for p in 0..self.particles {
            for (k, t) in self.times.iter().enumerate() {
                let x: Vec<String> = self.position(p, k).iter().map(|v| format!("{v:.12e}")).collect();
                writeln!(out, "{p},{t:.10e},{}", x.join(","))?;
            }
        }
        Ok(())
    }
}

/// Geometry of one axis as seen by particles.
#[derive(Clone, Copy, Debug)]
pub struct AxisGeometry {
    pub start: f64,
    pub length: f64,
    pub spacing: f64,
    /// Coordinate of node 0.
    pub first: f64,
    pub nodes: usize,
    pub periodic: bool,
}

impl AxisGeometry {
    pub fn of<T: Real>(space: &Space<T>) -> Vec<AxisGeometry> {
        space
            .axes()
            .iter()
            .map(|a| AxisGeometry {
                start: a.start.to64(),
                length: a.length.to64(),
                spacing: a.spacing.to64(),
                first: a.coord(0).to64(),
                nodes: a.nodes,
                periodic: a.periodic,
            })
            .collect()
    }

    /// Left neighbour node and weight of the right one.
    fn locate(&self, x: f64) -> (usize, usize, f64) {
        let y = (x - self.first) / self.spacing;
        if self.periodic {
            let n = self.nodes as f64;
            let y = y.rem_euclid(n);
            let i = (y.floor() as usize).min(self.nodes - 1);
            (i, (i + 1) % self.nodes, y - i as f64)
        } else if y <= 0.0 {
            (0, 0, 0.0)
        } else if y >= (self.nodes - 1) as f64 {
            (self.nodes - 1, self.nodes - 1, 0.0)
        } else {
            let i = y.floor() as usize;
            (i, i + 1, y - i as f64)
        }
    }

    pub fn wrap(&self, x: f64) -> f64 {
        if self.periodic {
            self.start + (x - self.start).rem_euclid(self.length)
        } else {
            x
        }
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        if self.periodic {
            let d = d.rem_euclid(self.length);
            d.min(self.length - d)
        } else {
            d
        }
    }

    /// Offset of x inside the cell layout starting at `cell_origin`, in [0, length).
    pub fn cell_coordinate(&self, x: f64) -> f64 {
        if self.periodic {
            (x - (self.start - 0.5 * self.spacing)).rem_euclid(self.length)
        } else {
            (x - self.start).clamp(0.0, self.length)
        }
    }
}

/// Multilinear interpolation of node values (axis 0 fastest).
pub(crate) fn interpolate(axes: &[AxisGeometry], values: &[f64], x: &[f64]) -> f64 {
    let d = axes.len();
    let located: Vec<(usize, usize, f64)> = axes.iter().zip(x).map(|(a, &x)| a.locate(x)).collect();
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut k = 0;
        let mut stride = 1;
        for (a, &(i, j, f)) in located.iter().enumerate() {
            let hi = corner >> a & 1 == 1;
            w *= if hi { f } else { 1.0 - f };
            k += if hi { j } else { i } * stride;
            stride *= axes[a].nodes;
        }
        if w != 0.0 {
            acc += w * values[k];
        }
    }
    acc
}

pub(crate) fn domain_distance(axes: &[AxisGeometry], x: &[f64], y: &[f64]) -> f64 {
    axes.iter().zip(x.iter().zip(y)).map(|(a, (p, q))| a.distance(*p, *q).powi(2)).sum::<f64>().sqrt()
}

struct Velocity {
    components: Vec<Vec<f64>>,
}

impl Velocity {
    fn eval(&self, axes: &[AxisGeometry], x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = interpolate(axes, c, x);
        }
    }
}

fn velocity<T: Real>(space: &Space<T>, b: &Derivation<T>, t: f64) -> Result<Velocity> {
    let components = b.velocity(space, T::of(t))?.into_iter().map(|c| c.into_iter().map(Real::to64).collect()).collect();
    Ok(Velocity { components })
}

/// One RK4 step from x with velocities at t, t + dt/2, t + dt; returns true when the
/// particle had to be reflected beyond the clamp tolerance.
fn rk4_step(axes: &[AxisGeometry], v: [&Velocity; 3], dt: f64, x: &mut [f64]) -> bool {
    let d = x.len();
    let mut k = [[0.0; 4]; 4];
    let mut y = [0.0; 4];
    v[0].eval(axes, x, &mut k[0][..d]);
    for a in 0..d {
        y[a] = x[a] + 0.5 * dt * k[0][a];
    }
    v[1].eval(axes, &y[..d], &mut k[1][..d]);
    for a in 0..d {
        y[a] = x[a] + 0.5 * dt * k[1][a];
    }
    v[1].eval(axes, &y[..d], &mut k[2][..d]);
    for a in 0..d {
        y[a] = x[a] + dt * k[2][a];
    }
    v[2].eval(axes, &y[..d], &mut k[3][..d]);
    let mut flagged = false;
    for a in 0..d {
        let mut z = x[a] + dt / 6.0 * (k[0][a] + 2.0 * k[1][a] + 2.0 * k[2][a] + k[3][a]);
        let ax = &axes[a];
        if ax.periodic {
            z = ax.wrap(z);
        } else {
            let (lo, hi) = (ax.start, ax.start + ax.length);
            if z < lo {
                flagged |= lo - z > CLAMP_TOLERANCE * ax.length;
                z = (2.0 * lo - z).min(hi);
            } else if z > hi {
                flagged |= z - hi > CLAMP_TOLERANCE * ax.length;
                z = (2.0 * hi - z).max(lo);
            }
        }
        x[a] = z;
    }
    flagged
}

/// Draws n points from density·m: inverse CDF over cells in 1D, rejection in 2D.
/// Particle p uses ChaCha8 stream p of `seed`.
pub fn sample_initial<T: Real>(space: &Space<T>, density: &ScalarField<T>, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    space.check(density)?;
    if density.min() < T::zero() {
        return Err(Error::domain("initial density must be nonnegative"));
    }
    let weights: Vec<f64> = density.values().iter().zip(space.measure()).map(|(u, m)| (*u * *m).to64()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::domain("initial density must have positive finite mass"));
    }
    let axes = AxisGeometry::of(space);
    let d = axes.len();
    let cell_point = |k: usize, offsets: &[f64]| -> Vec<f64> {
        let idx = space.index(k);
        (0..d)
            .map(|a| {
                let ax = &axes[a];
                let centre = ax.first + idx[a] as f64 * ax.spacing;
                ax.wrap(centre + (offsets[a] - 0.5) * ax.spacing)
            })
            .collect()
    };
    if d == 1 {
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w / total;
            cdf.push(acc);
        }
        Ok((0..n)
            .into_par_iter()
            .map(|p| {
                let mut rng = stream(seed, p);
                let u: f64 = rng.gen::<f64>();
                let k = cdf.partition_point(|c| *c < u).min(weights.len() - 1);
                let below = if k == 0 { 0.0 } else { cdf[k - 1] };
                let width = cdf[k] - below;
                let frac = if width > 0.0 { ((u - below) / width).clamp(0.0, 1.0) } else { 0.5 };
                cell_point(k, &[frac])
            })
            .collect())
    } else {
        let top = weights.iter().cloned().fold(0.0_f64, f64::max);
        Ok((0..n)
            .into_par_iter()
            .map(|p| {
                let mut rng = stream(seed, p);
                loop {
                    let k = rng.gen_range(0..weights.len());
                    let accept: f64 = rng.gen();
                    if accept * top < weights[k] {
                        let offsets: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
                        return cell_point(k, &offsets);
                    }
                }
            })
            .collect())
    }
}

fn stream(seed: u64, p: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(p as u64);
    rng
}

fn check_points(axes: &[AxisGeometry], points: &[Vec<f64>]) -> Result<()> {
    for (p, x) in points.iter().enumerate() {
        if x.len() != axes.len() {
            return Err(Error::domain(format!("point {p} has {} coordinates, expected {}", x.len(), axes.len())));
        }
        for (a, v) in axes.iter().zip(x) {
            if !v.is_finite() || (!a.periodic && (*v < a.start || *v > a.start + a.length)) {
                return Err(Error::domain(format!("point {p} lies outside the domain")));
            }
        }
    }
    Ok(())
}

/// Integrates `points` over [0, steps·dt]; returns the stored samples and flags.
fn run<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    points: &[Vec<f64>],
    steps: usize,
    dt: f64,
    sample_every: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    let axes = AxisGeometry::of(space);
    let d = axes.len();
    let stored: Vec<usize> = (0..=steps).filter(|k| k % sample_every == 0 || *k == steps).collect();
    let times: Vec<f64> = stored.iter().map(|&k| k as f64 * dt).collect();
    let n = points.len();
    let ns = stored.len();
    let mut samples = vec![0.0; n * ns * d];
    let mut current: Vec<f64> = points.iter().flat_map(|x| x.iter().map(|v| v)).cloned().collect();
    for (a, x) in current.iter_mut().enumerate() {
        *x = axes[a % d].wrap(*x);
    }
    let mut flags = vec![false; n];
    let store = |samples: &mut [f64], current: &[f64], slot: usize| {
        for p in 0..n {
            let base = (p * ns + slot) * d;
            samples[base..base + d].copy_from_slice(&current[p * d..(p + 1) * d]);
        }
    };
    store(&mut samples, &current, 0);
    let constant = !b.is_time_dependent();
    let mut v0 = velocity(space, b, 0.0)?;
    let mut slot = 1;
    for k in 0..steps {
        let t = k as f64 * dt;
        let (vh, v1) = if constant { (None, None) } else { (Some(velocity(space, b, t + 0.5 * dt)?), Some(velocity(space, b, t + dt)?)) };
        let stages = [&v0, vh.as_ref().unwrap_or(&v0), v1.as_ref().unwrap_or(&v0)];
        current.par_chunks_mut(d).zip(flags.par_iter_mut()).for_each(|(x, flag)| {
            *flag |= rk4_step(&axes, stages, dt, x);
        });
        if let Some(v1) = v1 {
            v0 = v1;
        }
        if slot < ns && stored[slot] == k + 1 {
            store(&mut samples, &current, slot);
            slot += 1;
        }
    }
    Ok((samples, times, flags))
}

/// RK4 integration of η̇ = b_t(η) from the given initial law.
pub fn integrate_flow<T: Real>(space: &Space<T>, b: &Derivation<T>, initial: Initial<'_, T>, cfg: &FlowConfig) -> Result<PathEnsemble> {
    let steps = cfg.validate()?;
    let axes = AxisGeometry::of(space);
    let (points, initial_density) = match initial {
        Initial::Density(u, n) => {
            let pts = sample_initial(space, u, n, cfg.seed)?;
            let total = space.integrate(u).to64();
            (pts, Some(u.values().iter().map(|v| v.to64() / total).collect()))
        }
        Initial::Points(p) => {
            check_points(&axes, &p)?;
            (p, None)
        }
    };
    let dt = if steps == 0 { cfg.step } else { cfg.t_end / steps as f64 };
    let (samples, times, flagged) = run(space, b, &points, steps, dt, cfg.sample_every)?;
    let tolerance = if steps == 0 || points.is_empty() {
        0.0
    } else {
        let probe: Vec<Vec<f64>> = points.iter().take(TOLERANCE_SAMPLE).cloned().collect();
        let (coarse, _, _) = run(space, b, &probe, steps, dt, steps)?;
        let (fine, _, _) = run(space, b, &probe, 2 * steps, 0.5 * dt, 2 * steps)?;
        let d = axes.len();
        (0..probe.len())
            .map(|p| domain_distance(&axes, &coarse[(2 * p + 1) * d..(2 * p + 2) * d], &fine[(2 * p + 1) * d..(2 * p + 2) * d]))
            .fold(0.0_f64, f64::max)
            * 16.0
            / 15.0
    };
    Ok(PathEnsemble {
        dimension: axes.len(),
        particles: points.len(),
        samples,
        times,
        streams: (0..points.len() as u64).collect(),
        flagged,
        method: "rk4".into(),
        step: dt,
        tolerance,
        config: cfg.clone(),
        initial_density,
    })
}
