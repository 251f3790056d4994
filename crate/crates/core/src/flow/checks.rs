use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::ensemble::{domain_distance, interpolate, AxisGeometry};
use super::{integrate_flow, FlowConfig, Initial, PathEnsemble};
use crate::calculus::{gamma, modulus, Derivation, ProbeFamily};
use crate::continuity::CESolution;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{ScalarField, Space};

/// Relative-residual statistics; entries where both sides are below 1e−12 count as exact.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ResidualStats {
    pub count: usize,
    pub skipped: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
    pub mean: f64,
}

impl ResidualStats {
    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut skipped = 0;
        let mut r: Vec<f64> = Vec::new();
        for (measured, expected) in pairs {
            if measured.abs() <= 1e-12 && expected.abs() <= 1e-12 {
                r.push(0.0);
            } else if expected.abs() <= 1e-12 {
                skipped += 1;
            } else {
                r.push((measured - expected).abs() / expected.abs());
            }
        }
        if r.is_empty() {
            return ResidualStats { skipped, ..Default::default() };
        }
        r.sort_by(f64::total_cmp);
        let q = |p: f64| r[((r.len() - 1) as f64 * p).round() as usize];
        ResidualStats {
            count: r.len(),
            skipped,
            median: q(0.5),
            p90: q(0.9),
            max: r[r.len() - 1],
            mean: r.iter().sum::<f64>() / r.len() as f64,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Compressibility {
    /// max over samples and nodes of (smoothed empirical density) / (m density).
    pub estimate: f64,
    /// Three standard deviations of the smoothed histogram at the maximiser, relative.
    pub error_bar: f64,
    pub bandwidth: f64,
    pub time: f64,
    pub node: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipationReport {
    pub particles: usize,
    pub t_end: f64,
    /// max over particles of |V∘η(T) − V∘η(0) − ∫Γ(V)∘η| / T.
    pub per_unit_time: f64,
    pub median_residual: f64,
    /// |η̇| against √Γ(V)∘η.
    pub speed: ResidualStats,
    /// Particles along which V∘η decreases by more than h²·osc V.
    pub monotone_violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoBranchingReport {
    pub max_gap: f64,
    pub gaps: Vec<f64>,
    pub tolerance: f64,
    pub flagged: usize,
    pub flagged_fraction: f64,
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FlowReport {
    pub checkpoints: Vec<f64>,
    pub marginal_error: Vec<f64>,
    /// "w1" in 1D, "smoothed_l1" in 2D.
    pub metric: String,
    /// n^{−1/2}.
    pub sampling_scale: f64,
    pub semigroup_defect: Option<f64>,
    pub compressibility: Option<Compressibility>,
    pub branching: Option<NoBranchingReport>,
    pub speed: Option<ResidualStats>,
    pub dissipation: Option<DissipationReport>,
    pub notes: Vec<String>,
}

impl FlowReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with columns t, marginal_error.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "t,marginal_error")?;
        for (t, e) in self.checkpoints.iter().zip(&self.marginal_error) {
            writeln!(out, "{t:.10e},{e:.10e}")?;
        }
        Ok(())
    }
}

/// ∫|a + (b − a)s| over a segment of length `len`.
fn abs_linear(len: f64, a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * len * (a.abs() + b.abs())
    } else {
        0.5 * len * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// W₁ between the empirical measure of `points` and the measure with cell masses
/// `masses` spread uniformly over cells. On tori the circle distance
/// min_c ∫|F_n − F − c| is used.
pub fn wasserstein_1d(axis: &AxisGeometry, masses: &[f64], points: &[f64]) -> f64 {
    let total: f64 = masses.iter().sum();
    let h = axis.spacing;
    let n = points.len() as f64;
    let mut ys: Vec<f64> = points.iter().map(|&x| axis.cell_coordinate(x)).collect();
    ys.sort_by(f64::total_cmp);
    // Segments (length, G at start, G at end) of G = F_n − F.
    let mut segments: Vec<(f64, f64, f64)> = Vec::with_capacity(masses.len() + ys.len());
    let mut cum = 0.0;
    let mut next = 0;
    for (i, m) in masses.iter().enumerate() {
        let (lo, hi) = (i as f64 * h, (i + 1) as f64 * h);
        let f_at = |y: f64| cum + m / total * (y - lo) / h;
        let mut y0 = lo;
        while next < ys.len() && ys[next] <= lo {
            next += 1;
        }
        loop {
            let emp = next as f64 / n;
            let y1 = if next < ys.len() && ys[next] < hi { ys[next] } else { hi };
            if y1 > y0 {
                segments.push((y1 - y0, emp - f_at(y0), emp - f_at(y1)));
            }
            if y1 >= hi {
                break;
            }
            while next < ys.len() && ys[next] <= y1 {
                next += 1;
            }
            y0 = y1;
        }
        cum += m / total;
    }
    let cost = |c: f64| segments.iter().map(|&(l, a, b)| abs_linear(l, a - c, b - c)).sum::<f64>();
    if !axis.periodic {
        return cost(0.0);
    }
    let (mut lo, mut hi) = segments.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, a, b)| (lo.min(a).min(b), hi.max(a).max(b)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c1 = hi - phi * (hi - lo);
        let c2 = lo + phi * (hi - lo);
        if cost(c1) <= cost(c2) {
            hi = c2;
        } else {
            lo = c1;
        }
    }
    cost(0.5 * (lo + hi))
}

fn nearest_node(axes: &[AxisGeometry], x: &[f64]) -> usize {
    let mut k = 0;
    let mut stride = 1;
    for (a, &v) in axes.iter().zip(x) {
        let y = (v - a.first) / a.spacing;
        let i = if a.periodic {
            (y.round() as i64).rem_euclid(a.nodes as i64) as usize
        } else {
            (y.round().max(0.0) as usize).min(a.nodes - 1)
        };
        k += i * stride;
        stride *= a.nodes;
    }
    k
}

/// Separable Gaussian smoothing of node masses with standard deviation `bandwidth`,
/// truncated at four deviations; periodic wrap on tori, mirror on intervals.
fn smooth(axes: &[AxisGeometry], masses: &[f64], bandwidth: f64) -> Vec<f64> {
    smooth_with(axes, masses, bandwidth, false)
}

/// As `smooth`, optionally with the squared (normalised) kernel weights.
fn smooth_with(axes: &[AxisGeometry], masses: &[f64], bandwidth: f64, squared: bool) -> Vec<f64> {
    let mut cur = masses.to_vec();
    let mut stride = 1;
    for a in axes {
        let reach = (4.0 * bandwidth / a.spacing).ceil() as i64;
        let mut w: Vec<f64> = (-reach..=reach).map(|j| (-0.5 * (j as f64 * a.spacing / bandwidth).powi(2)).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v = if squared { (*v / s).powi(2) } else { *v / s });
        let n = a.nodes as i64;
        let mut out = vec![0.0; cur.len()];
        for (k, &m) in cur.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let i = ((k / stride) % a.nodes) as i64;
            let base = k - i as usize * stride;
            for (o, wj) in (-reach..=reach).zip(&w) {
                let mut j = i + o;
                if a.periodic {
                    j = j.rem_euclid(n);
                } else {
                    while j < 0 || j >= n {
                        j = if j < 0 { -j - 1 } else { 2 * n - j - 1 };
                    }
                }
                out[base + j as usize * stride] += wj * m;
            }
        }
        cur = out;
        stride *= a.nodes;
    }
    cur
}

fn histogram(axes: &[AxisGeometry], len: usize, points: &[&[f64]]) -> Vec<f64> {
    let mut h = vec![0.0; len];
    let w = 1.0 / points.len() as f64;
    for x in points {
        h[nearest_node(axes, x)] += w;
    }
    h
}

fn normalised_masses<T: Real>(space: &Space<T>, u: &ScalarField<T>) -> Vec<f64> {
    let m: Vec<f64> = u.values().iter().zip(space.measure()).map(|(a, b)| (*a * *b).to64()).collect();
    let total: f64 = m.iter().sum();
    m.into_iter().map(|v| v / total).collect()
}

/// Distance between the ensemble's pushforward and u_t·m at each checkpoint.
pub fn superposition_check<T: Real>(
    space: &Space<T>,
    ensemble: &PathEnsemble,
    ce: &CESolution<T>,
    checkpoints: &[f64],
) -> Result<FlowReport> {
    let axes = AxisGeometry::of(space);
    let start = ensemble
        .initial_density
        .as_ref()
        .ok_or_else(|| Error::Precondition("ensemble was not sampled from a density".into()))?;
    let ce0: Vec<f64> = {
        let total = space.integrate(ce.initial()).to64();
        ce.initial().values().iter().map(|v| v.to64() / total).collect()
    };
    let scale = ce0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if start.len() != ce0.len() || start.iter().zip(&ce0).any(|(a, b)| (a - b).abs() > 1e-9 * scale) {
        return Err(Error::Precondition("ensemble and CE solution start from different data".into()));
    }
    let mut report = FlowReport {
        metric: if axes.len() == 1 { "w1" } else { "smoothed_l1" }.into(),
        sampling_scale: 1.0 / (ensemble.particles as f64).sqrt(),
        ..Default::default()
    };
    for &t in checkpoints {
        let ke = ensemble.sample_index(t).ok_or_else(|| Error::Precondition(format!("no ensemble sample at t = {t}")))?;
        let kc = ce
            .times
            .iter()
            .position(|s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::Precondition(format!("no stored CE field at t = {t}")))?;
        let masses = normalised_masses(space, &ce.fields[kc]);
        let pts = ensemble.marginal(ke);
        let err = if axes.len() == 1 {
            let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
            wasserstein_1d(&axes[0], &masses, &xs)
        } else {
            let bw = 2.0 * axes.iter().map(|a| a.spacing).fold(0.0, f64::max);
            let a = smooth(&axes, &histogram(&axes, space.len(), &pts), bw);
            let b = smooth(&axes, &masses, bw);
            a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum()
        };
        report.checkpoints.push(t);
        report.marginal_error.push(err);
    }
    Ok(report)
}

/// Estimate of C with X(t)_# m ≤ C m from a kernel-smoothed histogram.
pub fn compressibility<T: Real>(space: &Space<T>, ensemble: &PathEnsemble, bandwidth: f64) -> Result<Compressibility> {
    let axes = AxisGeometry::of(space);
    let h = axes.iter().map(|a| a.spacing).fold(0.0, f64::max);
    if !(bandwidth >= h) {
        return Err(Error::domain(format!("bandwidth {bandwidth} is below the mesh width {h}")));
    }
    let reference = normalised_masses(space, &space.constant(T::one()));
    let start = ensemble
        .initial_density
        .as_ref()
        .ok_or_else(|| Error::Precondition("ensemble was not sampled from a density".into()))?;
    let total = space.total_mass().to64();
    if start.iter().any(|v| (v * total - 1.0).abs() > 1e-9) {
        return Err(Error::Precondition("compressibility needs the normalised reference measure as initial law".into()));
    }
    let smoothed_ref = smooth(&axes, &reference, bandwidth);
    let kernel_sq = smooth_with(&axes, &reference, bandwidth, true);
    let rows: Vec<(f64, usize, usize)> = (0..ensemble.times.len())
        .into_par_iter()
        .map(|k| {
            let emp = smooth(&axes, &histogram(&axes, space.len(), &ensemble.marginal(k)), bandwidth);
            let (node, ratio) = emp
                .iter()
                .zip(&smoothed_ref)
                .map(|(a, b)| a / b)
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((0, 0.0));
            (ratio, node, k)
        })
        .collect();
    let &(estimate, node, k) = rows.iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("at least one sample");
    // Multinomial variance of the smoothed histogram: (Σ K² ν − (Σ K ν)²) / n, scaled by C.
    let var = (kernel_sq[node] - smoothed_ref[node].powi(2)).max(0.0) / ensemble.particles as f64;
    let error_bar = 3.0 * (estimate.max(1.0) * var).sqrt() / smoothed_ref[node];
    Ok(Compressibility { estimate, error_bar, bandwidth, time: ensemble.times[k], node })
}

/// |η̇| by finite differences between stored samples against |b|_* at η(t).
pub fn speed_identity_check<T: Real>(
    space: &Space<T>,
    ensemble: &PathEnsemble,
    b: &Derivation<T>,
    probes: &ProbeFamily<T>,
) -> Result<ResidualStats> {
    let axes = AxisGeometry::of(space);
    let nt = ensemble.times.len();
    if nt < 2 {
        return Ok(ResidualStats::default());
    }
    let star_at = |t: f64| -> Result<Vec<f64>> { Ok(modulus(space, b, probes, T::of(t))?.1.to_f64()) };
    let autonomous = if b.is_time_dependent() { None } else { Some(star_at(0.0)?) };
    let stars: Vec<Vec<f64>> = match &autonomous {
        Some(s) => vec![s.clone()],
        None => ensemble.times[..nt - 1].iter().map(|&t| star_at(t)).collect::<Result<_>>()?,
    };
    let pairs: Vec<(f64, f64)> = (0..ensemble.particles)
        .into_par_iter()
        .flat_map_iter(|p| {
            let stars = &stars;
            let axes = &axes;
            (0..nt - 1).map(move |k| {
                let dt = ensemble.times[k + 1] - ensemble.times[k];
                let x = ensemble.position(p, k);
                let speed = domain_distance(axes, x, ensemble.position(p, k + 1)) / dt;
                let s = &stars[if stars.len() == 1 { 0 } else { k }];
                (speed, interpolate(axes, s, x))
            })
        })
        .collect();
    Ok(ResidualStats::from_pairs(pairs.into_iter()))
}

/// Energy identity V∘η(T) − V∘η(0) = ∫₀^T Γ(V)∘η along trajectories of b_V, trapezoid in time.
pub fn dissipation_check<T: Real>(space: &Space<T>, ensemble: &PathEnsemble, v: &ScalarField<T>) -> Result<DissipationReport> {
    let axes = AxisGeometry::of(space);
    let gv = gamma(space, v, v)?.to_f64();
    let root: Vec<f64> = gv.iter().map(|g| g.max(0.0).sqrt()).collect();
    let vv = v.to_f64();
    let nt = ensemble.times.len();
    let t_end = *ensemble.times.last().unwrap_or(&0.0);
    let h = axes.iter().map(|a| a.spacing).fold(0.0, f64::max);
    let osc = vv.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vv.iter().cloned().fold(f64::INFINITY, f64::min);
    let slack = h * h * osc.max(0.0);
    let per_particle: Vec<(f64, bool, Vec<(f64, f64)>)> = (0..ensemble.particles)
        .into_par_iter()
        .map(|p| {
            let vals: Vec<f64> = (0..nt).map(|k| interpolate(&axes, &vv, ensemble.position(p, k))).collect();
            let g: Vec<f64> = (0..nt).map(|k| interpolate(&axes, &gv, ensemble.position(p, k))).collect();
            let mut integral = 0.0;
            let mut speeds = Vec::with_capacity(nt.saturating_sub(1));
            let mut monotone = true;
            for k in 0..nt.saturating_sub(1) {
                let dt = ensemble.times[k + 1] - ensemble.times[k];
                integral += 0.5 * dt * (g[k] + g[k + 1]);
                monotone &= vals[k + 1] >= vals[k] - slack;
                let x = ensemble.position(p, k);
                speeds.push((domain_distance(&axes, x, ensemble.position(p, k + 1)) / dt, interpolate(&axes, &root, x)));
            }
            let residual = (vals[nt - 1] - vals[0] - integral).abs();
            (residual, monotone, speeds)
        })
        .collect();
    let mut residuals: Vec<f64> = per_particle.iter().map(|r| r.0).collect();
    residuals.sort_by(f64::total_cmp);
    let per_unit = if t_end > 0.0 { residuals.last().copied().unwrap_or(0.0) / t_end } else { 0.0 };
    Ok(DissipationReport {
        particles: ensemble.particles,
        t_end,
        per_unit_time: per_unit,
        median_residual: residuals.get(residuals.len() / 2).copied().unwrap_or(0.0),
        speed: ResidualStats::from_pairs(per_particle.iter().flat_map(|r| r.2.iter().copied())),
        monotone_violations: per_particle.iter().filter(|r| !r.1).count(),
    })
}

/// Integrates the same points with two configurations and reports per-particle
/// maximal domain distance over the shared sample times. Without an explicit
/// tolerance, particles are flagged above 10× the sum of both Richardson estimates.
pub fn no_branching_check<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    points: &[Vec<f64>],
    configs: [&FlowConfig; 2],
    tolerance: Option<f64>,
) -> Result<NoBranchingReport> {
    if (configs[0].t_end - configs[1].t_end).abs() > 1e-12 {
        return Err(Error::domain("both configurations must share the horizon"));
    }
    let axes = AxisGeometry::of(space);
    let a = integrate_flow(space, b, Initial::Points(points.to_vec()), configs[0])?;
    let c = integrate_flow(space, b, Initial::Points(points.to_vec()), configs[1])?;
    let shared: Vec<(usize, usize)> = a.times.iter().enumerate().filter_map(|(i, &t)| c.sample_index(t).map(|j| (i, j))).collect();
    let gaps: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|p| shared.iter().map(|&(i, j)| domain_distance(&axes, a.position(p, i), c.position(p, j))).fold(0.0, f64::max))
        .collect();
    let tolerance = tolerance.unwrap_or(10.0 * (a.tolerance + c.tolerance));
    let flagged = gaps.iter().filter(|g| **g > tolerance).count();
    Ok(NoBranchingReport {
        max_gap: gaps.iter().cloned().fold(0.0, f64::max),
        tolerance,
        flagged,
        flagged_fraction: if gaps.is_empty() { 0.0 } else { flagged as f64 / gaps.len() as f64 },
        times: shared.iter().map(|&(i, _)| a.times[i]).collect(),
        gaps,
    })
}

/// max over points of d(X(t + s, x), X(s, X(t, x))) for an autonomous field.
pub fn flow_semigroup_defect<T: Real>(space: &Space<T>, b: &Derivation<T>, points: &[Vec<f64>], t: f64, s: f64, step: f64) -> Result<f64> {
    if b.is_time_dependent() {
        return Err(Error::domain("flow semigroup check needs an autonomous field"));
    }
    let axes = AxisGeometry::of(space);
    let last = |e: &PathEnsemble, p: usize| e.position(p, e.times.len() - 1).to_vec();
    let run = |pts: Vec<Vec<f64>>, horizon: f64| {
        let steps = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
        integrate_flow(space, b, Initial::Points(pts), &FlowConfig::new(horizon, step).sample_every(steps))
    };
    let direct = run(points.to_vec(), t + s)?;
    let first = run(points.to_vec(), t)?;
    let mid: Vec<Vec<f64>> = (0..points.len()).map(|p| last(&first, p)).collect();
    let second = run(mid, s)?;
    Ok((0..points.len()).map(|p| domain_distance(&axes, &last(&direct, p), &last(&second, p))).fold(0.0, f64::max))
}

/// Least-squares fit err ≈ a·h² + b·n^{−1/2} with a, b ≥ 0.
pub fn fit_error_budget(rows: &[(f64, usize, f64)]) -> (f64, f64) {
    let feats: Vec<(f64, f64, f64)> = rows.iter().map(|&(h, n, e)| (h * h, 1.0 / (n as f64).sqrt(), e)).collect();
    let single = |pick: &dyn Fn(&(f64, f64, f64)) -> f64| {
        let num: f64 = feats.iter().map(|r| pick(r) * r.2).sum();
        let den: f64 = feats.iter().map(|r| pick(r) * pick(r)).sum();
        if den > 0.0 {
            (num / den).max(0.0)
        } else {
            0.0
        }
    };
    let (s11, s12, s22) = feats.iter().fold((0.0, 0.0, 0.0), |(a, b, c), r| (a + r.0 * r.0, b + r.0 * r.1, c + r.1 * r.1));
    let (t1, t2) = feats.iter().fold((0.0, 0.0), |(a, b), r| (a + r.0 * r.2, b + r.1 * r.2));
    let det = s11 * s22 - s12 * s12;
    if det.abs() > 1e-14 * s11 * s22 {
        let a = (t1 * s22 - t2 * s12) / det;
        let b = (s11 * t2 - s12 * t1) / det;
        if a >= 0.0 && b >= 0.0 {
            return (a, b);
        }
    }
    let residual = |a: f64, b: f64| feats.iter().map(|r| (a * r.0 + b * r.1 - r.2).powi(2)).sum::<f64>();
    let ca = single(&|r| r.0);
    let cb = single(&|r| r.1);
    if residual(ca, 0.0) <= residual(0.0, cb) {
        (ca, 0.0)
    } else {
        (0.0, cb)
    }
}
