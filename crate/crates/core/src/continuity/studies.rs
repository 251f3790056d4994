//! Vanishing viscosity ladders and the two-scheme uniqueness probe.

use rayon::prelude::*;
use serde::Serialize;

use super::{solve_viscous_ce, CESolution, CeConfig};
use crate::calculus::Derivation;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{lp_norm, ScalarField, Space};

/// Least-squares slope of log y against log x over entries with y > 0.
pub fn fitted_order(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn l1_distance<T: Real>(space: &Space<T>, a: &ScalarField<T>, b: &ScalarField<T>) -> Result<f64> {
    Ok(lp_norm(space, &a.sub(b), T::one())?.to64())
}

#[derive(Clone, Debug, Serialize)]
pub struct VanishingViscosityReport {
    pub sigmas: Vec<f64>,
    /// ‖u_{σ_i}(T) − u_{σ_{i+1}}(T)‖₁.
    pub successive_l1: Vec<f64>,
    pub successive_orders: Vec<f64>,
    /// ‖u_σ(T) − u_0(T)‖₁ against the σ = 0 run on the same grid.
    pub reference_l1: Vec<f64>,
    /// Least-squares order of `reference_l1` in σ.
    pub order: f64,
    /// Smallest nodal value over all ladder solutions, relative to ‖ū‖_∞.
    pub min_relative_value: f64,
    pub flags: Vec<String>,
}

/// Runs the monotone scheme (θ = 1, positivity guard) for each σ of a
/// strictly decreasing ladder plus σ = 0.
pub fn vanishing_viscosity<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    u0: &ScalarField<T>,
    ladder: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<(CESolution<T>, VanishingViscosityReport)> {
    vanishing_viscosity_with(space, b, u0, ladder, &CeConfig::new(0.0, t_end, dt).monotone())
}

/// As [`vanishing_viscosity`] with the scheme, T and dt taken from `scheme`.
pub fn vanishing_viscosity_with<T: Real>(
    space: &Space<T>,
    b: &Derivation<T>,
    u0: &ScalarField<T>,
    ladder: &[f64],
    scheme: &CeConfig,
) -> Result<(CESolution<T>, VanishingViscosityReport)> {
    if ladder.len() < 3 {
        return Err(Error::domain("viscosity ladder needs at least 3 entries"));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) || ladder.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::domain("viscosity ladder must be positive and strictly decreasing"));
    }
    let mut sigmas: Vec<f64> = ladder.to_vec();
    sigmas.push(0.0);
    let runs: Vec<CESolution<T>> = sigmas
        .par_iter()
        .map(|&sigma| {
            let cfg = CeConfig { sigma, store_every: usize::MAX, ..scheme.clone() };
            solve_viscous_ce(space, b, u0, &cfg)
        })
        .collect::<Result<_>>()?;
    let reference = runs.last().unwrap().last();
    let k = ladder.len();
    let mut successive_l1 = Vec::with_capacity(k - 1);
    for i in 0..k - 1 {
        successive_l1.push(l1_distance(space, runs[i].last(), runs[i + 1].last())?);
    }
    let successive_orders = successive_l1.windows(2).enumerate().map(|(i, w)| (w[0] / w[1]).ln() / (ladder[i + 1] / ladder[i + 2]).ln()).collect();
    let reference_l1: Vec<f64> = (0..k).map(|i| l1_distance(space, runs[i].last(), reference)).collect::<Result<_>>()?;
    let order = fitted_order(ladder, &reference_l1).unwrap_or(f64::NAN);
    let scale = u0.max_abs().to64().max(f64::MIN_POSITIVE);
    let min_relative_value = runs.iter().flat_map(|r| r.fields.iter()).map(|f| f.min().to64() / scale).fold(f64::INFINITY, f64::min);
    let mut flags = Vec::new();
    for (i, w) in successive_l1.windows(2).enumerate() {
        if w[1] > 1.05 * w[0] {
            flags.push(format!("successive difference grew between σ = {} and σ = {}", ladder[i + 1], ladder[i + 2]));
        }
    }
    let report = VanishingViscosityReport { sigmas: ladder.to_vec(), successive_l1, successive_orders, reference_l1, order, min_relative_value, flags };
    let mut runs = runs;
    runs.pop();
    Ok((runs.pop().unwrap(), report))
}

/// One refinement level of a uniqueness probe.
pub struct ProbeLevel<T> {
    pub space: Space<T>,
    pub b: Derivation<T>,
    pub u0: ScalarField<T>,
}

/// A scheme setting compared by [`uniqueness_probe`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeSetting {
    pub theta: f64,
    pub positivity_guard: bool,
    /// The viscosity at level k is sigma_factor · σ₀ / 2^k.
    pub sigma_factor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderSpec {
    pub levels: usize,
    pub sigma0: f64,
    pub dt0: f64,
    pub t_end: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessRow {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub sigma: f64,
    /// ‖u¹ − u²‖₁ at T/2 and T.
    pub diff_mid: f64,
    pub diff_final: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub configs: [SchemeSetting; 2],
    pub rows: Vec<UniquenessRow>,
    /// Least-squares order of diff_final in h (NaN when all differences vanish).
    pub order: f64,
    pub passes: bool,
}

/// Differences vanishing below this L¹ level count as identical solutions.
const IDENTICAL: f64 = 1e-12;

/// Solves with both settings on every level (h, dt and σ halved per level)
/// and reports how fast the two solutions merge.
pub fn uniqueness_probe<T: Real>(
    problem: impl Fn(usize) -> Result<ProbeLevel<T>> + Sync,
    configs: [SchemeSetting; 2],
    ladder: &LadderSpec,
) -> Result<UniquenessReport> {
    if ladder.levels < 2 {
        return Err(Error::domain("uniqueness probe needs at least two levels"));
    }
    let rows: Vec<UniquenessRow> = (0..ladder.levels)
        .into_par_iter()
        .map(|k| -> Result<UniquenessRow> {
            let level = problem(k)?;
            let scale = 0.5_f64.powi(k as i32);
            let dt = ladder.dt0 * scale;
            let sigma = ladder.sigma0 * scale;
            let steps = ((ladder.t_end / dt) - 1e-9).ceil() as usize;
            let mid_stride = (steps / 2).max(1);
            let solve = |c: &SchemeSetting| {
                let cfg = CeConfig {
                    sigma: sigma * c.sigma_factor,
                    t_end: ladder.t_end,
                    dt,
                    theta: c.theta,
                    positivity_guard: c.positivity_guard,
                    store_every: mid_stride,
                };
                solve_viscous_ce(&level.space, &level.b, &level.u0, &cfg)
            };
            let (a, b) = rayon::join(|| solve(&configs[0]), || solve(&configs[1]));
            let (a, b) = (a?, b?);
            let mid = a.fields.len() / 2;
            Ok(UniquenessRow {
                level: k,
                h: level.space.max_spacing().to64(),
                dt,
                sigma,
                diff_mid: l1_distance(&level.space, &a.fields[mid], &b.fields[mid])?,
                diff_final: l1_distance(&level.space, a.last(), b.last())?,
            })
        })
        .collect::<Result<_>>()?;
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.diff_final).collect();
    let identical = diffs.iter().all(|d| *d <= IDENTICAL);
    let order = if identical { f64::NAN } else { fitted_order(&hs, &diffs).unwrap_or(f64::NAN) };
    let passes = identical || order >= 0.8;
    Ok(UniquenessReport { configs, rows, order, passes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, GridSpec};
    use std::f64::consts::PI;

    fn level(k: usize) -> Result<ProbeLevel<f64>> {
        let n = 64 << k;
        let space: Space<f64> = build_space(&GridSpec::torus_1d(2.0 * PI, n), &vec![0.0; n])?;
        let b = Derivation::from_fn(&space, |x| vec![0.6 + 0.4 * x[0].sin()])?;
        let u0 = space.field_fn(|x| (x[0].cos()).exp());
        Ok(ProbeLevel { space, b, u0 })
    }

    #[test]
    fn order_fit() {
        let x = [1.0, 0.5, 0.25];
        let y = [3.0, 0.75, 0.1875];
        assert!((fitted_order(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert!(fitted_order(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn identical_configs_give_zero() {
        let c = SchemeSetting { theta: 1.0, positivity_guard: true, sigma_factor: 1.0 };
        let ladder = LadderSpec { levels: 2, sigma0: 0.02, dt0: 0.02, t_end: 0.2 };
        let r = uniqueness_probe(level, [c.clone(), c], &ladder).unwrap();
        assert!(r.passes);
        assert!(r.rows.iter().all(|row| row.diff_final == 0.0));
    }

    #[test]
    fn crank_nicolson_and_implicit_euler_merge() {
        let cfgs = [
            SchemeSetting { theta: 0.5, positivity_guard: false, sigma_factor: 1.0 },
            SchemeSetting { theta: 1.0, positivity_guard: false, sigma_factor: 1.0 },
        ];
        let ladder = LadderSpec { levels: 3, sigma0: 0.02, dt0: 0.02, t_end: 0.5 };
        let r = uniqueness_probe(level, cfgs, &ladder).unwrap();
        assert!(r.passes, "{r:?}");
        assert!(r.order > 0.8);
    }

    #[test]
    fn vanishing_viscosity_ladder() {
        let n = 256;
        let s: Space<f64> = build_space(&GridSpec::torus_1d(2.0 * PI, n), &vec![0.0; n]).unwrap();
        let b = Derivation::from_fn(&s, |x| vec![0.5 * x[0].sin()]).unwrap();
        let u0 = s.field_fn(|x| 1.0 + 0.5 * x[0].cos());
        let (sol, rep) = vanishing_viscosity(&s, &b, &u0, &[0.04, 0.02, 0.01], 1.0, 0.01).unwrap();
        assert_eq!(sol.config.sigma, 0.01);
        assert!(rep.order >= 0.8, "{rep:?}");
        assert!(rep.min_relative_value >= -1e-12);
        assert!(vanishing_viscosity(&s, &b, &u0, &[0.01, 0.02, 0.005], 1.0, 0.01).is_err());
    }
}
