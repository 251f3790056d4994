//! Bakry–Émery checks BE₂(K,∞), BE₁(K,∞) and their consequences on a discrete space.
//! K is always supplied by the caller and never estimated.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{deformation_norm_estimate, gamma, hessian, Derivation, ProbeFamily};
use crate::error::{Error, Result};
use crate::numeric::weighted_dot;
use crate::scalar::Real;
use crate::space::{lp_norm, ScalarField, Space};

/// Node-wise defect tolerance for the semigroup checks.
pub const CURVATURE_TOLERANCE: f64 = 5e-3;

/// Default time grid, inside (0, 2].
pub const DEFAULT_TIMES: [f64; 6] = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0];

/// I_K(t) = (e^{Kt} − 1)/K, with I_0(t) = t.
pub fn i_k(k: f64, t: f64) -> f64 {
    if k == 0.0 {
        t
    } else {
        (k * t).exp_m1() / k
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectRow {
    pub probe: usize,
    pub t: f64,
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureCheck {
    pub name: String,
    pub worst_defect: f64,
    pub probe: Option<usize>,
    pub t: Option<f64>,
    pub tolerance: f64,
    pub holds: bool,
    pub table: Vec<DefectRow>,
}

impl CurvatureCheck {
    fn from_rows(name: &str, tolerance: f64, table: Vec<DefectRow>) -> Self {
        let worst = table.iter().max_by(|a, b| a.defect.total_cmp(&b.defect));
        let worst_defect = worst.map_or(f64::NEG_INFINITY, |r| r.defect);
        CurvatureCheck {
            name: name.to_string(),
            worst_defect,
            probe: worst.map(|r| r.probe),
            t: worst.map(|r| r.t),
            tolerance,
            holds: table.iter().all(|r| r.defect <= tolerance),
            table,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    pub k: f64,
    pub nodes: usize,
    pub h: f64,
    pub probes: usize,
    pub times: Vec<f64>,
    pub checks: Vec<CurvatureCheck>,
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CurvatureReport {
    fn new<T: Real>(space: &Space<T>, k: f64, probes: usize, times: &[f64]) -> Self {
        CurvatureReport {
            k,
            nodes: space.len(),
            h: space.max_spacing().to64(),
            probes,
            times: times.to_vec(),
            checks: Vec::new(),
            constants: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn check(&self, name: &str) -> Option<&CurvatureCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Appends the checks, constants and notes of `other`.
    pub fn merge(mut self, other: CurvatureReport) -> Self {
        self.checks.extend(other.checks);
        self.constants.extend(other.constants);
        self.notes.extend(other.notes);
        for t in other.times {
            if !self.times.contains(&t) {
                self.times.push(t);
            }
        }
        self.probes = self.probes.max(other.probes);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && *t <= 2.0)) {
        return Err(Error::domain("time grid must be a non-empty subset of (0, 2]"));
    }
    Ok(())
}

fn max_node<T: Real>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> f64 {
    a.iter().zip(b).fold(f64::NEG_INFINITY, |m, (x, y)| m.max(f(*x, *y).to64()))
}

/// Evaluates `defect(f, t)` over probes × times in parallel.
fn grid<T: Real>(
    probes: &[ScalarField<T>],
    times: &[f64],
    defect: impl Fn(&ScalarField<T>, f64) -> Result<f64> + Sync,
) -> Result<Vec<DefectRow>> {
    let pairs: Vec<(usize, f64)> = (0..probes.len()).flat_map(|i| times.iter().map(move |&t| (i, t))).collect();
    pairs
        .into_par_iter()
        .map(|(i, t)| Ok(DefectRow { probe: i, t, defect: defect(&probes[i], t)? }))
        .collect()
}

/// Worst node-wise value of Γ(P_t f) − e^{−2Kt} P_t Γ(f).
pub fn be2_check<T: Real>(space: &Space<T>, k: f64, probes: &[ScalarField<T>], times: &[f64]) -> Result<CurvatureReport> {
    check_times(times)?;
    let rows = grid(probes, times, |f, t| {
        let pf = space.apply_semigroup(f, T::of(t))?;
        let lhs = gamma(space, &pf, &pf)?;
        let rhs = space.apply_semigroup(&gamma(space, f, f)?, T::of(t))?;
        let c = T::of((-2.0 * k * t).exp());
        Ok(max_node(lhs.values(), rhs.values(), |a, b| a - c * b))
    })?;
    let mut report = CurvatureReport::new(space, k, probes.len(), times);
    report.checks.push(CurvatureCheck::from_rows("be2", CURVATURE_TOLERANCE, rows));
    Ok(report)
}

/// Worst node-wise value of √Γ(P_t f) − e^{−Kt} P_t √Γ(f). Negative round-off
/// in Γ is clamped at 0 before the root.
pub fn be1_check<T: Real>(space: &Space<T>, k: f64, probes: &[ScalarField<T>], times: &[f64]) -> Result<CurvatureReport> {
    check_times(times)?;
    let root = |g: ScalarField<T>| g.map(|v| v.max(T::zero()).sqrt());
    let rows = grid(probes, times, |f, t| {
        let pf = space.apply_semigroup(f, T::of(t))?;
        let lhs = root(gamma(space, &pf, &pf)?);
        let rhs = space.apply_semigroup(&root(gamma(space, f, f)?), T::of(t))?;
        let c = T::of((-k * t).exp());
        Ok(max_node(lhs.values(), rhs.values(), |a, b| a - c * b))
    })?;
    let mut report = CurvatureReport::new(space, k, probes.len(), times);
    report.checks.push(CurvatureCheck::from_rows("be1", CURVATURE_TOLERANCE, rows));
    Ok(report)
}

/// Worst node-wise value of 2 I_{2K}(t) Γ(P_t f) − (P_t f² − (P_t f)²), plus the
/// L^p-Γ constants c_p = sup ‖√Γ(P_t f)‖_p √(t ∧ 1) / ‖f‖_p for p ∈ {2, 4, ∞}.
pub fn reverse_poincare_check<T: Real>(
    space: &Space<T>,
    k: f64,
    probes: &[ScalarField<T>],
    times: &[f64],
) -> Result<CurvatureReport> {
    check_times(times)?;
    let rows = grid(probes, times, |f, t| {
        let pf = space.apply_semigroup(f, T::of(t))?;
        let pf2 = space.apply_semigroup(&f.mul(f), T::of(t))?;
        let g = gamma(space, &pf, &pf)?;
        let c = T::of(2.0 * i_k(2.0 * k, t));
        let var: Vec<T> = pf2.values().iter().zip(pf.values()).map(|(a, b)| *a - *b * *b).collect();
        Ok(max_node(g.values(), &var, |a, v| c * a - v))
    })?;
    let mut report = CurvatureReport::new(space, k, probes.len(), times);
    report.checks.push(CurvatureCheck::from_rows("reverse_poincare", CURVATURE_TOLERANCE, rows));

    let exponents = [("c_2", 2.0), ("c_4", 4.0), ("c_inf", f64::INFINITY)];
    let ratios: Vec<[f64; 3]> = grid(probes, times, |_, _| Ok(0.0))?
        .into_par_iter()
        .map(|row| {
            let f = &probes[row.probe];
            let pf = space.apply_semigroup(f, T::of(row.t))?;
            let root = gamma(space, &pf, &pf)?.map(|v| v.max(T::zero()).sqrt());
            let mut out = [0.0; 3];
            for (slot, (_, p)) in out.iter_mut().zip(exponents) {
                let den = lp_norm(space, f, T::of(p))?.to64();
                if den > 0.0 {
                    *slot = lp_norm(space, &root, T::of(p))?.to64() * row.t.min(1.0).sqrt() / den;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    for (j, (name, _)) in exponents.iter().enumerate() {
        report.constants.insert(name.to_string(), ratios.iter().fold(0.0_f64, |m, r| m.max(r[j])));
    }
    let c2 = report.constants["c_2"];
    let limit = std::f64::consts::FRAC_1_SQRT_2;
    report.checks.push(CurvatureCheck {
        name: "c_2".into(),
        worst_defect: c2 - limit,
        probe: None,
        t: None,
        tolerance: 0.05 * limit,
        holds: c2 <= 1.05 * limit,
        table: Vec::new(),
    });
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientInterpolation {
    pub estimate: f64,
    pub argmax: Option<usize>,
    pub skipped: usize,
}

/// sup over fields of ‖Γ f‖_p / (‖f‖_∞ ‖Δf + λf‖_p). Fields whose denominator
/// is below 1e−10 of ‖f‖_∞‖Δf‖_p + |λ|‖f‖_p are skipped.
pub fn gradient_interpolation_constant<T: Real>(
    space: &Space<T>,
    lambda: f64,
    fields: &[ScalarField<T>],
    p: f64,
) -> Result<GradientInterpolation> {
    if !(p == 2.0 || p.is_infinite()) {
        return Err(Error::domain(format!("gradient interpolation needs p ∈ {{2, ∞}}, got {p}")));
    }
    let pt = T::of(p);
    let ratios: Vec<Option<f64>> = fields
        .par_iter()
        .map(|f| {
            let lap = space.laplacian(f);
            let shifted = lap.add(&f.scale(T::of(lambda)));
            let den = lp_norm(space, &shifted, pt)?.to64();
            let reference = lp_norm(space, &lap, pt)?.to64() + lambda.abs() * lp_norm(space, f, pt)?.to64();
            let sup = f.max_abs().to64();
            if !(den > 1e-10 * reference) || sup == 0.0 {
                return Ok(None);
            }
            Ok(Some(lp_norm(space, &gamma(space, f, f)?, pt)?.to64() / (sup * den)))
        })
        .collect::<Result<_>>()?;
    let mut out = GradientInterpolation { estimate: 0.0, argmax: None, skipped: 0 };
    for (i, r) in ratios.iter().enumerate() {
        match r {
            None => out.skipped += 1,
            Some(v) if *v > out.estimate || out.argmax.is_none() => {
                out.estimate = *v;
                out.argmax = Some(i);
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Estimates the gradient interpolation constant on `space` and on a 2× refined
/// `fine` space with probes produced by `probes`; the estimate is considered
/// mesh-stable when the two agree within 20%.
pub fn gradient_interpolation_check<T: Real>(
    space: &Space<T>,
    fine: &Space<T>,
    k: f64,
    lambda: f64,
    p: f64,
    probes: impl Fn(&Space<T>) -> Result<Vec<ScalarField<T>>>,
) -> Result<CurvatureReport> {
    if lambda < (-k).max(0.0) {
        return Err(Error::domain(format!("λ = {lambda} is below K⁻ = {}", (-k).max(0.0))));
    }
    let coarse_fields = probes(space)?;
    let coarse = gradient_interpolation_constant(space, lambda, &coarse_fields, p)?;
    let refined = gradient_interpolation_constant(fine, lambda, &probes(fine)?, p)?;
    let change = if coarse.estimate > 0.0 { (refined.estimate / coarse.estimate - 1.0).abs() } else { 0.0 };
    let mut report = CurvatureReport::new(space, k, coarse_fields.len(), &[]);
    report.constants.insert("c_coarse".into(), coarse.estimate);
    report.constants.insert("c_fine".into(), refined.estimate);
    report.constants.insert("lambda".into(), lambda);
    report.constants.insert("p".into(), p);
    report.checks.push(CurvatureCheck {
        name: "gradient_interpolation_stability".into(),
        worst_defect: change,
        probe: coarse.argmax,
        t: None,
        tolerance: 0.2,
        holds: change <= 0.2,
        table: Vec::new(),
    });
    report.notes.push(format!(
        "universal constant certified only as mesh-stable: {} → {} nodes, {} and {} probes skipped",
        space.len(),
        fine.len(),
        coarse.skipped,
        refined.skipped
    ));
    Ok(report)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Gamma2Pairing {
    pub value: f64,
    /// ∫((Δf)² + |K|Γf + |Δf|√Γf√Γφ + ½√Γ(Γf)√Γφ)φ-type magnitude used for the tolerance.
    pub scale: f64,
    pub nonnegative: bool,
}

/// ∫[−½Γ(Γf, φ) + Δf Γ(f, φ) + ((Δf)² − KΓf)φ] dm for φ ≥ 0.
pub fn gamma2_pairing<T: Real>(space: &Space<T>, k: f64, f: &ScalarField<T>, phi: &ScalarField<T>) -> Result<Gamma2Pairing> {
    space.check(f)?;
    space.check(phi)?;
    if phi.min() < T::zero() {
        return Err(Error::domain("γ₂ test function must be nonnegative"));
    }
    let gf = gamma(space, f, f)?;
    let lap = space.laplacian(f);
    let a = gamma(space, &gf, phi)?;
    let b = gamma(space, f, phi)?;
    let kk = T::of(k);
    let half = T::of(0.5);
    let n = space.len();
    let (gv, lv, av, bv, pv) = (gf.values(), lap.values(), a.values(), b.values(), phi.values());
    let integrand: Vec<T> = (0..n).map(|i| -half * av[i] + lv[i] * bv[i] + (lv[i] * lv[i] - kk * gv[i]) * pv[i]).collect();
    let magnitude: Vec<T> =
        (0..n).map(|i| half * av[i].abs() + (lv[i] * bv[i]).abs() + (lv[i] * lv[i] + kk.abs() * gv[i]) * pv[i]).collect();
    let ones = vec![T::one(); n];
    let value = weighted_dot(space.measure(), &integrand, &ones).to64();
    let scale = weighted_dot(space.measure(), &magnitude, &ones).to64();
    Ok(Gamma2Pairing { value, scale, nonnegative: value >= -CURVATURE_TOLERANCE * scale })
}

/// ∫((Δf)² − KΓf) dm, the φ ≡ 1 value of the γ₂ pairing.
pub fn gamma2_integral<T: Real>(space: &Space<T>, k: f64, f: &ScalarField<T>) -> Result<f64> {
    let lap = space.laplacian(f);
    let g = gamma(space, f, f)?;
    let integrand = lap.mul(&lap).sub(&g.scale(T::of(k)));
    Ok(space.integrate(&integrand).to64())
}

/// γ₂ nonnegativity over probes × test functions φ.
pub fn gamma2_check<T: Real>(
    space: &Space<T>,
    k: f64,
    probes: &[ScalarField<T>],
    phis: &[ScalarField<T>],
) -> Result<CurvatureReport> {
    let rows: Vec<DefectRow> = (0..probes.len())
        .into_par_iter()
        .flat_map_iter(|i| (0..phis.len()).map(move |j| (i, j)))
        .map(|(i, j)| {
            let pairing = gamma2_pairing(space, k, &probes[i], &phis[j])?;
            let defect = if pairing.scale > 0.0 { -pairing.value / pairing.scale } else { 0.0 };
            Ok(DefectRow { probe: i, t: j as f64, defect })
        })
        .collect::<Result<_>>()?;
    let mut report = CurvatureReport::new(space, k, probes.len(), &[]);
    report.checks.push(CurvatureCheck::from_rows("gamma2_nonnegative", CURVATURE_TOLERANCE, rows));
    report.notes.push("gamma2 table: `t` holds the index of the test function φ".into());
    Ok(report)
}

/// Integrated Hessian bound |∫H[V](f,g)| ≤ (∫((ΔV)² − KΓV))^{1/2} ‖√Γf‖₄‖√Γg‖₄ over probe pairs,
/// and the deformation bound for b_V = Γ(V, ·) in both its L¹ form
/// ‖D^sym b_V‖_{4,4} ≤ ‖(ΔV)² − KΓV‖₁ and the square-root form obtained from the integral estimate.
pub fn hessian_bound_check<T: Real>(
    space: &Space<T>,
    k: f64,
    v: &ScalarField<T>,
    probes: &ProbeFamily<T>,
) -> Result<CurvatureReport> {
    let integral = gamma2_integral(space, k, v)?;
    let root = integral.max(0.0).sqrt();
    let four = T::of(4.0);
    let norms4: Vec<f64> = probes
        .fields()
        .par_iter()
        .map(|f| Ok(lp_norm(space, &gamma(space, f, f)?.map(|x| x.max(T::zero()).sqrt()), four)?.to64()))
        .collect::<Result<_>>()?;
    let n = probes.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let rows: Vec<DefectRow> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let h = hessian(space, v, &probes.fields()[i], &probes.fields()[j])?;
            let lhs = space.integrate(&h).to64().abs();
            let holder = norms4[i] * norms4[j];
            let scale = holder * root.max(1.0);
            let defect = if scale > 0.0 { (lhs - root * holder) / scale } else { 0.0 };
            Ok(DefectRow { probe: i * n + j, t: 0.0, defect })
        })
        .collect::<Result<_>>()?;
    let mut report = CurvatureReport::new(space, k, n, &[]);
    report.checks.push(CurvatureCheck::from_rows("hessian_integrated", CURVATURE_TOLERANCE, rows));

    let b = Derivation::gradient(space, v)?;
    let estimate = deformation_norm_estimate(space, &b, 4.0, 4.0, probes, T::zero())?.estimate;
    let lap = space.laplacian(v);
    let g = gamma(space, v, v)?;
    let l1 = lp_norm(space, &lap.mul(&lap).sub(&g.scale(T::of(k))), T::one())?.to64();
    report.constants.insert("deformation_44".into(), estimate);
    report.constants.insert("gamma2_integral".into(), integral);
    report.constants.insert("bound_l1".into(), l1);
    report.constants.insert("bound_sqrt".into(), root);
    for (name, bound) in [("deformation_l1", l1), ("deformation_sqrt", root)] {
        let tol = CURVATURE_TOLERANCE * bound.max(1.0);
        report.checks.push(CurvatureCheck {
            name: name.into(),
            worst_defect: estimate - bound,
            probe: None,
            t: None,
            tolerance: tol,
            holds: estimate - bound <= tol,
            table: Vec::new(),
        });
    }
    report.notes.push(format!(
        "pair probe index in hessian table is i·{n} + j; deformation estimate is a lower bound over {n} probes"
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, GridSpec, Potential};
    use std::f64::consts::PI;

    fn ou(n: usize) -> Space<f64> {
        Potential::Quadratic { c: 1.0 }.build_space(&GridSpec::interval_1d(-6.0, 6.0, n)).unwrap()
    }

    #[test]
    fn i_k_is_continuous_at_zero() {
        assert_eq!(i_k(0.0, 0.7), 0.7);
        for t in [0.1, 1.0, 2.0] {
            assert!((i_k(1e-8, t) - t).abs() <= 1e-7 * t);
        }
        assert!((i_k(2.0, 0.5) - (1f64.exp() - 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_probe_gives_zero_defects() {
        let s = ou(64);
        let probes = [s.constant(3.0)];
        assert!(be2_check(&s, 1.0, &probes, &[0.5]).unwrap().checks[0].worst_defect.abs() < 1e-12);
        // The root amplifies round-off in Γ(P_t c) ~ 1e−22.
        assert!(be1_check(&s, 1.0, &probes, &[0.5]).unwrap().checks[0].worst_defect.abs() < 1e-9);
        let rp = reverse_poincare_check(&s, 1.0, &probes, &[0.5]).unwrap();
        assert!(rp.checks[0].worst_defect.abs() < 1e-10);
        assert!(be2_check(&s, 1.0, &probes, &[2.5]).is_err());
    }

    #[test]
    fn ou_linear_mode_is_nearly_extremal() {
        let s = ou(512);
        let x = s.field_fn(|x| x[0]);
        let t = 0.5;
        let pf = s.apply_semigroup(&x, t).unwrap();
        let g = gamma(&s, &pf, &pf).unwrap();
        // Away from the reflecting ends Γ(P_t x) = e^{−2t}.
        let core: Vec<f64> = (0..s.len()).filter(|&i| s.coords(i)[0].abs() < 3.0).map(|i| g.values()[i]).collect();
        assert!(core.iter().all(|v| (v - (-2.0 * t).exp()).abs() < 5e-3));
        let probes = [x];
        let r = be2_check(&s, 1.0, &probes, &[t]).unwrap();
        assert!(r.holds(), "{}", r.checks[0].worst_defect);
        assert!(r.checks[0].worst_defect > -5e-3);
    }

    #[test]
    fn ou_and_torus_standard_probes() {
        let times = DEFAULT_TIMES;
        let o = ou(256);
        let probes = ProbeFamily::standard(&o, 7).unwrap().fields().to_vec();
        let r = be2_check(&o, 1.0, &probes, &times)
            .unwrap()
            .merge(be1_check(&o, 1.0, &probes, &times).unwrap())
            .merge(reverse_poincare_check(&o, 1.0, &probes, &times).unwrap());
        assert!(r.holds(), "{:?}", r.checks.iter().map(|c| (&c.name, c.worst_defect)).collect::<Vec<_>>());
        let t: Space<f64> = build_space(&GridSpec::torus_1d(2.0 * PI, 256), &vec![0.0; 256]).unwrap();
        let probes = ProbeFamily::standard(&t, 7).unwrap().fields().to_vec();
        let r = be2_check(&t, 0.0, &probes, &times).unwrap().merge(be1_check(&t, 0.0, &probes, &times).unwrap());
        assert!(r.holds());
        // BE₁ within tol implies BE₂ within 2·tol on the shared grid.
        let (b1, b2) = (r.check("be1").unwrap(), r.check("be2").unwrap());
        for (x, y) in b1.table.iter().zip(&b2.table) {
            if x.defect <= CURVATURE_TOLERANCE {
                assert!(y.defect <= 2.0 * CURVATURE_TOLERANCE);
            }
        }
        assert!(serde_json::from_str::<serde_json::Value>(&r.to_json().unwrap()).is_ok());
    }

    #[test]
    fn gradient_interpolation_scaling_and_degenerate() {
        let s = ou(128);
        let f = s.field_fn(|x| (-x[0] * x[0]).exp());
        let a = gradient_interpolation_constant(&s, 0.0, &[f.clone()], 2.0).unwrap();
        let b = gradient_interpolation_constant(&s, 0.0, &[f.scale(2.0)], 2.0).unwrap();
        assert!((a.estimate - b.estimate).abs() <= 1e-10 * a.estimate);
        let order = s.eigen_order();
        let e = s.eigenvector(order[3]);
        let lambda = -s.eigenvalues()[order[3]];
        let d = gradient_interpolation_constant(&s, lambda, &[e], 2.0).unwrap();
        assert_eq!((d.skipped, d.argmax), (1, None));
        assert!(gradient_interpolation_constant(&s, 0.0, &[f], 4.0).is_err());
    }

    #[test]
    fn gamma2_with_unit_test_function() {
        let s = ou(128);
        let f = s.field_fn(|x| (0.8 * x[0]).sin() + 0.1 * x[0] * x[0]);
        let p = gamma2_pairing(&s, 1.0, &f, &s.constant(1.0)).unwrap();
        let exact = gamma2_integral(&s, 1.0, &f).unwrap();
        assert!((p.value - exact).abs() <= 1e-12 * p.scale);
        assert!(gamma2_pairing(&s, 1.0, &f, &s.constant(-1.0)).is_err());
        assert!(gamma2_pairing(&s, 1.0, &s.constant(2.0), &s.constant(1.0)).unwrap().value.abs() < 1e-20);
    }

    #[test]
    fn hessian_bounds_on_torus_and_constant_potential() {
        let t: Space<f64> = build_space(&GridSpec::torus_1d(2.0 * PI, 128), &vec![0.0; 128]).unwrap();
        let probes = ProbeFamily::generate(&t, 3, 0).unwrap();
        let r = hessian_bound_check(&t, 0.0, &t.field_fn(|x| x[0].sin()), &probes).unwrap();
        assert!(r.holds(), "{:?}", r.checks.iter().map(|c| (&c.name, c.worst_defect)).collect::<Vec<_>>());
        let z = hessian_bound_check(&t, 0.0, &t.constant(1.0), &probes).unwrap();
        assert_eq!(z.constants["deformation_44"], 0.0);
        assert!(z.holds());
    }
}
