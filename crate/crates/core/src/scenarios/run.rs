//! Dispatch of scenario experiments onto the module checks.

use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{is_ou, DomainKind, Experiment, InitialSpec, ScenarioConfig, SpaceBlock};
use super::mehler::mehler_reference;
use crate::calculus::{gamma, Derivation, DerivationSpec, ProbeFamily};
use crate::commutator::{decay_study, interpolation_identity_check, Exponents};
use crate::continuity::{
    apriori_check, entropy_trace, solve_viscous_ce, uniqueness_probe, vanishing_viscosity, write_trace_csv, CeConfig, Entropy,
    EntropyFamily, LadderSpec, ProbeLevel, SchemeSetting,
};
use crate::curvature::{
    be1_check, be2_check, gamma2_integral, gamma2_pairing, gradient_interpolation_check, hessian_bound_check,
    reverse_poincare_check, CurvatureReport,
};
use crate::error::{Error, Result};
use crate::flow::{
    compressibility, dissipation_check, flow_semigroup_defect, integrate_flow, no_branching_check, speed_identity_check,
    superposition_check, FlowConfig, Initial,
};
use crate::space::{analyticity_constant, lp_norm, Potential, ScalarField, Space};

/// One reported quantity; `tolerance`/`passed` are absent for informational values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub passed: Option<bool>,
}

impl Metric {
    /// value ≤ tolerance.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Metric { name: name.into(), value, tolerance: Some(tolerance), passed: Some(value <= tolerance) }
    }

    /// value ≥ tolerance.
    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Metric { name: name.into(), value, tolerance: Some(tolerance), passed: Some(value >= tolerance) }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Metric { name: name.into(), value: if ok { 1.0 } else { 0.0 }, tolerance: None, passed: Some(ok) }
    }

    pub fn info(name: &str, value: f64) -> Self {
        Metric { name: name.into(), value, tolerance: None, passed: None }
    }
}

/// A CSV attachment written next to the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub index: usize,
    pub kind: String,
    pub passed: bool,
    pub metrics: Vec<Metric>,
    pub artifacts: Vec<Artifact>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub k: f64,
    pub dimension: usize,
    pub nodes: usize,
    pub passed: bool,
    pub experiments: Vec<ExperimentResult>,
    pub wall_clock_s: f64,
    pub version: String,
}

#[derive(Default)]
struct Outcome {
    metrics: Vec<Metric>,
    artifacts: Vec<Artifact>,
    notes: Vec<String>,
}

struct Context<'a> {
    cfg: &'a ScenarioConfig,
    space: Space<f64>,
    field: Derivation<f64>,
    u0: ScalarField<f64>,
    probes: OnceLock<ProbeFamily<f64>>,
}

impl Context<'_> {
    fn probes(&self) -> Result<&ProbeFamily<f64>> {
        if let Some(p) = self.probes.get() {
            return Ok(p);
        }
        let p = ProbeFamily::standard(&self.space, self.cfg.seed)?;
        Ok(self.probes.get_or_init(|| p))
    }

    fn k(&self) -> f64 {
        self.cfg.k()
    }

    fn t_end(&self) -> f64 {
        self.cfg.time.t_end
    }

    fn dt(&self) -> f64 {
        self.cfg.dt()
    }

    fn field(&self, spec: &Option<DerivationSpec>) -> Result<Derivation<f64>> {
        match spec {
            Some(s) => s.build(&self.space),
            None => Ok(self.field.clone()),
        }
    }

    /// Potential field for gradient checks: the explicit one, the space potential,
    /// or cos x on flat spaces.
    fn potential(&self, explicit: &Option<Potential>) -> ScalarField<f64> {
        let p = explicit.clone().unwrap_or_else(|| match self.cfg.space.potential {
            Potential::Flat => Potential::Cosine { a: 1.0 },
            ref p => p.clone(),
        });
        self.space.field_fn(|x| p.eval(x))
    }

    /// Evenly spread points, one per cell centre of an n-point lattice.
    fn lattice(&self, n: usize) -> Vec<Vec<f64>> {
        let axes = self.space.axes();
        let d = axes.len();
        let per_axis = (n as f64).powf(1.0 / d as f64).round().max(1.0) as usize;
        let total = per_axis.pow(d as u32);
        (0..total)
            .map(|k| {
                (0..d)
                    .map(|a| {
                        let i = (k / per_axis.pow(a as u32)) % per_axis;
                        axes[a].start + axes[a].length * (i as f64 + 0.5) / per_axis as f64
                    })
                    .collect()
            })
            .collect()
    }
}

fn curvature_outcome(report: &CurvatureReport, tolerance: f64) -> Outcome {
    let mut out = Outcome::default();
    for c in &report.checks {
        let tol = if c.tolerance == crate::curvature::CURVATURE_TOLERANCE { tolerance } else { c.tolerance };
        out.metrics.push(Metric::at_most(&format!("{}_worst_defect", c.name), c.worst_defect, tol));
    }
    for (k, v) in &report.constants {
        out.metrics.push(Metric::info(k, *v));
    }
    let mut csv = String::from("check,probe,t,defect\n");
    for c in &report.checks {
        for r in &c.table {
            csv.push_str(&format!("{},{},{},{:.10e}\n", c.name, r.probe, r.t, r.defect));
        }
    }
    out.artifacts.push(Artifact { name: "defects".into(), csv });
    out.notes.extend(report.notes.iter().cloned());
    out
}

fn bump_family(block: &SpaceBlock, space: &Space<f64>) -> Result<Vec<ScalarField<f64>>> {
    let mut phis = vec![space.constant(1.0)];
    let (lo, len) = match block.domain {
        DomainKind::Torus => (0.0, block.period),
        DomainKind::Interval => (block.a, block.b - block.a),
    };
    for j in 0..4 {
        let centre = lo + len * (j as f64 + 0.5) / 4.0;
        let spec = InitialSpec::Bump { center: Some(centre), width: 0.15 * len, floor: 0.0 };
        phis.push(spec.build(block, space)?);
    }
    Ok(phis)
}

fn run_one(ctx: &Context<'_>, exp: &Experiment) -> Result<Outcome> {
    let space = &ctx.space;
    let mut out = Outcome::default();
    match exp {
        Experiment::Structure { tolerance } => {
            let d = space.diagnostics();
            out.metrics.push(Metric::at_most("row_sum_defect", d.row_sum_defect, *tolerance));
            out.metrics.push(Metric::at_most("symmetry_defect", d.symmetry_defect, *tolerance));
            let fields = ctx.probes()?.fields();
            let take = fields.len().min(8);
            let mut duality = 0.0_f64;
            for f in &fields[..take] {
                for g in &fields[..take] {
                    let lhs = space.integrate(&gamma(space, f, g)?);
                    let rhs = -space.inner(f, &space.laplacian(g));
                    let scale = (space.integrate(&gamma(space, f, f)?) * space.integrate(&gamma(space, g, g)?)).sqrt();
                    duality = duality.max((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE));
                }
            }
            out.metrics.push(Metric::at_most("gamma_duality", duality, *tolerance));
            let mut law = 0.0_f64;
            let mut contraction = 0.0_f64;
            for f in &fields[..take] {
                let n2 = lp_norm(space, f, 2.0)?;
                for t in [0.1, 0.5, 1.0] {
                    for s in [0.1, 0.5, 1.0] {
                        let a = space.apply_semigroup(f, t + s)?;
                        let b = space.apply_semigroup(&space.apply_semigroup(f, s)?, t)?;
                        law = law.max(lp_norm(space, &a.sub(&b), 2.0)? / n2);
                    }
                    let pf = space.apply_semigroup(f, t)?;
                    for p in [1.0, 2.0, 4.0, f64::INFINITY] {
                        let before = lp_norm(space, f, p)?;
                        contraction = contraction.max((lp_norm(space, &pf, p)? - before) / before);
                    }
                }
            }
            out.metrics.push(Metric::at_most("semigroup_law", law, *tolerance));
            out.metrics.push(Metric::at_most("lp_contraction_excess", contraction, *tolerance));
        }
        Experiment::Analyticity { tolerance } => {
            let ladder: Vec<f64> = (0..64).map(|i| 0.01 * 99f64.powf(i as f64 / 63.0)).collect();
            let r = analyticity_constant(space, 2, &ladder, ctx.probes()?.fields())?;
            let target = (-1f64).exp();
            out.metrics.push(Metric::at_most("relative_gap_to_inverse_e", (r.estimate / target - 1.0).abs(), *tolerance));
            out.metrics.push(Metric::info("estimate", r.estimate));
            out.metrics.push(Metric::flag("log_bound", r.log_bound_holds));
        }
        Experiment::Be2 { times, tolerance } => {
            out = curvature_outcome(&be2_check(space, ctx.k(), ctx.probes()?.fields(), times)?, *tolerance);
        }
        Experiment::Be1 { times, tolerance } => {
            out = curvature_outcome(&be1_check(space, ctx.k(), ctx.probes()?.fields(), times)?, *tolerance);
        }
        Experiment::ReversePoincare { times, tolerance } => {
            out = curvature_outcome(&reverse_poincare_check(space, ctx.k(), ctx.probes()?.fields(), times)?, *tolerance);
        }
        Experiment::Gamma2 { tolerance } => {
            let phis = bump_family(&ctx.cfg.space, space)?;
            let fields = ctx.probes()?.fields();
            let mut worst = f64::NEG_INFINITY;
            let mut unit_gap = 0.0_f64;
            for f in fields {
                for (j, phi) in phis.iter().enumerate() {
                    let p = gamma2_pairing(space, ctx.k(), f, phi)?;
                    if p.scale > 0.0 {
                        worst = worst.max(-p.value / p.scale);
                        if j == 0 {
                            unit_gap = unit_gap.max((p.value - gamma2_integral(space, ctx.k(), f)?).abs() / p.scale);
                        }
                    }
                }
            }
            out.metrics.push(Metric::at_most("negativity", worst, *tolerance));
            out.metrics.push(Metric::at_most("unit_test_function_gap", unit_gap, 1e-10));
        }
        Experiment::Hessian { potential } => {
            let v = ctx.potential(potential);
            let probes = ProbeFamily::generate(space, ctx.cfg.seed, 0)?;
            out = curvature_outcome(&hessian_bound_check(space, ctx.k(), &v, &probes)?, crate::curvature::CURVATURE_TOLERANCE);
        }
        Experiment::GradientInterpolation { lambda, p } => {
            let lambda = lambda.unwrap_or((-ctx.k()).max(0.0));
            let fine = SpaceBlock { nodes: 2 * ctx.cfg.space.nodes, ..ctx.cfg.space.clone() }.build()?;
            let seed = ctx.cfg.seed;
            let r = gradient_interpolation_check(space, &fine, ctx.k(), lambda, *p, |s| Ok(ProbeFamily::generate(s, seed, 0)?.fields().to_vec()))?;
            out = curvature_outcome(&r, 0.2);
        }
        Experiment::Mehler { times, nodes, core, tolerance } => {
            if !is_ou(&ctx.cfg.space) {
                return Err(Error::Precondition("Mehler reference needs the OU space (V = x²/2 on an interval)".into()));
            }
            let funcs: [(&str, fn(f64) -> f64); 3] = [("x", |x| x), ("x2", |x| x * x), ("sin", f64::sin)];
            for (name, f) in funcs {
                let field = space.field_fn(|x| f(x[0]));
                for &t in times {
                    let p = space.apply_semigroup(&field, t)?;
                    let m = mehler_reference(space, f, t, *nodes)?;
                    let err = (0..space.len())
                        .filter(|&i| space.coords(i)[0].abs() <= *core)
                        .map(|i| (p.values()[i] - m.values()[i]).abs())
                        .fold(0.0, f64::max);
                    out.metrics.push(Metric::at_most(&format!("mehler_{name}_t{t}"), err, *tolerance));
                }
            }
        }
        Experiment::CommutatorDecay { alphas, exponents, tolerance } => {
            if exponents.len() != 3 {
                return Err(Error::config("exponents", "expected [q, r, s]"));
            }
            let ex = Exponents::new(exponents[0], exponents[1], exponents[2])?;
            let st = decay_study(space, &ctx.field, &ctx.u0, alphas, ex, ctx.probes()?)?;
            let first = st.norm_sum.first().copied().unwrap_or(0.0);
            let ratio = if first > 0.0 { st.decay_ratio } else { 0.0 };
            out.metrics.push(Metric::at_most("decay_ratio", ratio, *tolerance));
            out.metrics.push(Metric::flag("monotone_trend", st.monotone));
            out.metrics.push(Metric::flag("continuous", st.continuous));
            out.metrics.push(Metric::at_most("arcsine_quadrature_error", st.quadrature_error, 1e-8));
            out.metrics.push(Metric::info("calibrated_c", st.calibrated_c));
            out.metrics.push(Metric::info("bound_rhs", st.bound_rhs));
            out.metrics.push(Metric::info("mesh_floor", st.mesh_floor));
            let mut csv = Vec::new();
            st.write_csv(&mut csv)?;
            out.artifacts.push(Artifact { name: "decay".into(), csv: String::from_utf8_lossy(&csv).into_owned() });
            out.notes.extend(st.notes);
        }
        Experiment::InterpolationIdentity { alpha, nodes, space: block, field, tolerance } => {
            let block = block.clone().unwrap_or_else(|| ctx.cfg.space.clone());
            let s = block.build()?;
            let b = field.as_ref().unwrap_or(&ctx.cfg.field).build(&s)?;
            let u = ctx.cfg.initial.build(&block, &s)?;
            let probes = ProbeFamily::generate(&s, ctx.cfg.seed, 0)?;
            // Distinct weights: the family holds ± pairs that cancel in a plain sum.
            let f = probes.fields().iter().enumerate().fold(s.zeros(), |acc, (k, g)| acc.add(&g.scale((k + 1) as f64)));
            let r = interpolation_identity_check(&s, &b, &u, &f, *alpha, *nodes)?;
            out.metrics.push(Metric::at_most("relative_residual", r.residual / r.scale.max(f64::MIN_POSITIVE), *tolerance));
            out.metrics.push(Metric::info("lhs", r.lhs));
            out.metrics.push(Metric::info("rhs", r.rhs));
        }
        Experiment::Continuity { sigma, theta, positivity_guard, r } => {
            let mut cfg = CeConfig::new(*sigma, ctx.t_end(), ctx.dt()).theta(*theta);
            cfg.positivity_guard = *positivity_guard;
            let sol = solve_viscous_ce(space, &ctx.field, &ctx.u0, &cfg)?;
            out.metrics.push(Metric::at_most("mass_drift_per_time", sol.mass_drift() / ctx.t_end(), 1e-10));
            for &p in r {
                let a = apriori_check(space, &sol, p)?;
                out.metrics.push(Metric::at_most(&format!("apriori_ratio_r{p}"), a.worst_ratio, 1.0));
            }
            let e = entropy_trace(space, &sol, &EntropyFamily::new(Entropy::Square)?, &ctx.field)?;
            out.metrics.push(Metric::at_most("entropy_square_residual", e.max_residual, e.tolerance));
            let mut csv = Vec::new();
            write_trace_csv(&sol, &mut csv)?;
            out.artifacts.push(Artifact { name: "trace".into(), csv: String::from_utf8_lossy(&csv).into_owned() });
        }
        Experiment::VanishingViscosity { sigmas } => {
            let (_, r) = vanishing_viscosity(space, &ctx.field, &ctx.u0, sigmas, ctx.t_end(), ctx.dt())?;
            out.metrics.push(Metric::at_least("min_relative_value", r.min_relative_value, -1e-12));
            out.metrics.push(Metric::at_least("order", r.order, 0.0));
            let mut csv = String::from("sigma,reference_l1\n");
            for (s, e) in r.sigmas.iter().zip(&r.reference_l1) {
                csv.push_str(&format!("{s:.10e},{e:.10e}\n"));
            }
            out.artifacts.push(Artifact { name: "viscosity".into(), csv });
            out.notes.extend(r.flags);
        }
        Experiment::Uniqueness { levels, sigma, min_order } => {
            let levels = *levels;
            let coarse = (ctx.cfg.space.nodes >> (levels.saturating_sub(1))).max(8);
            let cfg = ctx.cfg;
            let problem = |k: usize| -> Result<ProbeLevel<f64>> {
                let block = SpaceBlock { nodes: coarse << k, ..cfg.space.clone() };
                let s = block.build()?;
                let b = cfg.field.build(&s)?;
                let u0 = cfg.initial.build(&block, &s)?;
                Ok(ProbeLevel { space: s, b, u0 })
            };
            let settings = [
                SchemeSetting { theta: 0.5, positivity_guard: false, sigma_factor: 1.0 },
                SchemeSetting { theta: 1.0, positivity_guard: false, sigma_factor: 1.0 },
            ];
            let dt0 = ctx.dt() * (ctx.cfg.space.nodes as f64 / coarse as f64);
            let r = uniqueness_probe(problem, settings, &LadderSpec { levels, sigma0: *sigma, dt0, t_end: ctx.t_end() })?;
            out.metrics.push(Metric::at_least("order", if r.order.is_nan() { f64::INFINITY } else { r.order }, *min_order));
            out.metrics.push(Metric::flag("passes", r.passes));
        }
        Experiment::Superposition { particles, checkpoints, step, tolerance } => {
            let steps_for = |t: f64| (t / step).round() as usize;
            let gcd = |mut a: usize, mut b: usize| {
                while b != 0 {
                    (a, b) = (b, a % b);
                }
                a
            };
            let every = checkpoints.iter().map(|&t| steps_for(t)).fold(0, gcd).max(1);
            let t_end = checkpoints.iter().cloned().fold(0.0, f64::max);
            let ce = solve_viscous_ce(space, &ctx.field, &ctx.u0, &CeConfig::new(0.0, t_end, *step).store_every(every))?;
            let fc = FlowConfig::new(t_end, *step).sample_every(every).seed(ctx.cfg.seed);
            let e = integrate_flow(space, &ctx.field, Initial::Density(&ctx.u0, *particles), &fc)?;
            let r = superposition_check(space, &e, &ce, checkpoints)?;
            out.metrics.push(Metric::at_most("marginal_error", r.marginal_error.iter().cloned().fold(0.0, f64::max), *tolerance));
            out.metrics.push(Metric::info("sampling_scale", r.sampling_scale));
            if !ctx.field.is_time_dependent() {
                let pts = ctx.lattice(100);
                let d = flow_semigroup_defect(space, &ctx.field, &pts, 0.5 * t_end, 0.5 * t_end, *step)?;
                out.metrics.push(Metric::at_most("flow_semigroup_defect", d, 1e-6));
            }
            let mut csv = Vec::new();
            r.write_csv(&mut csv)?;
            out.artifacts.push(Artifact { name: "marginals".into(), csv: String::from_utf8_lossy(&csv).into_owned() });
        }
        Experiment::Dissipation { potential, particles, step, tolerance } => {
            let v = ctx.potential(potential);
            let b = Derivation::gradient(space, &v)?;
            let e = integrate_flow(space, &b, Initial::Points(ctx.lattice(*particles)), &FlowConfig::new(ctx.t_end(), *step))?;
            let d = dissipation_check(space, &e, &v)?;
            out.metrics.push(Metric::at_most("residual_per_time", d.per_unit_time, *tolerance));
            out.metrics.push(Metric::at_most("monotone_violations", d.monotone_violations as f64, 0.0));
            out.metrics.push(Metric::info("speed_median_residual", d.speed.median));
        }
        Experiment::SpeedIdentity { field, particles, step, tolerance } => {
            let b = ctx.field(&field.clone().or(Some(DerivationSpec::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.0 })))?;
            let e = integrate_flow(space, &b, Initial::Points(ctx.lattice(*particles)), &FlowConfig::new(ctx.t_end(), *step))?;
            let r = speed_identity_check(space, &e, &b, ctx.probes()?)?;
            out.metrics.push(Metric::at_most("median_relative_residual", r.median, *tolerance));
            out.metrics.push(Metric::info("p90_relative_residual", r.p90));
        }
        Experiment::NoBranching { field, particles, step, max_flagged_fraction } => {
            let b = ctx.field(field)?;
            let every = ((ctx.t_end() / step).round() as usize / 10).max(1);
            let a = FlowConfig::new(ctx.t_end(), *step).sample_every(every);
            let c = FlowConfig::new(ctx.t_end(), 0.5 * step).sample_every(2 * every);
            let r = no_branching_check(space, &b, &ctx.lattice(*particles), [&a, &c], None)?;
            out.metrics.push(Metric::at_most("flagged_fraction", r.flagged_fraction, *max_flagged_fraction));
            out.metrics.push(Metric::info("max_gap", r.max_gap));
            out.metrics.push(Metric::info("tolerance", r.tolerance));
        }
        Experiment::Compressibility { field, particles, bandwidth } => {
            let b = ctx.field(field)?;
            let one = space.constant(1.0);
            let every = ((ctx.t_end() / ctx.dt()).round() as usize / 10).max(1);
            let fc = FlowConfig::new(ctx.t_end(), ctx.dt()).sample_every(every).seed(ctx.cfg.seed);
            let e = integrate_flow(space, &b, Initial::Density(&one, *particles), &fc)?;
            let c = compressibility(space, &e, bandwidth * space.max_spacing())?;
            let ce = solve_viscous_ce(space, &b, &one, &CeConfig::new(0.0, ctx.t_end(), ctx.dt()).store_every(every))?;
            let oracle = ce.fields.iter().map(|u| u.max()).fold(f64::NEG_INFINITY, f64::max);
            out.metrics.push(Metric::at_most("relative_gap_to_ce", (c.estimate / oracle - 1.0).abs(), 0.1 + c.error_bar));
            out.metrics.push(Metric::info("estimate", c.estimate));
            out.metrics.push(Metric::info("ce_oracle", oracle));
            out.metrics.push(Metric::info("error_bar", c.error_bar));
        }
    }
    Ok(out)
}

/// Runs every experiment of a resolved config. Failures and non-fatal errors are
/// recorded per experiment; a numerical error aborts the run.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let start = Instant::now();
    let space = cfg.space.build()?;
    let field = cfg.field.build(&space)?;
    let u0 = cfg.initial.build(&cfg.space, &space)?;
    let ctx = Context { cfg, space, field, u0, probes: OnceLock::new() };
    let mut experiments = Vec::with_capacity(cfg.experiments.len());
    for (index, exp) in cfg.experiments.iter().enumerate() {
        let t0 = Instant::now();
        let (outcome, error) = match run_one(&ctx, exp) {
            Ok(o) => (o, None),
            Err(e @ Error::Numerical { .. }) => return Err(e),
            Err(e) => (Outcome::default(), Some(e.to_string())),
        };
        let passed = error.is_none() && outcome.metrics.iter().all(|m| m.passed != Some(false));
        experiments.push(ExperimentResult {
            index,
            kind: exp.name().to_string(),
            passed,
            metrics: outcome.metrics,
            artifacts: outcome.artifacts,
            notes: outcome.notes,
            error,
            wall_clock_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(ScenarioResult {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        k: cfg.k(),
        dimension: cfg.space.dimension,
        nodes: cfg.space.nodes,
        passed: experiments.iter().all(|e| e.passed),
        experiments,
        wall_clock_s: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}
