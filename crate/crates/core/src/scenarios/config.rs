//! Scenario configuration: schema, defaults, built-in templates and validation.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calculus::DerivationSpec;
use crate::continuity::COURANT_LIMIT;
use crate::curvature::DEFAULT_TIMES;
use crate::error::{Error, Result};
use crate::space::{GridSpec, Potential, ScalarField, Space};

pub const CONFIG_VERSION: u32 = 1;

pub const BUILTINS: [&str; 4] = ["euclidean-torus", "weighted-interval", "ou", "log-concave-1d"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Torus,
    Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceBlock {
    #[serde(default = "torus")]
    pub domain: DomainKind,
    #[serde(default = "one")]
    pub dimension: usize,
    #[serde(default = "nodes")]
    pub nodes: usize,
    #[serde(default = "two_pi")]
    pub period: f64,
    #[serde(default = "minus_six")]
    pub a: f64,
    #[serde(default = "six")]
    pub b: f64,
    #[serde(default = "flat")]
    pub potential: Potential,
}

fn torus() -> DomainKind {
    DomainKind::Torus
}
fn one() -> usize {
    1
}
fn nodes() -> usize {
    256
}
fn two_pi() -> f64 {
    2.0 * PI
}
fn minus_six() -> f64 {
    -6.0
}
fn six() -> f64 {
    6.0
}
fn flat() -> Potential {
    Potential::Flat
}

impl Default for SpaceBlock {
    fn default() -> Self {
        SpaceBlock { domain: torus(), dimension: 1, nodes: nodes(), period: two_pi(), a: -6.0, b: 6.0, potential: Potential::Flat }
    }
}

impl SpaceBlock {
    pub fn grid(&self) -> GridSpec {
        match self.domain {
            DomainKind::Torus => GridSpec::torus(self.dimension, self.period, self.nodes),
            DomainKind::Interval => GridSpec::interval(self.dimension, self.a, self.b, self.nodes),
        }
    }

    pub fn build(&self) -> Result<Space<f64>> {
        self.potential.build_space(&self.grid())
    }

    /// Analytic curvature bound inf V″ of the weighted space.
    pub fn curvature(&self) -> f64 {
        self.potential.curvature_lower_bound(&self.grid())
    }

    fn centre(&self) -> f64 {
        match self.domain {
            DomainKind::Torus => PI * self.period / (2.0 * PI),
            DomainKind::Interval => 0.5 * (self.a + self.b),
        }
    }
}

/// Initial densities (with respect to m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Uniform,
    /// exp(Σ (cos(x − c) − 1)/w²) on tori, exp(−Σ (x − c)²/(2w²)) on intervals, plus `floor`.
    Bump {
        #[serde(default)]
        center: Option<f64>,
        width: f64,
        #[serde(default)]
        floor: f64,
    },
}

impl InitialSpec {
    pub fn build(&self, block: &SpaceBlock, space: &Space<f64>) -> Result<ScalarField<f64>> {
        match *self {
            InitialSpec::Uniform => Ok(space.constant(1.0)),
            InitialSpec::Bump { center, width, floor } => {
                if !(width > 0.0) || floor < 0.0 {
                    return Err(Error::config("initial.width", "width must be positive and floor nonnegative"));
                }
                let c = center.unwrap_or_else(|| block.centre());
                let periodic = block.domain == DomainKind::Torus;
                let scale = 2.0 * PI / block.period;
                Ok(space.field_fn(|x| {
                    let e: f64 = x
                        .iter()
                        .map(|&x| {
                            if periodic {
                                ((scale * (x - c)).cos() - 1.0) / (scale * width).powi(2)
                            } else {
                                -(x - c).powi(2) / (2.0 * width * width)
                            }
                        })
                        .sum();
                    floor + e.exp()
                }))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    #[serde(default = "t_one")]
    pub t_end: f64,
    /// Filled from the Courant limit when absent.
    #[serde(default)]
    pub dt: Option<f64>,
}

fn t_one() -> f64 {
    1.0
}

impl Default for TimeBlock {
    fn default() -> Self {
        TimeBlock { t_end: 1.0, dt: None }
    }
}

fn times() -> Vec<f64> {
    DEFAULT_TIMES.to_vec()
}
fn tol_curv() -> f64 {
    5e-3
}

/// One check to run; tolerances default to the documented acceptance values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Generator symmetry and row sums, Γ duality, semigroup law, L^p contraction.
    Structure {
        #[serde(default = "tol_structure")]
        tolerance: f64,
    },
    Analyticity {
        #[serde(default = "tol_analyticity")]
        tolerance: f64,
    },
    Be2 {
        #[serde(default = "times")]
        times: Vec<f64>,
        #[serde(default = "tol_curv")]
        tolerance: f64,
    },
    Be1 {
        #[serde(default = "times")]
        times: Vec<f64>,
        #[serde(default = "tol_curv")]
        tolerance: f64,
    },
    ReversePoincare {
        #[serde(default = "times")]
        times: Vec<f64>,
        #[serde(default = "tol_curv")]
        tolerance: f64,
    },
    Gamma2 {
        #[serde(default = "tol_curv")]
        tolerance: f64,
    },
    Hessian {
        /// Defaults to the space potential, or a cos x profile on flat spaces.
        #[serde(default)]
        potential: Option<Potential>,
    },
    GradientInterpolation {
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default = "p_two")]
        p: f64,
    },
    Mehler {
        #[serde(default = "mehler_times")]
        times: Vec<f64>,
        #[serde(default = "gh_nodes")]
        nodes: usize,
        #[serde(default = "core")]
        core: f64,
        #[serde(default = "tol_curv")]
        tolerance: f64,
    },
    CommutatorDecay {
        #[serde(default = "alphas")]
        alphas: Vec<f64>,
        /// (q, r, s); "inf" is accepted for ∞.
        #[serde(default = "exponents", with = "exponent_list")]
        exponents: Vec<f64>,
        #[serde(default = "tol_decay")]
        tolerance: f64,
    },
    InterpolationIdentity {
        #[serde(default = "alpha")]
        alpha: f64,
        #[serde(default = "sixteen")]
        nodes: usize,
        #[serde(default)]
        space: Option<SpaceBlock>,
        #[serde(default)]
        field: Option<DerivationSpec>,
        #[serde(default = "tol_identity")]
        tolerance: f64,
    },
    Continuity {
        #[serde(default = "sigma")]
        sigma: f64,
        #[serde(default = "theta")]
        theta: f64,
        #[serde(default)]
        positivity_guard: bool,
        #[serde(default = "exponents_r", with = "exponent_list")]
        r: Vec<f64>,
    },
    VanishingViscosity {
        #[serde(default = "sigmas")]
        sigmas: Vec<f64>,
    },
    Uniqueness {
        #[serde(default = "levels")]
        levels: usize,
        #[serde(default = "sigma")]
        sigma: f64,
        #[serde(default = "min_order")]
        min_order: f64,
    },
    Superposition {
        #[serde(default = "particles")]
        particles: usize,
        #[serde(default = "checkpoints")]
        checkpoints: Vec<f64>,
        #[serde(default = "ode_step")]
        step: f64,
        #[serde(default = "tol_curv")]
        tolerance: f64,
    },
    Dissipation {
        #[serde(default)]
        potential: Option<Potential>,
        #[serde(default = "few_particles")]
        particles: usize,
        #[serde(default = "fine_step")]
        step: f64,
        #[serde(default = "tol_dissipation")]
        tolerance: f64,
    },
    SpeedIdentity {
        #[serde(default)]
        field: Option<DerivationSpec>,
        #[serde(default = "few_particles")]
        particles: usize,
        #[serde(default = "fine_step")]
        step: f64,
        #[serde(default = "tol_speed")]
        tolerance: f64,
    },
    NoBranching {
        #[serde(default)]
        field: Option<DerivationSpec>,
        #[serde(default = "branch_particles")]
        particles: usize,
        #[serde(default = "fine_step")]
        step: f64,
        #[serde(default = "tol_branch")]
        max_flagged_fraction: f64,
    },
    Compressibility {
        #[serde(default)]
        field: Option<DerivationSpec>,
        #[serde(default = "branch_particles")]
        particles: usize,
        /// Kernel bandwidth in units of the mesh width.
        #[serde(default = "four")]
        bandwidth: f64,
    },
}

/// Lebesgue exponents as numbers, with ∞ written as "inf".
mod exponent_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| if x.is_infinite() { Repr::Text("inf".into()) } else { Repr::Number(*x) })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Number(x) => Ok(x),
                Repr::Text(t) if t == "inf" || t == "∞" => Ok(f64::INFINITY),
                Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid exponent `{t}`"))),
            })
            .collect()
    }
}

fn tol_structure() -> f64 {
    1e-9
}
fn tol_analyticity() -> f64 {
    0.02
}
fn p_two() -> f64 {
    2.0
}
fn mehler_times() -> Vec<f64> {
    vec![0.25, 1.0]
}
fn gh_nodes() -> usize {
    40
}
fn core() -> f64 {
    3.0
}
fn alphas() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025, 0.0125]
}
fn exponents() -> Vec<f64> {
    vec![2.0, 4.0, 4.0]
}
fn tol_decay() -> f64 {
    0.1
}
fn alpha() -> f64 {
    0.1
}
fn sixteen() -> usize {
    16
}
fn tol_identity() -> f64 {
    1e-6
}
fn sigma() -> f64 {
    0.01
}
fn theta() -> f64 {
    0.5
}
fn exponents_r() -> Vec<f64> {
    vec![2.0, 4.0, f64::INFINITY]
}
fn sigmas() -> Vec<f64> {
    vec![0.08, 0.04, 0.02, 0.01]
}
fn levels() -> usize {
    4
}
fn min_order() -> f64 {
    0.8
}
fn particles() -> usize {
    100_000
}
fn checkpoints() -> Vec<f64> {
    vec![0.5, 1.0]
}
fn ode_step() -> f64 {
    2e-3
}
fn few_particles() -> usize {
    200
}
fn fine_step() -> f64 {
    1e-3
}
fn tol_dissipation() -> f64 {
    1e-4
}
fn tol_speed() -> f64 {
    0.02
}
fn branch_particles() -> usize {
    10_000
}
fn tol_branch() -> f64 {
    0.01
}
fn four() -> f64 {
    4.0
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Structure { .. } => "structure",
            Experiment::Analyticity { .. } => "analyticity",
            Experiment::Be2 { .. } => "be2",
            Experiment::Be1 { .. } => "be1",
            Experiment::ReversePoincare { .. } => "reverse_poincare",
            Experiment::Gamma2 { .. } => "gamma2",
            Experiment::Hessian { .. } => "hessian",
            Experiment::GradientInterpolation { .. } => "gradient_interpolation",
            Experiment::Mehler { .. } => "mehler",
            Experiment::CommutatorDecay { .. } => "commutator_decay",
            Experiment::InterpolationIdentity { .. } => "interpolation_identity",
            Experiment::Continuity { .. } => "continuity",
            Experiment::VanishingViscosity { .. } => "vanishing_viscosity",
            Experiment::Uniqueness { .. } => "uniqueness",
            Experiment::Superposition { .. } => "superposition",
            Experiment::Dissipation { .. } => "dissipation",
            Experiment::SpeedIdentity { .. } => "speed_identity",
            Experiment::NoBranching { .. } => "no_branching",
            Experiment::Compressibility { .. } => "compressibility",
        }
    }

    /// Parses a kind name with all parameters at their defaults.
    pub fn from_name(name: &str) -> Result<Self> {
        let json = format!("{{\"kind\": \"{}\"}}", name.replace('-', "_"));
        serde_json::from_str(&json).map_err(|_| Error::config("kind", format!("unknown experiment `{name}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "version")]
    pub version: u32,
    #[serde(default)]
    pub space: SpaceBlock,
    /// Declared curvature K; must equal inf V″ of the space.
    #[serde(default)]
    pub curvature: Option<f64>,
    #[serde(default = "default_field")]
    pub field: DerivationSpec,
    #[serde(default = "default_initial")]
    pub initial: InitialSpec,
    #[serde(default)]
    pub time: TimeBlock,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn version() -> u32 {
    CONFIG_VERSION
}
fn default_field() -> DerivationSpec {
    DerivationSpec::Cosine { amplitude: 1.0, frequency: 1.0, offset: 0.5 }
}
fn default_initial() -> InitialSpec {
    InitialSpec::Bump { center: None, width: 2f64.sqrt(), floor: 0.0 }
}

impl ScenarioConfig {
    /// Declared K, or the analytic one when none was given.
    pub fn k(&self) -> f64 {
        self.curvature.unwrap_or_else(|| self.space.curvature())
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn dt(&self) -> f64 {
        self.time.dt.expect("resolved config has dt")
    }

    /// Checks consistency and fills derived defaults (currently dt).
    pub fn resolve(mut self) -> Result<Self> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config("version", format!("unsupported version {}, expected {CONFIG_VERSION}", self.version)));
        }
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        let block = &self.space;
        if !(1..=2).contains(&block.dimension) {
            return Err(Error::config("space.dimension", "must be 1 or 2"));
        }
        if block.domain == DomainKind::Interval && !(block.b > block.a) {
            return Err(Error::config("space.b", "interval needs a < b"));
        }
        let analytic = block.curvature();
        if let Some(k) = self.curvature {
            if (k - analytic).abs() > 1e-12 * analytic.abs().max(1.0) {
                return Err(Error::config("curvature", format!("declared K = {k} but the potential gives inf V″ = {analytic}")));
            }
        }
        if !(self.time.t_end > 0.0) {
            return Err(Error::config("time.t_end", "must be positive"));
        }
        match self.time.dt {
            Some(dt) if !(dt > 0.0) => return Err(Error::config("time.dt", "must be positive")),
            Some(_) => {}
            None => {
                let space = block.build()?;
                let b = self.field.build(&space)?;
                let vmax = b
                    .velocity(&space, 0.0)?
                    .iter()
                    .flat_map(|c| c.iter())
                    .fold(0.0_f64, |m, v| m.max(v.abs()));
                let h = space.min_spacing();
                let courant = if vmax > 0.0 { 0.9 * COURANT_LIMIT * h / vmax } else { f64::INFINITY };
                let dt = courant.min(0.01);
                let steps = (self.time.t_end / dt).ceil();
                self.time.dt = Some(self.time.t_end / steps);
            }
        }
        Ok(self)
    }
}

/// Parses JSON (text starting with `{`) or TOML, rejects unknown keys and resolves defaults.
pub fn load_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::config(json_key(&e.to_string()), e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| Error::config(json_key(&e.to_string()), e.message().to_string()))?
    };
    cfg.resolve()
}

/// Extracts the offending key from a serde message such as "unknown field `foo`".
fn json_key(message: &str) -> String {
    message.split('`').nth(1).unwrap_or("<root>").to_string()
}

/// Built-in scenario templates.
pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    use Experiment as E;
    let interval = |a: f64, b: f64, n: usize, potential: Potential| SpaceBlock {
        domain: DomainKind::Interval,
        dimension: 1,
        nodes: n,
        period: two_pi(),
        a,
        b,
        potential,
    };
    let base = |name: &str, space: SpaceBlock, field: DerivationSpec, experiments: Vec<Experiment>| ScenarioConfig {
        name: name.to_string(),
        version: CONFIG_VERSION,
        space,
        curvature: None,
        field,
        initial: default_initial(),
        time: TimeBlock::default(),
        experiments,
        seed: 0,
        output: None,
    };
    let curvature_set = || {
        vec![
            E::Be2 { times: times(), tolerance: tol_curv() },
            E::Be1 { times: times(), tolerance: tol_curv() },
            E::ReversePoincare { times: times(), tolerance: tol_curv() },
        ]
    };
    let cfg = match name {
        "euclidean-torus" => base(
            name,
            SpaceBlock::default(),
            default_field(),
            vec![
                E::Structure { tolerance: tol_structure() },
                E::Analyticity { tolerance: tol_analyticity() },
                E::CommutatorDecay { alphas: alphas(), exponents: exponents(), tolerance: tol_decay() },
                E::InterpolationIdentity {
                    alpha: alpha(),
                    nodes: 16,
                    space: Some(SpaceBlock { dimension: 2, nodes: 64, ..SpaceBlock::default() }),
                    field: Some(DerivationSpec::Rotation { amplitude: 1.0 }),
                    tolerance: tol_identity(),
                },
                E::Be2 { times: times(), tolerance: tol_curv() },
                E::Be1 { times: times(), tolerance: tol_curv() },
                E::Continuity { sigma: sigma(), theta: theta(), positivity_guard: false, r: exponents_r() },
                E::NoBranching {
                    field: Some(DerivationSpec::RoughSine { exponent: 0.6, amplitude: 1.0 }),
                    particles: branch_particles(),
                    step: fine_step(),
                    max_flagged_fraction: tol_branch(),
                },
            ],
        ),
        "weighted-interval" => {
            let mut e = curvature_set();
            e.push(E::Gamma2 { tolerance: tol_curv() });
            e.push(E::GradientInterpolation { lambda: None, p: 2.0 });
            // The field concentrates mass at ±π; the guard keeps positive data positive there.
            e.push(E::Continuity { sigma: sigma(), theta: theta(), positivity_guard: true, r: exponents_r() });
            base(
                name,
                interval(-4.0, 4.0, 256, Potential::Quadratic { c: 0.5 }),
                DerivationSpec::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.0 },
                e,
            )
        }
        "ou" => {
            let mut e = curvature_set();
            e.push(E::Mehler { times: mehler_times(), nodes: gh_nodes(), core: core(), tolerance: tol_curv() });
            e.push(E::Hessian { potential: None });
            base(name, interval(-6.0, 6.0, 512, Potential::Quadratic { c: 1.0 }), DerivationSpec::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.0 }, e)
        }
        "log-concave-1d" => {
            let mut e = curvature_set();
            e.push(E::GradientInterpolation { lambda: None, p: 2.0 });
            e.push(E::Hessian { potential: None });
            base(name, interval(-3.0, 3.0, 256, Potential::Quartic { c: 1.0 }), DerivationSpec::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.0 }, e)
        }
        other => return Err(Error::config("name", format!("unknown built-in scenario `{other}`; expected one of {}", BUILTINS.join(", ")))),
    };
    cfg.resolve()
}

/// True when the space is the OU model: V = x²/2 on a 1D interval.
pub fn is_ou(block: &SpaceBlock) -> bool {
    block.dimension == 1 && block.domain == DomainKind::Interval && block.potential == Potential::Quadratic { c: 1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = load_config(r#"{"name": "t"}"#).unwrap();
        assert_eq!(cfg.space.nodes, 256);
        assert_eq!(cfg.time.t_end, 1.0);
        let dt = cfg.dt();
        let h = 2.0 * PI / 256.0;
        assert!(dt * 1.5 / h <= COURANT_LIMIT && dt > 0.0);
        let toml = load_config("name = \"t\"\n[space]\nnodes = 64\n").unwrap();
        assert_eq!(toml.space.nodes, 64);
    }

    #[test]
    fn curvature_consistency() {
        let ok = r#"{"name": "q", "curvature": 1.0,
            "space": {"domain": "interval", "potential": {"family": "quadratic", "c": 1.0}}}"#;
        assert_eq!(load_config(ok).unwrap().k(), 1.0);
        let bad = r#"{"name": "f", "curvature": 1.0}"#;
        assert!(matches!(load_config(bad), Err(Error::Config { key, .. }) if key == "curvature"));
    }

    #[test]
    fn unknown_keys_are_named() {
        match load_config(r#"{"name": "x", "spaec": {}}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "spaec"),
            other => panic!("{other:?}"),
        }
        match load_config(r#"{"name": "x", "experiments": [{"kind": "be2", "tolerence": 1}]}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "tolerence"),
            other => panic!("{other:?}"),
        }
        assert!(Experiment::from_name("be2").is_ok());
        assert!(Experiment::from_name("reverse-poincare").is_ok());
        assert!(Experiment::from_name("nope").is_err());
    }

    #[test]
    fn builtins_resolve_and_round_trip() {
        for name in BUILTINS {
            let cfg = builtin(name).unwrap();
            let json = serde_json::to_string(&cfg).unwrap();
            let back = load_config(&json).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
        assert_eq!(builtin("ou").unwrap().k(), 1.0);
        assert_eq!(builtin("log-concave-1d").unwrap().k(), 0.0);
        assert!(builtin("nope").is_err());
    }
}
