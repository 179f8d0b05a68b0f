//! Executable scenarios for the growth statements about linear ODEs and
//! their supporting lemmas, each producing a [`Report`] with evidence tables.
//!
//! A [`Suite`] is a versioned JSON document listing [`Scenario`]s. The
//! [`Runner`] executes them in order, sharing solution bases between
//! scenarios that integrate the same equation with the same settings.

mod intervals;
mod lemmas;
mod props;
mod report;
mod theorems;

pub use intervals::{IntervalSet, LogInterval};
pub use report::{Check, Environment, EvidenceTable, ExpectedNote, Hypothesis, Metadata, Relation, Report, Verdict};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::growth::{Mode, RadialGrid};
use crate::odes::{solution_basis, BasisOptions, Fan, LinearODE, RayOptions, RaySet, SolutionBasis};
use crate::scales::{ScaleFunction, ScaleKind, ScaleTriple};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const SUITE_VERSION: u32 = 1;

/// The suite shipped with the crate.
pub const DEFAULT_SUITE_JSON: &str = include_str!("default_suite.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
}

impl Suite {
    pub fn from_json(text: &str) -> Result<Self> {
        let suite: Suite = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn default_suite() -> Self {
        Self::from_json(DEFAULT_SUITE_JSON).expect("bundled suite is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SUITE_VERSION {
            return Err(Error::Config(format!("suite version {} (supported: {SUITE_VERSION})", self.version)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.scenarios {
            if s.id.is_empty() || !s.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::Config(format!("scenario id `{}` must be [A-Za-z0-9_-]+", s.id)));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Config(format!("duplicate scenario id `{}`", s.id)));
            }
            s.run.validate().map_err(|e| Error::Config(format!("{}: {e}", s.id)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    #[default]
    Pass,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub expect: Expectation,
    pub run: ScenarioKind,
}

impl Scenario {
    /// Whether `report` meets this scenario's expectation.
    pub fn satisfied_by(&self, report: &Report) -> bool {
        match self.expect {
            Expectation::Pass => report.verdict == Verdict::Pass,
            Expectation::Inapplicable => report.verdict == Verdict::Inapplicable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    Theorem1(TheoremConfig),
    Theorem2(TheoremConfig),
    Theorem3(TheoremConfig),
    Theorem4(TheoremConfig),
    PropOrderAlgebra(PropOrderConfig),
    PropTypeAlgebra(PropTypeConfig),
    LemmaLogderiv(LogDerivConfig),
    LemmaWimanValiron(WimanValironConfig),
    LemmaMpBound(MpBoundConfig),
    LemmaIntervalMeasure(IntervalMeasureConfig),
    ZeroBoundProperty(ZeroBoundConfig),
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Theorem1(_) => "theorem1",
            ScenarioKind::Theorem2(_) => "theorem2",
            ScenarioKind::Theorem3(_) => "theorem3",
            ScenarioKind::Theorem4(_) => "theorem4",
            ScenarioKind::PropOrderAlgebra(_) => "prop_order_algebra",
            ScenarioKind::PropTypeAlgebra(_) => "prop_type_algebra",
            ScenarioKind::LemmaLogderiv(_) => "lemma_logderiv",
            ScenarioKind::LemmaWimanValiron(_) => "lemma_wiman_valiron",
            ScenarioKind::LemmaMpBound(_) => "lemma_mp_bound",
            ScenarioKind::LemmaIntervalMeasure(_) => "lemma_interval_measure",
            ScenarioKind::ZeroBoundProperty(_) => "zero_bound_property",
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("tolerance `{name}` = {v} must be positive")))
            }
        };
        match self {
            ScenarioKind::Theorem1(c) | ScenarioKind::Theorem2(c) | ScenarioKind::Theorem3(c) | ScenarioKind::Theorem4(c) => {
                let t = &c.tolerances;
                positive("shifted", t.shifted)?;
                positive("plain", t.plain)?;
                positive("type_rel", t.type_rel)?;
                positive("dead_band", t.dead_band)?;
                positive("tol", c.integration.tol)?;
                c.grid.radial()?;
                if matches!(self, ScenarioKind::Theorem2(_)) && c.lambda.is_none() {
                    return Err(Error::Config("theorem2 needs `lambda`".into()));
                }
                if let Some(o) = &c.axis_oracle {
                    positive("axis_oracle.rel_tol", o.rel_tol)?;
                }
            }
            ScenarioKind::PropOrderAlgebra(c) => {
                positive("tol", c.tol)?;
                positive("scalar_tol", c.scalar_tol)?;
                c.grid.radial()?;
            }
            ScenarioKind::PropTypeAlgebra(c) => {
                positive("order_tol", c.order_tol)?;
                positive("type_rel", c.type_rel)?;
                c.grid.radial()?;
            }
            ScenarioKind::LemmaLogderiv(c) => {
                positive("epsilon", c.epsilon)?;
                positive("bound_factor", c.bound_factor)?;
                positive("exclusion_budget", c.exclusion_budget)?;
                c.grid.radial()?;
            }
            ScenarioKind::LemmaWimanValiron(c) => {
                positive("fraction", c.fraction)?;
                for p in &c.points {
                    positive("points.tol", p.tol)?;
                }
                c.grid.radial()?;
            }
            ScenarioKind::LemmaMpBound(c) => {
                positive("bound_factor", c.bound_factor)?;
                c.grid.radial()?;
            }
            ScenarioKind::LemmaIntervalMeasure(c) => positive("tol", c.tol)?,
            ScenarioKind::ZeroBoundProperty(c) => positive("coefficient_bound", c.coefficient_bound)?,
        }
        Ok(())
    }
}

/// An expected value together with where it comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub value: f64,
    pub provenance: String,
}

/// Scale triple by catalog names; identity by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleSpec {
    pub alpha: ScaleKind,
    pub beta: ScaleKind,
    pub gamma: ScaleKind,
}

impl Default for TripleSpec {
    fn default() -> Self {
        TripleSpec { alpha: ScaleKind::Identity {}, beta: ScaleKind::Identity {}, gamma: ScaleKind::Identity {} }
    }
}

impl TripleSpec {
    pub fn build(&self) -> Result<ScaleTriple> {
        Ok(ScaleTriple::new(
            ScaleFunction::from_kind(self.alpha)?,
            ScaleFunction::from_kind(self.beta)?,
            ScaleFunction::from_kind(self.gamma)?,
        ))
    }
}

fn half() -> f64 {
    0.5
}

/// `count` geometric radii spanning `[r0, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r0: f64,
    pub r_max: f64,
    pub count: usize,
    #[serde(default = "half")]
    pub window_fraction: f64,
}

impl GridSpec {
    pub fn radial(&self) -> Result<RadialGrid> {
        RadialGrid::spanning(self.r0, self.r_max, self.count, self.window_fraction)
    }

    /// The spec covering the same radii as `r0·qⁱ`, `i < count`.
    pub fn geometric(r0: f64, q: f64, count: usize) -> Self {
        GridSpec { r0, r_max: r0 * q.powi(count as i32 - 1), count, window_fraction: 0.5 }
    }
}

fn default_budget() -> u64 {
    10_000_000
}

/// Fan and integrator settings for a solution basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSpec {
    pub rays: usize,
    /// Rays with `|θ|` below this many degrees are left out.
    #[serde(default)]
    pub exclude_degrees: f64,
    pub tol: f64,
    #[serde(default = "default_budget")]
    pub step_budget: u64,
    #[serde(default)]
    pub ray_set: RaySet,
}

impl IntegrationSpec {
    pub fn fan(&self) -> Result<Fan> {
        let fan = Fan::equispaced(self.rays)?;
        if self.exclude_degrees > 0.0 {
            fan.excluding(self.exclude_degrees.to_radians())
        } else {
            Ok(fan)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoremTolerances {
    /// Shifted-order equalities (absolute).
    pub shifted: f64,
    /// Plain-order equalities (absolute).
    pub plain: f64,
    /// Type equalities (relative).
    pub type_rel: f64,
    /// Band around a threshold inside which two orders count as equal.
    pub dead_band: f64,
}

impl Default for TheoremTolerances {
    fn default() -> Self {
        TheoremTolerances { shifted: 0.15, plain: 0.05, type_rel: 0.10, dead_band: 0.05 }
    }
}

/// A closed form for `log|f(r)|` on the positive real axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisOracle {
    pub handle: usize,
    /// Expression in `z`, evaluated at `z = r` and read as a real number.
    pub log_abs: String,
    pub radii: Vec<f64>,
    pub rel_tol: f64,
    pub provenance: String,
}

fn t_based() -> Mode {
    Mode::TBased
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremConfig {
    /// Coefficients `A₀, …, A_{k−1}`.
    pub ode: Vec<String>,
    #[serde(default)]
    pub triple: TripleSpec,
    pub grid: GridSpec,
    pub integration: IntegrationSpec,
    /// Mode for coefficient orders; coefficient types are always M-based.
    #[serde(default = "t_based")]
    pub coefficient_mode: Mode,
    #[serde(default)]
    pub tolerances: TheoremTolerances,
    /// Threshold `λ` (theorem2).
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Expected value of the order the statement equates with.
    #[serde(default)]
    pub expected_order: Option<Expected>,
    #[serde(default)]
    pub axis_oracle: Option<AxisOracle>,
}

/// Which function of a pair an expected value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    F1,
    F2,
    Sum,
    Product,
    Scaled,
    Reciprocal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedIndicator {
    pub target: Target,
    pub mode: Mode,
    pub value: f64,
    pub provenance: String,
}

fn order_tol() -> f64 {
    0.05
}
fn scalar_tol() -> f64 {
    0.02
}
fn two() -> f64 {
    2.0
}
fn type_rel() -> f64 {
    0.10
}
fn both_modes() -> Vec<Mode> {
    vec![Mode::MBased, Mode::TBased]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropOrderConfig {
    pub f1: String,
    pub f2: String,
    #[serde(default)]
    pub triple: TripleSpec,
    pub grid: GridSpec,
    #[serde(default = "t_based")]
    pub mode: Mode,
    /// Use the shifted order `α(log)` in place of `α`.
    #[serde(default)]
    pub shifted: bool,
    #[serde(default = "order_tol")]
    pub tol: f64,
    #[serde(default = "scalar_tol")]
    pub scalar_tol: f64,
    #[serde(default = "two")]
    pub scalar: f64,
    /// Also check `σ[1/f₁] = σ[f₁]` (T-based); only valid for zero-free `f₁`.
    #[serde(default)]
    pub reciprocal_zero_free: bool,
    /// Expected orders (`mode` must match the scenario mode).
    #[serde(default)]
    pub expected: Vec<ExpectedIndicator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropTypeConfig {
    pub f1: String,
    pub f2: String,
    #[serde(default)]
    pub triple: TripleSpec,
    pub grid: GridSpec,
    #[serde(default = "both_modes")]
    pub modes: Vec<Mode>,
    /// Oracle orders used as `σ` in the type estimates; estimated when absent.
    #[serde(default)]
    pub sigma1: Option<Expected>,
    #[serde(default)]
    pub sigma2: Option<Expected>,
    #[serde(default = "order_tol")]
    pub order_tol: f64,
    #[serde(default = "type_rel")]
    pub type_rel: f64,
    /// Expected types.
    #[serde(default)]
    pub expected: Vec<ExpectedIndicator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogDerivVariant {
    /// Proximity of `f^{(k)}/f` against `exp(α⁻¹((σ+ε)β(log γ r)))`.
    Proximity,
    /// Pointwise `|f^{(k)}/f|` against `{T(ξr)/r · (log r)^ξ · log T(ξr)}^k`.
    Pointwise,
}

fn one_usize() -> usize {
    1
}
fn ten() -> f64 {
    10.0
}
fn tenth() -> f64 {
    0.10
}
fn proximity() -> LogDerivVariant {
    LogDerivVariant::Proximity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogDerivConfig {
    pub f: String,
    #[serde(default = "one_usize")]
    pub k: usize,
    #[serde(default)]
    pub triple: TripleSpec,
    pub grid: GridSpec,
    pub epsilon: f64,
    /// Order used in the bound; the T-based estimate when absent.
    #[serde(default)]
    pub sigma: Option<Expected>,
    #[serde(default = "proximity")]
    pub variant: LogDerivVariant,
    #[serde(default = "two")]
    pub xi: f64,
    /// The fitted constant is this multiple of the median tail ratio.
    #[serde(default = "ten")]
    pub bound_factor: f64,
    /// Largest share of the grid's logarithmic measure that may exceed the constant.
    #[serde(default = "tenth")]
    pub exclusion_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WvPoint {
    pub r: f64,
    pub m: usize,
    pub tol: f64,
}

fn ninety() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WimanValironConfig {
    pub f: String,
    pub grid: GridSpec,
    pub m_max: usize,
    /// Share of grid radii that must satisfy `deviation ≤ 5/√r`.
    #[serde(default = "ninety")]
    pub fraction: f64,
    /// Single-radius checks with their own tolerance.
    #[serde(default)]
    pub points: Vec<WvPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpBoundConfig {
    pub ode: Vec<String>,
    pub handle: usize,
    pub grid: GridSpec,
    pub integration: IntegrationSpec,
    #[serde(default = "ten")]
    pub bound_factor: f64,
}

fn tiny() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalMeasureConfig {
    pub j3: u64,
    pub ns: Vec<u64>,
    #[serde(default = "tiny")]
    pub tol: f64,
    /// Expected measures for some `N`, as `(N, value, abs tolerance)`.
    #[serde(default)]
    pub expected: Vec<ExpectedMeasure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedMeasure {
    pub n: u64,
    pub value: f64,
    pub tol: f64,
    pub provenance: String,
}

fn two_hundred() -> usize {
    200
}
fn eight() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroBoundConfig {
    #[serde(default = "two_hundred")]
    pub count: usize,
    #[serde(default = "eight")]
    pub max_degree: usize,
    #[serde(default = "ten")]
    pub coefficient_bound: f64,
    /// Overrides the suite seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Command-line overrides applied to every scenario they make sense for.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<GridSpec>,
    pub rays: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl Suite {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        for s in &mut self.scenarios {
            let (grid, integration) = match &mut s.run {
                ScenarioKind::Theorem1(c) | ScenarioKind::Theorem2(c) | ScenarioKind::Theorem3(c) | ScenarioKind::Theorem4(c) => {
                    (Some(&mut c.grid), Some(&mut c.integration))
                }
                ScenarioKind::LemmaMpBound(c) => (Some(&mut c.grid), Some(&mut c.integration)),
                ScenarioKind::PropOrderAlgebra(c) => (Some(&mut c.grid), None),
                ScenarioKind::PropTypeAlgebra(c) => (Some(&mut c.grid), None),
                ScenarioKind::LemmaLogderiv(c) => (Some(&mut c.grid), None),
                ScenarioKind::LemmaWimanValiron(c) => (Some(&mut c.grid), None),
                _ => (None, None),
            };
            if let (Some(g), Some(new)) = (grid, o.grid) {
                *g = GridSpec { window_fraction: g.window_fraction, ..new };
            }
            if let Some(i) = integration {
                if let Some(n) = o.rays {
                    i.rays = n;
                }
                if let Some(t) = o.tol {
                    i.tol = t;
                }
            }
        }
    }
}

/// Executes scenarios; holds the basis cache.
pub struct Runner {
    pub exec: Exec,
    pub seed: u64,
    bases: Mutex<HashMap<String, Arc<SolutionBasis>>>,
}

impl Runner {
    pub fn new(seed: u64) -> Self {
        Runner { exec: Exec::default(), seed, bases: Mutex::new(HashMap::new()) }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Run every scenario of `suite` in order, with the suite's seed.
    pub fn run_suite(&mut self, suite: &Suite) -> Vec<Report> {
        self.seed = suite.seed;
        suite.scenarios.iter().map(|s| self.run(s)).collect()
    }

    pub fn run(&self, s: &Scenario) -> Report {
        let start = Instant::now();
        let kind = s.run.name();
        let env = Environment { seed: self.seed, ..Default::default() };
        let result = match &s.run {
            ScenarioKind::Theorem1(c) => theorems::theorem1(self, &s.id, c),
            ScenarioKind::Theorem2(c) => theorems::theorem2(self, &s.id, c),
            ScenarioKind::Theorem3(c) => theorems::theorem3(self, &s.id, c),
            ScenarioKind::Theorem4(c) => theorems::theorem4(self, &s.id, c),
            ScenarioKind::PropOrderAlgebra(c) => props::order_algebra(self, &s.id, c),
            ScenarioKind::PropTypeAlgebra(c) => props::type_algebra(self, &s.id, c),
            ScenarioKind::LemmaLogderiv(c) => lemmas::logderiv(self, &s.id, c),
            ScenarioKind::LemmaWimanValiron(c) => lemmas::wiman_valiron(self, &s.id, c),
            ScenarioKind::LemmaMpBound(c) => lemmas::mp_bound(self, &s.id, c),
            ScenarioKind::LemmaIntervalMeasure(c) => intervals::interval_measure(self, &s.id, c),
            ScenarioKind::ZeroBoundProperty(c) => lemmas::zero_bound(self, &s.id, c),
        };
        let mut report = match result {
            Ok(r) => r.finish(),
            Err(e) => Report::failed(&s.id, kind, env, e.to_string()),
        };
        report.metadata = Metadata {
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            runtime_seconds: start.elapsed().as_secs_f64(),
        };
        report
    }

    /// The canonical basis of `ode` over `integration`, sampled at `samples`.
    /// Identical requests share one integration.
    pub fn basis(&self, ode: &[String], integration: &IntegrationSpec, r_max: f64, samples: &[f64]) -> Result<Arc<SolutionBasis>> {
        let key = serde_json::to_string(&(ode, integration, r_max, samples)).expect("key serializes");
        if let Some(b) = self.bases.lock().expect("cache lock").get(&key) {
            return Ok(b.clone());
        }
        let lin = LinearODE::parse(ode)?;
        let ray = RayOptions { tol: integration.tol, step_budget: integration.step_budget, samples: samples.to_vec() };
        let mut options = BasisOptions::new(integration.fan()?, r_max, ray);
        options.ray_set = integration.ray_set;
        options.exec = self.exec;
        let basis = Arc::new(solution_basis(&lin, &options)?);
        self.bases.lock().expect("cache lock").insert(key, basis.clone());
        Ok(basis)
    }

    fn environment(&self, grid: Option<RadialGrid>, integration: Option<&IntegrationSpec>) -> Environment {
        Environment {
            grid,
            fan_rays: integration.map(|i| i.rays),
            fan_excluded_half_width: integration.map(|i| i.exclude_degrees.to_radians()),
            ray_tol: integration.map(|i| i.tol),
            step_budget: integration.map(|i| i.step_budget),
            ray_set: integration.map(|i| i.ray_set),
            seed: self.seed,
        }
    }
}
