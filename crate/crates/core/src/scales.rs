//! Growth-scale functions α, β, γ and their class checks.
//!
//! Scales come from a small closed catalog so that inverses are exact. Class
//! membership (L₁ quasi-additive, L₂ translation-stable, L₃ subadditive) is
//! known analytically for the catalog and can additionally be probed on finite
//! grids; a passing probe means "no counterexample found", nothing more.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// `log^[k] x` with `log^[0] x = x` and `log^[-1] x = exp x`.
pub fn iter_log(k: i32, x: f64) -> Result<f64> {
    match k {
        k if k < -1 => Err(Error::InvalidArgument(format!("iter_log depth {k} < -1"))),
        -1 => Ok(x.exp()),
        _ => {
            let mut v = x;
            for depth in 1..=k as usize {
                if !(v > 0.0) {
                    return Err(Error::IteratedLogDomain { depth, x });
                }
                v = v.ln();
            }
            Ok(v)
        }
    }
}

/// `exp^[k] x` with `exp^[0] x = x` and `exp^[-1] x = log x`.
pub fn iter_exp(k: i32, x: f64) -> Result<f64> {
    match k {
        k if k < -1 => Err(Error::InvalidArgument(format!("iter_exp depth {k} < -1"))),
        -1 => iter_log(1, x),
        _ => Ok((0..k).fold(x, |v, _| v.exp())),
    }
}

/// `log^[k] x` with the extended convention `log(0) = -inf`; `None` when a
/// negative argument or `log(-inf)` is reached.
pub(crate) fn iter_log_ext(k: usize, x: f64) -> Option<f64> {
    let mut v = x;
    for _ in 0..k {
        if v > 0.0 {
            v = v.ln();
        } else if v == 0.0 {
            v = f64::NEG_INFINITY;
        } else {
            return None;
        }
    }
    Some(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScaleClass {
    L1,
    L2,
    L3,
}

impl fmt::Display for ScaleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScaleClass::L1 => "L1",
            ScaleClass::L2 => "L2",
            ScaleClass::L3 => "L3",
        };
        f.write_str(s)
    }
}

/// Catalog entry. Serializes as `{"name": "iter_log", "k": 1}` and friends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleKind {
    Identity {},
    IterLog { k: u32 },
    Power { s: f64 },
    Affine { a: f64, #[serde(default)] b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFunction {
    pub kind: ScaleKind,
    /// α(x) = α(x₀) for x ≤ x₀.
    pub floor: f64,
    /// Strongest class guaranteed analytically.
    pub declared_class: ScaleClass,
    /// All classes guaranteed analytically.
    pub classes: Vec<ScaleClass>,
    /// The additive slack `c` of L₁.
    pub quasi_additive_c: f64,
    /// Threshold above which the class inequalities are asserted.
    pub r0: f64,
}

impl ScaleFunction {
    pub fn identity() -> Self {
        Self::from_kind(ScaleKind::Identity {}).expect("identity is always valid")
    }

    pub fn iter_log(k: u32) -> Result<Self> {
        Self::from_kind(ScaleKind::IterLog { k })
    }

    pub fn power(s: f64) -> Result<Self> {
        Self::from_kind(ScaleKind::Power { s })
    }

    pub fn affine(a: f64, b: f64) -> Result<Self> {
        Self::from_kind(ScaleKind::Affine { a, b })
    }

    /// `x^s` for any `s > 0`, including the superlinear powers the catalog
    /// rejects. Useful as a counterexample: for `s > 1` only L₂ holds.
    pub fn power_any(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidScaleParam(format!("power exponent {s} must be positive")));
        }
        if s <= 1.0 {
            return Self::power(s);
        }
        Ok(ScaleFunction {
            kind: ScaleKind::Power { s },
            floor: 0.0,
            declared_class: ScaleClass::L2,
            classes: vec![ScaleClass::L2],
            quasi_additive_c: f64::INFINITY,
            r0: 1.0,
        })
    }

    pub fn from_kind(kind: ScaleKind) -> Result<Self> {
        use ScaleClass::*;
        let (floor, declared, classes, r0) = match kind {
            ScaleKind::Identity {} => (0.0, L3, vec![L1, L2, L3], 1.0),
            ScaleKind::IterLog { k } => {
                if k == 0 {
                    return Err(Error::InvalidScaleParam("iter_log depth must be >= 1".into()));
                }
                let floor = iter_exp(k as i32 - 1, 1.0)?;
                let r0 = iter_exp(k as i32, 1.0)?;
                (floor, L1, vec![L1, L2], r0)
            }
            ScaleKind::Power { s } => {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::InvalidScaleParam(format!("power exponent {s} must be positive")));
                }
                if s > 1.0 {
                    return Err(Error::InvalidScaleParam(format!(
                        "power exponent {s} > 1 is not subadditive"
                    )));
                }
                (0.0, L3, vec![L1, L2, L3], 1.0)
            }
            ScaleKind::Affine { a, b } => {
                if !(a > 0.0 && a.is_finite()) || !(b >= 0.0 && b.is_finite()) {
                    return Err(Error::InvalidScaleParam(format!("affine needs a > 0, b >= 0 (got {a}, {b})")));
                }
                (0.0, L3, vec![L1, L2, L3], 1.0)
            }
        };
        let mut scale = ScaleFunction {
            kind,
            floor,
            declared_class: declared,
            classes,
            quasi_additive_c: 0.0,
            r0,
        };
        if declared != L3 {
            scale.quasi_additive_c = scale.search_quasi_additive_c();
        }
        Ok(scale)
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = r0;
        self
    }

    pub fn with_quasi_additive_c(mut self, c: f64) -> Self {
        self.quasi_additive_c = c;
        self
    }

    pub fn id(&self) -> String {
        match self.kind {
            ScaleKind::Identity {} => "identity".into(),
            ScaleKind::IterLog { k } => format!("iter_log({k})"),
            ScaleKind::Power { s } => format!("power({s})"),
            ScaleKind::Affine { a, b } => format!("affine({a},{b})"),
        }
    }

    pub fn in_class(&self, class: ScaleClass) -> bool {
        self.classes.contains(&class)
    }

    /// α(x). Defined on the extended line: α(-inf) = α(x₀).
    pub fn eval(&self, x: f64) -> f64 {
        let x = if x.is_nan() { return f64::NAN } else { x.max(self.floor) };
        match self.kind {
            ScaleKind::Identity {} => x,
            ScaleKind::IterLog { k } => {
                let mut v = x;
                for _ in 0..k {
                    v = v.ln();
                }
                v
            }
            ScaleKind::Power { s } => x.powf(s),
            ScaleKind::Affine { a, b } => a * x + b,
        }
    }

    /// α(x₀), the bottom of the range.
    pub fn min_value(&self) -> f64 {
        self.eval(self.floor)
    }

    /// α⁻¹(y) in closed form.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let min = self.min_value();
        if !(y >= min) {
            return Err(Error::BelowRange { scale: self.id(), value: y, min });
        }
        Ok(match self.kind {
            ScaleKind::Identity {} => y,
            ScaleKind::IterLog { k } => iter_exp(k as i32, y)?,
            ScaleKind::Power { s } => y.powf(1.0 / s),
            ScaleKind::Affine { a, b } => (y - b) / a,
        })
    }

    /// ln α⁻¹(y), usable where α⁻¹(y) itself overflows.
    pub fn log_inverse(&self, y: f64) -> Result<f64> {
        let min = self.min_value();
        if !(y >= min) {
            return Err(Error::BelowRange { scale: self.id(), value: y, min });
        }
        Ok(match self.kind {
            ScaleKind::IterLog { k } => iter_exp(k as i32 - 1, y)?,
            _ => self.inverse(y)?.ln(),
        })
    }

    /// α⁻¹(y) by bisection on α, to `1e-12` relative. Independent of the
    /// closed forms in [`ScaleFunction::inverse`].
    pub fn inverse_bisect(&self, y: f64) -> Result<f64> {
        let min = self.min_value();
        if !(y >= min) {
            return Err(Error::BelowRange { scale: self.id(), value: y, min });
        }
        if y == min {
            return Ok(self.floor);
        }
        let mut lo = self.floor;
        let mut hi = self.floor.abs().max(1.0);
        while self.eval(hi) < y {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::BelowRange { scale: self.id(), value: y, min });
            }
        }
        for _ in 0..4000 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi.abs().max(1e-300) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn search_quasi_additive_c(&self) -> f64 {
        let grid = geometric_grid(self.r0, 1e8, 64);
        let (worst, _) = worst_subadditivity(self, &grid);
        worst.max(0.0)
    }
}

/// Parse a catalog name with parameters, e.g. `("iter_log", [1.0])`.
pub fn builtin_scale(name: &str, params: &[f64]) -> Result<ScaleFunction> {
    let need = |n: usize| -> Result<()> {
        if params.len() < n {
            Err(Error::InvalidScaleParam(format!("`{name}` needs {n} parameter(s)")))
        } else {
            Ok(())
        }
    };
    match name {
        "identity" | "id" => ScaleFunction::from_kind(ScaleKind::Identity {}),
        "iter_log" | "log" => {
            let k = params.first().copied().unwrap_or(1.0);
            if k.fract() != 0.0 || k < 1.0 {
                return Err(Error::InvalidScaleParam(format!("iter_log depth {k}")));
            }
            ScaleFunction::iter_log(k as u32)
        }
        "power" => {
            need(1)?;
            ScaleFunction::power(params[0])
        }
        "affine" => {
            need(1)?;
            ScaleFunction::affine(params[0], params.get(1).copied().unwrap_or(0.0))
        }
        other => Err(Error::UnknownScale(other.to_string())),
    }
}

/// `per_decade` geometric points per decade over `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).ceil().max(1.0) as usize;
    let step = decades / n as f64;
    (0..=n).map(|i| lo * 10f64.powf(step * i as f64)).collect()
}

/// The default probe grid for class checks: 512 points per decade over
/// `[R₀, 10⁸]`.
pub fn default_class_grid(r0: f64) -> Vec<f64> {
    geometric_grid(r0.max(1e-3), 1e8, 512)
}

fn pair_subsample(grid: &[f64]) -> Vec<f64> {
    const MAX: usize = 384;
    if grid.len() <= MAX {
        return grid.to_vec();
    }
    let stride = grid.len() as f64 / MAX as f64;
    let mut v: Vec<f64> = (0..MAX).map(|i| grid[(i as f64 * stride) as usize]).collect();
    v.push(*grid.last().unwrap());
    v
}

/// max over pairs of α(a+b) − α(a) − α(b), with a witness pair.
fn worst_subadditivity(scale: &ScaleFunction, grid: &[f64]) -> (f64, (f64, f64)) {
    let pts = pair_subsample(grid);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = (f64::NAN, f64::NAN);
    for (i, &a) in pts.iter().enumerate() {
        let fa = scale.eval(a);
        for &b in &pts[i..] {
            let v = scale.eval(a + b) - fa - scale.eval(b);
            if v > worst {
                worst = v;
                witness = (a, b);
            }
        }
    }
    (worst, witness)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCheckConfig {
    /// Absolute slack for the L₁/L₃ inequalities, relative to magnitude.
    pub tol: f64,
    /// Allowed |α(x+d)/α(x) − 1| on the top decade for L₂.
    pub l2_tol: f64,
    /// Offset half-width D for L₂.
    pub l2_offset: f64,
}

impl Default for ClassCheckConfig {
    fn default() -> Self {
        ClassCheckConfig { tol: 1e-9, l2_tol: 0.05, l2_offset: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub scale: String,
    pub class: ScaleClass,
    pub grid: String,
    pub worst_violation: f64,
    pub witness: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn check_class(scale: &ScaleFunction, class: ScaleClass, grid: &[f64]) -> Result<ClassReport> {
    check_class_with(scale, class, grid, &ClassCheckConfig::default())
}

pub fn check_class_with(
    scale: &ScaleFunction,
    class: ScaleClass,
    grid: &[f64],
    cfg: &ClassCheckConfig,
) -> Result<ClassReport> {
    if grid.len() < 14 {
        return Err(Error::InvalidGrid(format!("{} points give fewer than 100 pairs", grid.len())));
    }
    if let Some(&x) = grid.iter().find(|&&x| x < scale.r0) {
        return Err(Error::InvalidGrid(format!("grid point {x} below R0 = {}", scale.r0)));
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let desc = format!("{} points over [{lo:.6e}, {hi:.6e}]", grid.len());
    let report = |worst: f64, witness: Vec<f64>, tolerance: f64, pass: bool| ClassReport {
        scale: scale.id(),
        class,
        grid: desc.clone(),
        worst_violation: worst,
        witness,
        tolerance,
        pass,
    };
    match class {
        ScaleClass::L3 | ScaleClass::L1 => {
            let (mut worst, (a, b)) = worst_subadditivity(scale, grid);
            if class == ScaleClass::L1 {
                worst -= scale.quasi_additive_c;
            }
            let tol = cfg.tol * scale.eval(hi).abs().max(1.0);
            Ok(report(worst, vec![a, b], tol, worst <= tol))
        }
        ScaleClass::L2 => {
            let top: Vec<f64> = grid.iter().cloned().filter(|&x| x >= hi / 10.0).collect();
            let offsets: Vec<f64> = (-10..=10).map(|i| cfg.l2_offset * i as f64 / 10.0).collect();
            let mut worst = 0.0_f64;
            let mut witness = vec![f64::NAN, f64::NAN];
            let mut per_point = Vec::with_capacity(top.len());
            for &x in &top {
                let ax = scale.eval(x);
                if ax == 0.0 {
                    continue;
                }
                let dev = offsets
                    .iter()
                    .map(|&d| (scale.eval(x + d) / ax - 1.0).abs())
                    .fold(0.0_f64, f64::max);
                per_point.push(dev);
                if dev > worst {
                    worst = dev;
                    witness = vec![x, cfg.l2_offset];
                }
            }
            let decreasing = per_point
                .windows(2)
                .all(|w| w[1] <= w[0] * (1.0 + 1e-6) + 1e-15);
            Ok(report(worst, witness, cfg.l2_tol, worst <= cfg.l2_tol && decreasing))
        }
    }
}

/// The `(α, β, γ)` scale triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleTriple {
    pub alpha: ScaleFunction,
    pub beta: ScaleFunction,
    pub gamma: ScaleFunction,
    /// Deepest iterated log checked in condition (ii).
    pub p_max: u32,
}

impl ScaleTriple {
    pub fn new(alpha: ScaleFunction, beta: ScaleFunction, gamma: ScaleFunction) -> Self {
        ScaleTriple { alpha, beta, gamma, p_max: 3 }
    }

    /// (identity, identity, identity): the classical hyper-order setting.
    pub fn identity() -> Self {
        Self::new(ScaleFunction::identity(), ScaleFunction::identity(), ScaleFunction::identity())
    }

    /// (log, identity, identity).
    pub fn log_id_id() -> Self {
        Self::new(
            ScaleFunction::iter_log(1).expect("catalog"),
            ScaleFunction::identity(),
            ScaleFunction::identity(),
        )
    }

    /// β(log γ(r)), the common denominator of every indicator.
    pub fn denominator(&self, r: f64) -> f64 {
        let g = self.gamma.eval(r);
        let lg = if g > 0.0 { g.ln() } else { f64::NEG_INFINITY };
        self.beta.eval(lg)
    }

    pub fn label(&self) -> String {
        format!("({}, {}, {})", self.alpha.id(), self.beta.id(), self.gamma.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleCheckConfig {
    /// Last value allowed for the o(1) ratios α(log^[p]x)/β(log γ(x)) and
    /// α(log x)/α(x).
    pub threshold: f64,
    /// Last value allowed for α⁻¹(kx)/α⁻¹(x).
    pub inverse_threshold: f64,
    pub ks: Vec<f64>,
}

impl Default for TripleCheckConfig {
    fn default() -> Self {
        TripleCheckConfig { threshold: 0.25, inverse_threshold: 1.0, ks: vec![0.25, 0.5, 0.9] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseReport {
    pub clause: String,
    /// (x, ratio) on the grid.
    pub ratios: Vec<(f64, f64)>,
    pub decreasing: bool,
    pub last: f64,
    pub threshold: f64,
    pub pass: bool,
    /// The ratio's last value is also below the o(1) threshold. Only
    /// informative for the inverse clause.
    pub vanishing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleReport {
    pub triple: String,
    pub condition_i: bool,
    pub condition_i_detail: String,
    pub clauses: Vec<ClauseReport>,
    pub pass: bool,
}

/// Default grid for condition (ii): 16 points per decade over `[10, 1e300]`.
pub fn default_triple_grid() -> Vec<f64> {
    geometric_grid(10.0, 1e300, 16)
}

pub fn check_triple(triple: &ScaleTriple, grid: &[f64]) -> Result<TripleReport> {
    check_triple_with(triple, grid, &TripleCheckConfig::default())
}

pub fn check_triple_with(triple: &ScaleTriple, grid: &[f64], cfg: &TripleCheckConfig) -> Result<TripleReport> {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || (hi / lo).log10() < 4.0 {
        return Err(Error::InvalidGrid("condition (ii) grid must span at least 4 decades".into()));
    }
    let mut problems = Vec::new();
    if !triple.alpha.in_class(ScaleClass::L1) {
        problems.push(format!("alpha {} not in L1", triple.alpha.id()));
    }
    if !triple.beta.in_class(ScaleClass::L2) {
        problems.push(format!("beta {} not in L2", triple.beta.id()));
    }
    if !triple.gamma.in_class(ScaleClass::L3) {
        problems.push(format!("gamma {} not in L3", triple.gamma.id()));
    }
    let condition_i = problems.is_empty();
    let detail = if condition_i { "alpha in L1, beta in L2, gamma in L3".to_string() } else { problems.join("; ") };

    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut clauses = Vec::new();
    let alpha = &triple.alpha;
    for p in 2..=triple.p_max.max(2) {
        let mut ratios = Vec::with_capacity(sorted.len());
        for &x in &sorted {
            let inner = iter_log(p as i32, x)?;
            ratios.push((x, alpha.eval(inner) / triple.denominator(x)));
        }
        clauses.push(clause(format!("alpha(log^[{p}] x) / beta(log gamma(x))"), ratios, cfg.threshold, cfg.threshold));
    }
    let ratios = sorted
        .iter()
        .map(|&x| (x, alpha.eval(x.ln()) / alpha.eval(x)))
        .collect();
    clauses.push(clause("alpha(log x) / alpha(x)".into(), ratios, cfg.threshold, cfg.threshold));
    for &k in &cfg.ks {
        let mut ratios = Vec::with_capacity(sorted.len());
        for &x in &sorted {
            let y = alpha.eval(x);
            if y <= alpha.min_value() {
                continue;
            }
            let ky = (k * y).max(alpha.min_value());
            let lr = alpha.log_inverse(ky)? - alpha.log_inverse(y)?;
            ratios.push((x, lr.exp()));
        }
        clauses.push(clause(
            format!("alpha^-1({k} x) / alpha^-1(x)"),
            ratios,
            cfg.inverse_threshold,
            cfg.threshold,
        ));
    }
    let pass = condition_i && clauses.iter().all(|c| c.pass);
    Ok(TripleReport { triple: triple.label(), condition_i, condition_i_detail: detail, clauses, pass })
}

fn clause(name: String, ratios: Vec<(f64, f64)>, threshold: f64, strict: f64) -> ClauseReport {
    let half = ratios.len() / 2;
    let decreasing = ratios[half..]
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12) + 1e-300);
    let last = ratios.last().map(|r| r.1).unwrap_or(f64::NAN);
    ClauseReport {
        clause: name,
        decreasing,
        last,
        threshold,
        pass: decreasing && last <= threshold,
        vanishing: last <= strict,
        ratios,
    }
}
