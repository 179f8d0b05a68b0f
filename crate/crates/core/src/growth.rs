//! Finite-grid estimates of (α, β, γ)-order and type.
//!
//! Every estimate carries two numbers: the tail supremum of the defining
//! ratio (a direct proxy for the lim sup, slow to converge) and a
//! least-squares slope in transformed coordinates (fast when growth is a
//! clean power law there). Callers pick which one to assert.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::functions::{
    characteristic_t, characteristic_t_entire, log_max_modulus, CirclePolicy, EntireFunction, FunctionalPolicy,
    MeromorphicFunction,
};
use crate::scales::{iter_log_ext, ScaleTriple};
use serde::{Deserialize, Serialize};

/// Geometric radii `r₀·qⁱ`, `i = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialGrid {
    pub r0: f64,
    pub q: f64,
    pub count: usize,
    /// Trailing fraction of the grid used for the lim sup proxies.
    pub window_fraction: f64,
}

impl Default for RadialGrid {
    fn default() -> Self {
        RadialGrid { r0: 4.0, q: 1.15, count: 40, window_fraction: 0.5 }
    }
}

pub const MIN_GRID_COUNT: usize = 16;

impl RadialGrid {
    pub fn new(r0: f64, q: f64, count: usize, window_fraction: f64) -> Result<Self> {
        let g = RadialGrid { r0, q, count, window_fraction };
        g.validate()?;
        Ok(g)
    }

    /// `count` geometric radii from `r0` to `r_max` inclusive.
    pub fn spanning(r0: f64, r_max: f64, count: usize, window_fraction: f64) -> Result<Self> {
        if !(r_max > r0) || count < 2 {
            return Err(Error::InvalidGrid(format!("cannot span [{r0}, {r_max}] with {count} radii")));
        }
        Self::new(r0, (r_max / r0).powf(1.0 / (count - 1) as f64), count, window_fraction)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 1.0) || !self.r0.is_finite() {
            return Err(Error::InvalidGrid(format!("r0 = {} must exceed 1", self.r0)));
        }
        if !(self.q > 1.0) {
            return Err(Error::InvalidGrid(format!("ratio q = {} must exceed 1", self.q)));
        }
        if self.count < MIN_GRID_COUNT {
            return Err(Error::InvalidGrid(format!("count {} below {MIN_GRID_COUNT}", self.count)));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!("window fraction {} not in (0, 1]", self.window_fraction)));
        }
        if !self.r_max().is_finite() {
            return Err(Error::InvalidGrid("largest radius is not finite".into()));
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.r0 * self.q.powi(i as i32)).collect()
    }

    pub fn r_max(&self) -> f64 {
        self.r0 * self.q.powi(self.count as i32 - 1)
    }

    /// Index of the first radius in the tail window.
    pub fn tail_start(&self) -> usize {
        tail_start(self.count, self.window_fraction)
    }
}

fn tail_start(len: usize, fraction: f64) -> usize {
    let n = ((fraction * len as f64).ceil() as usize).clamp(1, len.max(1));
    len - n.min(len)
}

/// Which quantity of the function the indicator is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Nevanlinna characteristic `T(r, f)`.
    TBased,
    /// Maximum modulus, one log deeper: `log M(r, f)` plays the role of `T`.
    MBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    Order,
    OrderLogShifted,
    Type,
    TypeM,
    TypeLogShifted,
}

impl IndicatorKind {
    fn of(is_type: bool, mode: Mode, shifted: bool) -> Self {
        match (is_type, shifted, mode) {
            (false, false, _) => IndicatorKind::Order,
            (false, true, _) => IndicatorKind::OrderLogShifted,
            (true, true, _) => IndicatorKind::TypeLogShifted,
            (true, false, Mode::TBased) => IndicatorKind::Type,
            (true, false, Mode::MBased) => IndicatorKind::TypeM,
        }
    }
}

/// Provider of `log M(r)` and `T(r)` at arbitrary radii.
pub trait GrowthSource: Sync {
    fn log_max_modulus(&self, r: f64) -> Result<f64>;
    fn characteristic(&self, r: f64) -> Result<f64>;
}

/// An entire function paired with its functional policies.
#[derive(Debug, Clone)]
pub struct EntireSource {
    pub f: EntireFunction,
    pub policy: FunctionalPolicy,
}

impl EntireSource {
    pub fn new(f: EntireFunction) -> Self {
        EntireSource { f, policy: FunctionalPolicy::default() }
    }
}

impl GrowthSource for EntireSource {
    fn log_max_modulus(&self, r: f64) -> Result<f64> {
        log_max_modulus(&self.f, r, &self.policy.circle)
    }

    fn characteristic(&self, r: f64) -> Result<f64> {
        Ok(crate::functions::proximity_m(&self.f, r, &self.policy.trapezoid)?)
    }
}

impl GrowthSource for EntireFunction {
    fn log_max_modulus(&self, r: f64) -> Result<f64> {
        log_max_modulus(self, r, &CirclePolicy::default())
    }

    fn characteristic(&self, r: f64) -> Result<f64> {
        Ok(characteristic_t_entire(self, r, &FunctionalPolicy { max_term: no_terms(), ..Default::default() })?.T)
    }
}

fn no_terms() -> crate::functions::MaxTermPolicy {
    crate::functions::MaxTermPolicy { start_terms: 1, max_terms: 1, decreasing_run: 10 }
}

impl GrowthSource for MeromorphicFunction {
    fn log_max_modulus(&self, r: f64) -> Result<f64> {
        if !self.is_entire() {
            return Err(Error::InvalidArgument("maximum modulus of a function with poles".into()));
        }
        log_max_modulus(self, r, &CirclePolicy::default())
    }

    fn characteristic(&self, r: f64) -> Result<f64> {
        Ok(characteristic_t(self, r, &FunctionalPolicy { max_term: no_terms(), ..Default::default() })?.T)
    }
}

/// Raw growth data at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub r: f64,
    pub log_m: Option<f64>,
    pub t: Option<f64>,
}

/// Growth data on a set of radii, sorted by `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub rows: Vec<GrowthRow>,
    pub window_fraction: f64,
}

fn recoverable(e: &Error) -> bool {
    matches!(e, Error::NoRayAtRadius(_) | Error::IteratedLogDomain { .. })
}

impl GrowthTable {
    /// Evaluate the requested quantities at every radius of `grid`.
    pub fn sample<S: GrowthSource + ?Sized>(src: &S, grid: &RadialGrid, modes: &[Mode], exec: Exec) -> Result<Self> {
        grid.validate()?;
        Self::sample_radii(src, &grid.radii(), grid.window_fraction, modes, exec)
    }

    pub fn sample_radii<S: GrowthSource + ?Sized>(
        src: &S,
        radii: &[f64],
        window_fraction: f64,
        modes: &[Mode],
        exec: Exec,
    ) -> Result<Self> {
        let need_m = modes.contains(&Mode::MBased);
        let need_t = modes.contains(&Mode::TBased);
        let rows = exec.map(radii, |&r| -> Result<GrowthRow> {
            let log_m = if need_m { optional(src.log_max_modulus(r))? } else { None };
            let t = if need_t { optional(src.characteristic(r))? } else { None };
            Ok(GrowthRow { r, log_m, t })
        });
        let mut rows: Vec<GrowthRow> = rows.into_iter().collect::<Result<_>>()?;
        rows.sort_by(|a, b| a.r.total_cmp(&b.r));
        Ok(GrowthTable { rows, window_fraction })
    }
}

fn optional(v: Result<f64>) -> Result<Option<f64>> {
    match v {
        Ok(x) => Ok(Some(x)),
        Err(e) if recoverable(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// One evidence row of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct IndicatorSample {
    pub r: f64,
    pub log_M: Option<f64>,
    pub T: Option<f64>,
    pub numerator: Option<f64>,
    pub denominator: f64,
    pub ratio: Option<f64>,
    pub in_tail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorEstimate {
    pub kind: IndicatorKind,
    pub mode: Mode,
    pub shifted: bool,
    pub triple: String,
    /// Order assumed for type estimates.
    pub sigma: Option<f64>,
    pub value_tail_sup: f64,
    /// Order: OLS slope. Type: `exp(mean(y − x))`, the constant of the fit
    /// `y = x + log τ` in log-log coordinates.
    pub value_slope: f64,
    /// Free OLS slope of the log-log type fit (should be close to 1).
    pub fit_slope: f64,
    pub slope_residual: f64,
    pub window: (f64, f64),
    pub monotone_trend: bool,
    pub tail_count: usize,
    pub excluded: usize,
    pub samples: Vec<IndicatorSample>,
}

impl IndicatorEstimate {
    /// Evidence as CSV: `r,log_M,T,numerator,denominator,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,log_M,T,numerator,denominator,ratio\n");
        let f = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for s in &self.samples {
            out.push_str(&format!(
                "{:.17e},{},{},{},{:.17e},{}\n",
                s.r,
                f(s.log_M),
                f(s.T),
                f(s.numerator),
                s.denominator,
                f(s.ratio)
            ));
        }
        out
    }
}

/// Trailing-window maximum.
pub fn tail_sup(values: &[f64], window_fraction: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::TooFewSamples { valid: 0, needed: 1 });
    }
    let start = tail_start(values.len(), window_fraction);
    Ok(values[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the residuals.
    pub residual: f64,
}

pub const MIN_FIT_POINTS: usize = 8;

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewSamples { valid: points.len(), needed: MIN_FIT_POINTS });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 1e-300 * n) || !sxx.is_finite() || sxx <= f64::EPSILON * points.iter().map(|p| p.0 * p.0).sum::<f64>() {
        return Err(Error::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    Ok(SlopeFit { slope, intercept, residual: (ss / n).sqrt() })
}

/// Knobs shared by the order and type estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorPolicy {
    /// Largest excluded share of the tail window.
    pub exclusion_budget: f64,
    pub exec: Exec,
}

impl Default for EstimatorPolicy {
    fn default() -> Self {
        EstimatorPolicy { exclusion_budget: 0.25, exec: Exec::default() }
    }
}

/// `α(log^[depth] Q)` where `Q` is `T` (T-based) or `log M` (M-based).
fn numerator(triple: &ScaleTriple, row: &GrowthRow, mode: Mode, depth: usize) -> Option<f64> {
    let q = match mode {
        Mode::TBased => row.t?,
        Mode::MBased => row.log_m?,
    };
    let inner = iter_log_ext(depth, q)?;
    if inner.is_nan() || inner == f64::INFINITY {
        return None;
    }
    let v = triple.alpha.eval(inner);
    v.is_finite().then_some(v)
}

struct Prepared {
    samples: Vec<IndicatorSample>,
    tail: Vec<(f64, f64)>,
    excluded: usize,
    tail_count: usize,
    window: (f64, f64),
}

fn prepare(
    table: &GrowthTable,
    triple: &ScaleTriple,
    mode: Mode,
    shifted: bool,
    ratio: impl Fn(f64, f64) -> f64,
    policy: &EstimatorPolicy,
) -> Result<Prepared> {
    let depth = if shifted { 2 } else { 1 };
    let start = tail_start(table.rows.len(), table.window_fraction);
    let mut samples = Vec::with_capacity(table.rows.len());
    let mut tail = Vec::new();
    let mut excluded = 0usize;
    for (i, row) in table.rows.iter().enumerate() {
        let num = numerator(triple, row, mode, depth);
        let den = triple.denominator(row.r);
        let in_tail = i >= start;
        let ratio_v = num.map(|n| ratio(n, den)).filter(|v| v.is_finite());
        if in_tail {
            match (num, ratio_v) {
                (Some(n), Some(_)) if den.is_finite() && den > 0.0 => tail.push((den, n)),
                _ => excluded += 1,
            }
        }
        samples.push(IndicatorSample {
            r: row.r,
            log_M: row.log_m,
            T: row.t,
            numerator: num,
            denominator: den,
            ratio: ratio_v,
            in_tail,
        });
    }
    let tail_count = table.rows.len() - start;
    if excluded as f64 > policy.exclusion_budget * tail_count as f64 {
        return Err(Error::ExclusionBudget {
            excluded,
            total: tail_count,
            budget_pct: 100.0 * policy.exclusion_budget,
        });
    }
    if tail.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewSamples { valid: tail.len(), needed: MIN_FIT_POINTS });
    }
    let window = (table.rows[start].r, table.rows.last().expect("nonempty").r);
    Ok(Prepared { samples, tail, excluded, tail_count, window })
}

fn monotone(values: &[f64]) -> bool {
    let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let tol = 1e-9 * scale;
    let up = values.windows(2).all(|w| w[1] >= w[0] - tol);
    let down = values.windows(2).all(|w| w[1] <= w[0] + tol);
    up || down
}

/// Order from a precomputed table.
pub fn order_from_table(
    table: &GrowthTable,
    triple: &ScaleTriple,
    mode: Mode,
    shifted: bool,
    policy: &EstimatorPolicy,
) -> Result<IndicatorEstimate> {
    let p = prepare(table, triple, mode, shifted, |n, d| n / d, policy)?;
    let ratios: Vec<f64> = p.tail.iter().map(|(d, n)| n / d).collect();
    let fit = slope_fit(&p.tail)?;
    Ok(IndicatorEstimate {
        kind: IndicatorKind::of(false, mode, shifted),
        mode,
        shifted,
        triple: triple.label(),
        sigma: None,
        value_tail_sup: tail_sup(&ratios, 1.0)?,
        value_slope: fit.slope,
        fit_slope: fit.slope,
        slope_residual: fit.residual,
        window: p.window,
        monotone_trend: monotone(&ratios),
        tail_count: p.tail_count,
        excluded: p.excluded,
        samples: p.samples,
    })
}

/// Type from a precomputed table, assuming order `sigma`.
pub fn type_from_table(
    table: &GrowthTable,
    triple: &ScaleTriple,
    sigma: f64,
    mode: Mode,
    shifted: bool,
    policy: &EstimatorPolicy,
) -> Result<IndicatorEstimate> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("type needs 0 < σ < ∞, got {sigma}")));
    }
    // exp(α(…)) / (exp β(log γ r))^σ evaluated as exp(numerator − σ·denominator)
    let p = prepare(table, triple, mode, shifted, |n, d| (n - sigma * d).exp(), policy)?;
    let ratios: Vec<f64> = p.tail.iter().map(|(d, n)| (n - sigma * d).exp()).collect();
    let pts: Vec<(f64, f64)> = p.tail.iter().map(|(d, n)| (sigma * d, *n)).collect();
    let fit = slope_fit(&pts)?;
    let mean_gap = pts.iter().map(|(x, y)| y - x).sum::<f64>() / pts.len() as f64;
    let gap_rms = (pts.iter().map(|(x, y)| (y - x - mean_gap).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    Ok(IndicatorEstimate {
        kind: IndicatorKind::of(true, mode, shifted),
        mode,
        shifted,
        triple: triple.label(),
        sigma: Some(sigma),
        value_tail_sup: tail_sup(&ratios, 1.0)?,
        value_slope: mean_gap.exp(),
        fit_slope: fit.slope,
        slope_residual: gap_rms,
        window: p.window,
        monotone_trend: monotone(&ratios),
        tail_count: p.tail_count,
        excluded: p.excluded,
        samples: p.samples,
    })
}

/// (α, β, γ)-order, or the (α(log), β, γ)-order when `shifted`.
pub fn estimate_order<S: GrowthSource + ?Sized>(
    src: &S,
    triple: &ScaleTriple,
    grid: &RadialGrid,
    mode: Mode,
    shifted: bool,
) -> Result<IndicatorEstimate> {
    let policy = EstimatorPolicy::default();
    let table = GrowthTable::sample(src, grid, &[mode], policy.exec)?;
    order_from_table(&table, triple, mode, shifted, &policy)
}

/// (α, β, γ)-type (`τ` or `τ_M`), or its shifted variant.
pub fn estimate_type<S: GrowthSource + ?Sized>(
    src: &S,
    triple: &ScaleTriple,
    sigma: f64,
    grid: &RadialGrid,
    mode: Mode,
    shifted: bool,
) -> Result<IndicatorEstimate> {
    let policy = EstimatorPolicy::default();
    let table = GrowthTable::sample(src, grid, &[mode], policy.exec)?;
    type_from_table(&table, triple, sigma, mode, shifted, &policy)
}

/// Order of a coefficient function. Constants have order 0 by definition
/// (their characteristic is bounded), without sampling.
pub fn coefficient_order(
    f: &EntireFunction,
    triple: &ScaleTriple,
    grid: &RadialGrid,
    mode: Mode,
) -> Result<Option<IndicatorEstimate>> {
    if f.as_constant().is_some() {
        return Ok(None);
    }
    estimate_order(f, triple, grid, mode, false).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::parse_function;
    use approx::assert_relative_eq;

    #[test]
    fn slope_fit_examples() {
        let line: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 1.5 * i as f64 + 2.0)).collect();
        let f = slope_fit(&line).unwrap();
        assert_relative_eq!(f.slope, 1.5, epsilon = 1e-14);
        assert!(f.residual < 1e-13);
        let flat: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0)).collect();
        assert_eq!(slope_fit(&flat).unwrap().slope, 0.0);
        let noisy: Vec<(f64, f64)> =
            (0..20).map(|i| (i as f64, 2.0 * i as f64 + if i % 2 == 0 { 0.01 } else { -0.01 })).collect();
        assert!((slope_fit(&noisy).unwrap().slope - 2.0).abs() <= 0.01);
        assert!(matches!(slope_fit(&line[..5]), Err(Error::TooFewSamples { .. })));
        let vertical: Vec<(f64, f64)> = (0..10).map(|i| (1.0, i as f64)).collect();
        assert!(matches!(slope_fit(&vertical), Err(Error::DegenerateFit)));
    }

    #[test]
    fn slope_fit_power_law_exact() {
        let pts: Vec<(f64, f64)> = (1..30).map(|i| (i as f64 * 0.3, 2.75 * i as f64 * 0.3)).collect();
        assert_relative_eq!(slope_fit(&pts).unwrap().slope, 2.75, max_relative = 1e-14);
    }

    #[test]
    fn tail_sup_examples() {
        assert_eq!(tail_sup(&[0.2, 0.9, 0.8], 2.0 / 3.0).unwrap(), 0.9);
        assert_eq!(tail_sup(&[0.4; 7], 0.5).unwrap(), 0.4);
        assert_eq!(tail_sup(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 4.0);
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::new(1.0, 1.1, 20, 0.5).is_err());
        assert!(RadialGrid::new(2.0, 1.1, 8, 0.5).is_err());
        let g = RadialGrid::spanning(4.0, 60.0, 24, 0.5).unwrap();
        assert_relative_eq!(g.r_max(), 60.0, max_relative = 1e-12);
    }

    #[test]
    fn exp_z_orders_and_types() {
        let f = parse_function("exp(z)").unwrap();
        let id = ScaleTriple::identity();
        let grid = RadialGrid::default();
        let t = estimate_order(&f, &id, &grid, Mode::TBased, false).unwrap();
        assert!((t.value_slope - 1.0).abs() < 1e-6, "{}", t.value_slope);
        let tau = estimate_type(&f, &id, 1.0, &grid, Mode::TBased, false).unwrap();
        assert_relative_eq!(tau.value_slope, 1.0 / std::f64::consts::PI, max_relative = 1e-6);
        let tau_m = estimate_type(&f, &id, 1.0, &grid, Mode::MBased, false).unwrap();
        assert_relative_eq!(tau_m.value_slope, 1.0, max_relative = 1e-9);
        assert_eq!(tau_m.kind, IndicatorKind::TypeM);
    }

    #[test]
    fn exp_z_squared_m_based() {
        let f = parse_function("exp(z^2)").unwrap();
        let e = estimate_order(&f, &ScaleTriple::identity(), &RadialGrid::default(), Mode::MBased, false).unwrap();
        assert!((e.value_slope - 2.0).abs() < 1e-9);
        let e2 = parse_function("exp(2z)").unwrap();
        let t = estimate_type(&e2, &ScaleTriple::identity(), 1.0, &RadialGrid::default(), Mode::MBased, false).unwrap();
        assert_relative_eq!(t.value_slope, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn double_exponential_scales() {
        let f = parse_function("exp(exp(z))").unwrap();
        let grid = RadialGrid::spanning(4.0, 60.0, 24, 0.5).unwrap();
        let e = estimate_order(&f, &ScaleTriple::log_id_id(), &grid, Mode::MBased, false).unwrap();
        assert!((e.value_slope - 1.0).abs() < 1e-9);
        let s = estimate_order(&f, &ScaleTriple::identity(), &grid, Mode::MBased, true).unwrap();
        assert!((s.value_slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_coefficients_have_order_zero() {
        let c = EntireFunction::real(-3.0);
        assert!(coefficient_order(&c, &ScaleTriple::identity(), &RadialGrid::default(), Mode::TBased)
            .unwrap()
            .is_none());
    }

    #[test]
    fn type_rejects_bad_sigma() {
        let f = parse_function("exp(z)").unwrap();
        for s in [0.0, -1.0, f64::INFINITY] {
            assert!(estimate_type(&f, &ScaleTriple::identity(), s, &RadialGrid::default(), Mode::MBased, false).is_err());
        }
    }
}
