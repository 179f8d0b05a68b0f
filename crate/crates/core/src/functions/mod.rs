//! Entire and meromorphic function models and the classical circle functionals
//! M(r,f), μ(r,f), ν(r,f), m(r,f), N(r,f), T(r,f).

mod expr;
mod meromorphic;
mod parse;

pub use expr::{CoefficientGenerator, EntireFunction, Node, PowerSeries, DEFAULT_DERIVATIVE_DEPTH};
pub use meromorphic::{MeromorphicFunction, POLE_CHECK_TOL};
pub use parse::parse_function;
pub(crate) use expr::LocalEvaluator;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::quad::{periodic_mean, TrapezoidPolicy};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Anything whose `log|f(z)|` can be evaluated on a circle.
pub trait LogModulus: Sync {
    fn log_abs_at(&self, z: Complex64) -> Result<f64>;

    /// Whether `M(r) = |f(r)|` is known structurally.
    fn max_on_positive_axis(&self) -> bool {
        false
    }
}

impl LogModulus for EntireFunction {
    fn log_abs_at(&self, z: Complex64) -> Result<f64> {
        self.log_abs(z)
    }

    fn max_on_positive_axis(&self) -> bool {
        self.has_nonnegative_coefficients()
    }
}

impl LogModulus for MeromorphicFunction {
    fn log_abs_at(&self, z: Complex64) -> Result<f64> {
        self.log_abs(z)
    }
}

/// Adapter turning a closure into a [`LogModulus`].
pub struct LogAbsFn<F>(pub F);

impl<F: Fn(Complex64) -> Result<f64> + Sync> LogModulus for LogAbsFn<F> {
    fn log_abs_at(&self, z: Complex64) -> Result<f64> {
        (self.0)(z)
    }
}

/// Circle sampling policy for the maximum modulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirclePolicy {
    pub start_log2: u32,
    pub max_log2: u32,
    pub rel_tol: f64,
    /// Golden-section refinement around the best sample.
    pub refine: bool,
    pub exec: Exec,
}

impl Default for CirclePolicy {
    fn default() -> Self {
        CirclePolicy { start_log2: 6, max_log2: 16, rel_tol: 1e-3, refine: true, exec: Exec::default() }
    }
}

fn circle_point(r: f64, theta: f64) -> Complex64 {
    Complex64::from_polar(r, theta)
}

/// Largest `log|f|` over `2^m` equispaced points, `m` increased until the
/// estimate settles. Returns `(log M, θ*)`.
pub fn sampled_circle_max<F: LogModulus + ?Sized>(f: &F, r: f64, policy: &CirclePolicy) -> Result<(f64, f64)> {
    let best_of = |n: usize, offset: usize, step: usize| -> Result<(f64, f64)> {
        let vals = policy.exec.map_range(n, |j| {
            let idx = offset + j * step;
            let total = n * step;
            let theta = 2.0 * PI * idx as f64 / total as f64;
            f.log_abs_at(circle_point(r, theta)).map(|v| (v, theta))
        });
        let mut best = (f64::NEG_INFINITY, 0.0);
        for v in vals {
            let v = v?;
            if v.0 > best.0 {
                best = v;
            }
        }
        Ok(best)
    };
    let mut n = 1usize << policy.start_log2;
    let mut best = best_of(n, 0, 1)?;
    while n < (1usize << policy.max_log2) {
        // the new points are the odd multiples on the doubled grid
        let mids = best_of(n, 1, 2)?;
        let prev = best.0;
        if mids.0 > best.0 {
            best = mids;
        }
        n *= 2;
        if (best.0 - prev).abs() <= policy.rel_tol * best.0.abs().max(1.0) {
            break;
        }
    }
    Ok(best)
}

fn golden_refine<F: LogModulus + ?Sized>(f: &F, r: f64, theta: f64, width: f64, start: f64) -> f64 {
    let g = |t: f64| f.log_abs_at(circle_point(r, t)).unwrap_or(f64::NEG_INFINITY);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (theta - width, theta + width);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..60 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
        if (b - a) < 1e-13 * (1.0 + theta.abs()) {
            break;
        }
    }
    start.max(gc).max(gd)
}

/// `log M(r, f)`. With nonnegative Taylor coefficients this is `log f(r)`
/// exactly; otherwise the sampled circle maximum, refined locally.
pub fn log_max_modulus<F: LogModulus + ?Sized>(f: &F, r: f64, policy: &CirclePolicy) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {r} must be positive")));
    }
    if f.max_on_positive_axis() {
        return f.log_abs_at(Complex64::new(r, 0.0));
    }
    let (best, theta) = sampled_circle_max(f, r, policy)?;
    if !policy.refine || !best.is_finite() {
        return Ok(best);
    }
    let cell = 2.0 * PI / (1usize << policy.max_log2.min(policy.start_log2 + 10)) as f64;
    Ok(golden_refine(f, r, theta, 2.0 * cell.max(2.0 * PI / (1usize << policy.start_log2) as f64), best))
}

/// `m(r, f) = (1/2π)∫ log⁺|f(re^{iθ})| dθ` by the doubling trapezoid rule.
/// A circle that hits a pole or zero is nudged by `1e-9` relative.
pub fn proximity_m<F: LogModulus + ?Sized>(f: &F, r: f64, policy: &TrapezoidPolicy) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {r} must be positive")));
    }
    let mut rr = r;
    for _ in 0..4 {
        let res = periodic_mean(
            |t| {
                let v = f.log_abs_at(circle_point(rr, t))?;
                if v.is_nan() || v == f64::INFINITY {
                    Err(Error::InvalidArgument("pole on circle".into()))
                } else {
                    Ok(v.max(0.0))
                }
            },
            policy,
        );
        match res {
            Err(Error::InvalidArgument(msg)) if msg == "pole on circle" => rr *= 1.0 + 1e-9,
            other => return other.map(|(m, _)| m),
        }
    }
    Err(Error::InvalidArgument(format!("circle |z| = {r} meets a singularity")))
}

/// One row of the classical functionals at radius `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct GrowthSample {
    pub r: f64,
    pub log_M: Option<f64>,
    pub log_mu: Option<f64>,
    pub nu: Option<usize>,
    pub m: f64,
    pub N: f64,
    pub T: f64,
}

/// Policies for all circle functionals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FunctionalPolicy {
    pub circle: CirclePolicy,
    pub trapezoid: TrapezoidPolicy,
    pub max_term: MaxTermPolicy,
}

impl FunctionalPolicy {
    pub fn with_exec(exec: Exec) -> Self {
        let mut p = Self::default();
        p.circle.exec = exec;
        p.trapezoid.exec = exec;
        p
    }
}

/// `T(r, f)` for an entire function with `M`, `μ`, `ν` where available.
pub fn characteristic_t_entire(f: &EntireFunction, r: f64, policy: &FunctionalPolicy) -> Result<GrowthSample> {
    let m = proximity_m(f, r, &policy.trapezoid)?;
    let log_m = log_max_modulus(f, r, &policy.circle)?;
    let (log_mu, nu) = match max_term_and_index(f, r, &policy.max_term) {
        Ok((l, n)) => (Some(l), Some(n)),
        Err(_) => (None, None),
    };
    Ok(GrowthSample { r, log_M: Some(log_m), log_mu, nu, m, N: 0.0, T: m })
}

/// `T(r, f) = m(r, f) + N(r, f)`. For entire `f`, the maximum modulus and
/// maximum term are filled in as well.
pub fn characteristic_t(f: &MeromorphicFunction, r: f64, policy: &FunctionalPolicy) -> Result<GrowthSample> {
    if f.is_entire() {
        let c = f.denominator().as_constant().expect("constant denominator");
        let g = f.numerator().scale(c.inv());
        return characteristic_t_entire(&g, r, policy);
    }
    let n = f.counting_n(r)?;
    let m = proximity_m(f, r, &policy.trapezoid)?;
    Ok(GrowthSample { r, log_M: None, log_mu: None, nu: None, m, N: n, T: m + n })
}

/// Limits for the maximum-term scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxTermPolicy {
    pub start_terms: usize,
    pub max_terms: usize,
    /// Consecutive decreasing nonzero terms required past the running max.
    pub decreasing_run: usize,
}

impl Default for MaxTermPolicy {
    fn default() -> Self {
        MaxTermPolicy { start_terms: 64, max_terms: 4096, decreasing_run: 10 }
    }
}

/// `(log μ(r, f), ν(r, f))`: the largest term `|a_n| rⁿ` and the largest index
/// attaining it. Terms equal to within `1e-10` relative in log are ties.
pub fn max_term_and_index(f: &EntireFunction, r: f64, policy: &MaxTermPolicy) -> Result<(f64, usize)> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {r} must be positive")));
    }
    let lr = r.ln();
    let degree = f.polynomial_degree_bound();
    let mut n = match degree {
        Some(d) => d + 1,
        None => policy.start_terms,
    };
    loop {
        let coeffs = f.taylor(n)?;
        let mut best = f64::NEG_INFINITY;
        let mut idx = 0usize;
        let mut run = 0usize;
        let mut prev = f64::NEG_INFINITY;
        let mut done = false;
        for (k, a) in coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let lt = a.log_abs() + k as f64 * lr;
            let tol = 1e-10 * best.abs().max(1.0);
            if lt > best + tol {
                best = lt;
                idx = k;
                run = 0;
            } else if lt >= best - tol {
                best = best.max(lt);
                idx = k;
                run = 0;
            } else if lt < prev {
                run += 1;
                if run >= policy.decreasing_run && lt < best - 37.0 {
                    done = true;
                    break;
                }
            } else {
                run = 0;
            }
            prev = lt;
        }
        if best == f64::NEG_INFINITY {
            return Ok((f64::NEG_INFINITY, 0));
        }
        if done || degree.is_some() {
            return Ok((best, idx));
        }
        if n >= policy.max_terms {
            return Err(Error::TruncationExhausted { terms: n });
        }
        n = (n * 2).min(policy.max_terms);
    }
}

/// `|f^{(m)}(z_r)·(z_r/ν)^m / f(z_r) − 1|` at the sampled maximum-modulus
/// point `z_r` of the circle `|z| = r`.
pub fn wiman_valiron_deviation(f: &EntireFunction, r: f64, m: usize, policy: &FunctionalPolicy) -> Result<f64> {
    if f.is_polynomial() {
        return Err(Error::PolynomialInput);
    }
    let circle = CirclePolicy { refine: false, ..policy.circle };
    let theta = if f.has_nonnegative_coefficients() {
        0.0
    } else {
        sampled_circle_max(f, r, &circle)?.1
    };
    let z = circle_point(r, theta);
    let (_, nu) = max_term_and_index(f, r, &policy.max_term)?;
    if nu == 0 {
        return Err(Error::InvalidArgument("central index is zero".into()));
    }
    let d = f.derivative(m)?;
    let ratio = d.eval(z)? / f.eval(z)?;
    let factor = crate::scaled::ScaledComplex::from_complex(z / nu as f64).powi(m as i32);
    Ok(((ratio * factor).to_complex() - 1.0).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp_z() -> EntireFunction {
        EntireFunction::z().exp()
    }

    fn seq() -> FunctionalPolicy {
        FunctionalPolicy::with_exec(Exec::Sequential)
    }

    #[test]
    fn max_modulus_examples() {
        let p = CirclePolicy::default();
        assert_relative_eq!(log_max_modulus(&exp_z(), 7.0, &p).unwrap(), 7.0, epsilon = 1e-12);
        let ez2 = parse_function("exp(z^2)").unwrap();
        assert_relative_eq!(log_max_modulus(&ez2, 3.0, &p).unwrap(), 9.0, epsilon = 1e-12);
        let cosh = parse_function("exp(z) + exp(-z)").unwrap();
        let expect = (5f64.exp() + (-5f64).exp()).ln();
        assert_relative_eq!(log_max_modulus(&cosh, 5.0, &p).unwrap(), expect, epsilon = 1e-10);
    }

    #[test]
    fn proximity_examples() {
        let p = TrapezoidPolicy::default();
        for r in [1.0, 10.0, 100.0] {
            assert_relative_eq!(proximity_m(&exp_z(), r, &p).unwrap(), r / PI, max_relative = 1e-6);
        }
        assert_eq!(proximity_m(&EntireFunction::real(1.0), 3.0, &p).unwrap(), 0.0);
        let e2 = std::f64::consts::E.powi(2);
        assert_relative_eq!(proximity_m(&EntireFunction::z(), e2, &p).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn characteristic_examples() {
        let t = characteristic_t_entire(&exp_z(), PI, &seq()).unwrap();
        assert_relative_eq!(t.T, 1.0, epsilon = 1e-8);
        assert_eq!(t.N, 0.0);
        let e = std::f64::consts::E;
        let inv_z = MeromorphicFunction::new(
            EntireFunction::real(1.0),
            EntireFunction::z(),
            vec![(Complex64::new(0.0, 0.0), 1)],
            100.0,
        )
        .unwrap();
        let s = characteristic_t(&inv_z, e, &seq()).unwrap();
        assert_eq!(s.m, 0.0);
        assert_relative_eq!(s.T, 1.0, epsilon = 1e-14);
        assert!(s.log_M.is_none());
    }

    #[test]
    fn max_term_examples() {
        let p = MaxTermPolicy::default();
        let (lmu, nu) = max_term_and_index(&exp_z(), 2.5, &p).unwrap();
        assert_eq!(nu, 2);
        assert_relative_eq!(lmu.exp(), 3.125, epsilon = 1e-12);
        let (_, nu) = max_term_and_index(&exp_z(), 10.0, &p).unwrap();
        assert_eq!(nu, 10);
        let cube = EntireFunction::real_polynomial(&[0.0, 0.0, 0.0, 1.0]);
        let (lmu, nu) = max_term_and_index(&cube, 1.7, &p).unwrap();
        assert_eq!(nu, 3);
        assert_relative_eq!(lmu, 3.0 * 1.7f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn wiman_valiron_examples() {
        let p = seq();
        for m in [1, 2] {
            assert!(wiman_valiron_deviation(&exp_z(), 20.0, m, &p).unwrap() <= 1e-9);
        }
        let ez2 = parse_function("exp(z^2)").unwrap();
        assert!(wiman_valiron_deviation(&ez2, 4.0, 1, &p).unwrap() <= 0.1);
        let poly = EntireFunction::real_polynomial(&[1.0, 2.0]);
        assert!(matches!(wiman_valiron_deviation(&poly, 4.0, 1, &p), Err(Error::PolynomialInput)));
    }
}
